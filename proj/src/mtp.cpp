#include "copydetect/mtp.hpp"
#include "copydetect/parallel.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace copydetect::mtp {

std::vector<std::size_t> bh_reject(std::span<const double> p_values, double p_star) {
    if (!(p_star > 0.0 && p_star < 1.0))
        throw std::invalid_argument("p_star must lie in (0,1)");
    for (std::size_t i = 0; i < p_values.size(); ++i) {
        if (!(p_values[i] >= 0.0 && p_values[i] <= 1.0))
            throw std::invalid_argument("p-value " + std::to_string(i) + " outside [0,1]");
    }
    const std::size_t m = p_values.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });

    std::size_t k = 0;
    for (std::size_t i = m; i > 0; --i) {
        if (p_values[order[i - 1]] <= static_cast<double>(i) / static_cast<double>(m) * p_star) {
            k = i;
            break;
        }
    }
    std::vector<std::size_t> rejected(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(rejected.begin(), rejected.end());
    return rejected;
}

RoomReport room_report(std::span<const PairResult> results, const RoomMeta& room, double p_star, double threshold,
                       SuspectRule rule) {
    RoomReport rep;
    rep.room_id = room.room_id;
    rep.num_students = room.num_students;
    rep.num_tests = results.size();
    rep.p_star = p_star;
    rep.threshold = threshold;
    if (room.num_students == 0 || results.empty()) {
        rep.skipped = true;
        return rep;
    }
    for (const auto& r : results) {
        if (r.room_id != room.room_id)
            throw std::invalid_argument("room_report: result for room " + r.room_id + " passed to room " +
                                        room.room_id);
        if (!(r.variant == results.front().variant))
            throw std::invalid_argument("room_report: results mix index variants");
    }

    std::vector<double> p(results.size());
    std::transform(results.begin(), results.end(), p.begin(), [](const PairResult& r) { return r.p_value; });
    for (std::size_t idx : bh_reject(p, p_star)) {
        const auto& r = results[idx];
        rep.rejected_pairs.push_back(r);
        rep.suspected_students.insert(r.copier_id);
        if (rule == SuspectRule::either_role)
            rep.suspected_students.insert(r.source_id);
    }
    rep.suspected_share =
        static_cast<double>(rep.suspected_students.size()) / static_cast<double>(rep.num_students);
    rep.massive_flag = rep.suspected_share > threshold;
    return rep;
}

std::vector<RoomReport> room_reports(std::span<const RoomDetection> rooms, std::span<const RoomMeta> meta,
                                      double p_star, double threshold, SuspectRule rule) {
    if (rooms.size() != meta.size())
        throw std::invalid_argument("room_reports: one RoomMeta per room required");
    std::vector<RoomReport> out(rooms.size());
    parallel_for(rooms.size(), [&](std::size_t i) { out[i] = room_report(rooms[i].results, meta[i], p_star, threshold, rule); });
    return out;
}

MassiveSummary massive_summary(std::span<const RoomReport> reports) {
    MassiveSummary s;
    s.rooms = reports.size();
    s.flagged = static_cast<std::size_t>(
        std::count_if(reports.begin(), reports.end(), [](const RoomReport& r) { return r.massive_flag; }));
    s.proportion = s.rooms == 0 ? 0.0 : static_cast<double>(s.flagged) / static_cast<double>(s.rooms);
    return s;
}

} // namespace copydetect::mtp
