#include "copydetect/indices.hpp"
#include "copydetect/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace copydetect {

std::string IndexVariant::name() const {
    std::string n = family == Family::omega ? "omega" : "gamma";
    n += conditioning == Conditioning::unconditional ? '1' : '2';
    if (tail == Tail::standardized)
        n += 's';
    return n;
}

IndexVariant IndexVariant::parse(std::string_view name) {
    for (const auto& v : all()) {
        if (v.name() == name)
            return v;
    }
    throw std::invalid_argument("unknown index variant '" + std::string(name) +
                                "' (expected omega1|omega2|omega1s|omega2s|gamma1|gamma2|gamma1s|gamma2s)");
}

std::array<IndexVariant, 8> IndexVariant::all() {
    std::array<IndexVariant, 8> out;
    std::size_t k = 0;
    for (Family f : {Family::omega, Family::gamma})
        for (Tail t : {Tail::exact, Tail::standardized})
            for (Conditioning c : {Conditioning::unconditional, Conditioning::conditional})
                out[k++] = IndexVariant{f, c, t};
    return out;
}

ProbabilityTable::ProbabilityTable(Family family, std::size_t students, std::size_t items, std::size_t options)
    : family_(family), items_(items), options_(options), data_(students * items * options, 0.0),
      eligible_(students, 1) {}

ProbabilityTable nominal_table(const NominalModel& model, const ResponseMatrix& matrix,
                               std::vector<AbilityEstimate>* abilities) {
    const auto& design = matrix.design();
    if (model.num_items() != design.num_questions() || model.num_options() != design.num_options())
        throw std::invalid_argument("nominal model does not match the exam design");
    ProbabilityTable table(Family::omega, matrix.size(), model.num_items(), model.num_options());
    std::vector<AbilityEstimate> est(matrix.size());
    parallel_for(matrix.size(), [&](std::size_t j) {
        est[j] = eap_ability(model, matrix.record(j).responses);
        auto row = table.student(j);
        for (std::size_t i = 0; i < model.num_items(); ++i)
            model.probabilities(est[j].theta, i, row.subspan(i * model.num_options(), model.num_options()));
        table.set_eligible(j, !est[j].no_answers);
    });
    if (abilities)
        *abilities = std::move(est);
    return table;
}

ProbabilityTable wesolowsky_table(const WesolowskyModel& model, const ResponseMatrix& matrix) {
    if (!(model.design() == matrix.design()))
        throw std::invalid_argument("Wesolowsky model was fitted on a different exam");
    ProbabilityTable table(Family::gamma, matrix.size(), model.num_items(), model.num_options());
    for (std::size_t j = 0; j < matrix.size(); ++j) {
        const auto& rec = matrix.record(j);
        const WesolowskyStudent* known = model.find_student(rec.student_id);
        const WesolowskyStudent st = known ? *known : model.solve_student(rec.responses);
        if (!st.usable()) {
            table.set_eligible(j, false);
            continue;
        }
        auto row = table.student(j);
        for (std::size_t i = 0; i < model.num_items(); ++i)
            model.probabilities(st.a, i, row.subspan(i * model.num_options(), model.num_options()));
    }
    return table;
}

std::size_t count_matches(std::span<const Answer> copier, std::span<const Answer> source) {
    if (copier.size() != source.size())
        throw std::invalid_argument("count_matches: answer vectors differ in length");
    std::size_t m = 0;
    for (std::size_t i = 0; i < copier.size(); ++i) {
        if (copier[i] != kMissing && copier[i] == source[i])
            ++m;
    }
    return m;
}

pbd::MatchProfile match_profile(Conditioning conditioning, std::span<const double> probs_copier,
                                std::span<const double> probs_source, std::span<const Answer> answers_copier,
                                std::span<const Answer> answers_source, std::size_t num_options) {
    const std::size_t items = answers_copier.size();
    if (answers_source.size() != items || probs_copier.size() != items * num_options ||
        probs_source.size() != items * num_options)
        throw std::invalid_argument("match_profile: inconsistent sizes");
    std::vector<double> pis;
    pis.reserve(items);
    for (std::size_t i = 0; i < items; ++i) {
        if (answers_copier[i] == kMissing || answers_source[i] == kMissing)
            continue;
        const double* pc = probs_copier.data() + i * num_options;
        if (conditioning == Conditioning::conditional) {
            pis.push_back(pc[static_cast<std::size_t>(answers_source[i])]);
        } else {
            const double* ps = probs_source.data() + i * num_options;
            double s = 0.0;
            for (std::size_t v = 0; v < num_options; ++v)
                s += pc[v] * ps[v];
            pis.push_back(std::min(s, 1.0));
        }
    }
    if (pis.empty())
        throw std::invalid_argument("no overlapping answered questions");
    return pbd::MatchProfile(std::move(pis));
}

double exact_p(const pbd::MatchProfile& profile, std::size_t matches) {
    return pbd::upper_tail(profile, matches);
}

StandardizedResult standardized_p(const pbd::MatchProfile& profile, std::size_t matches, bool continuity_correction) {
    if (matches > profile.size())
        throw std::out_of_range("standardized_p: matches exceed scored questions");
    const double m = static_cast<double>(matches) - (continuity_correction ? 0.5 : 0.0);
    const double z = (m - profile.mean()) / std::sqrt(profile.variance());
    return {z, 0.5 * std::erfc(z / std::sqrt(2.0))};
}

PairResult detect_pair(const StudentRecord& copier, std::span<const double> probs_copier, const StudentRecord& source,
                       std::span<const double> probs_source, IndexVariant variant, std::size_t num_options,
                       const DetectOptions& options) {
    PairResult r;
    r.copier_id = copier.student_id;
    r.source_id = source.student_id;
    r.room_id = copier.room_id;
    r.variant = variant;
    const auto profile =
        match_profile(variant.conditioning, probs_copier, probs_source, copier.responses, source.responses, num_options);
    r.n_scored = profile.size();
    r.matches = count_matches(copier.responses, source.responses);
    if (variant.tail == Tail::exact) {
        r.statistic = static_cast<double>(r.matches);
        r.p_value = exact_p(profile, r.matches);
    } else {
        const auto s = standardized_p(profile, r.matches, options.continuity_correction);
        r.statistic = s.z;
        r.p_value = s.p;
    }
    return r;
}

PairResult detect_pair(const ResponseMatrix& matrix, const ProbabilityTable& table, std::size_t copier,
                       std::size_t source, IndexVariant variant, const DetectOptions& options) {
    if (table.family() != variant.family)
        throw std::invalid_argument("variant " + variant.name() + " needs the " +
                                    (variant.family == Family::omega ? "nominal" : "Wesolowsky") + " model");
    if (!table.eligible(copier) || !table.eligible(source))
        throw std::invalid_argument("student not covered by the model");
    return detect_pair(matrix.record(copier), table.student(copier), matrix.record(source), table.student(source),
                       variant, table.num_options(), options);
}

namespace {

struct RoomPlan {
    RoomDetection detection;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
};

RoomPlan plan_room(const ResponseMatrix& matrix, const ProbabilityTable& table, std::span<const std::size_t> members,
                   IndexVariant variant) {
    if (table.family() != variant.family)
        throw std::invalid_argument("variant " + variant.name() + " does not match the probability table");
    RoomPlan plan;
    std::vector<std::size_t> eligible;
    for (std::size_t j : members) {
        if (table.eligible(j))
            eligible.push_back(j);
    }
    if (!members.empty())
        plan.detection.room_id = matrix.record(members.front()).room_id;
    std::sort(eligible.begin(), eligible.end(), [&](std::size_t a, std::size_t b) {
        return matrix.record(a).student_id < matrix.record(b).student_id;
    });
    plan.detection.eligible_students = eligible.size();
    if (eligible.size() < 2) {
        plan.detection.skipped = true;
        return plan;
    }
    plan.pairs.reserve(eligible.size() * (eligible.size() - 1));
    for (std::size_t c : eligible)
        for (std::size_t s : eligible)
            if (c != s)
                plan.pairs.emplace_back(c, s);
    plan.detection.results.resize(plan.pairs.size());
    return plan;
}

// Pairs without a commonly answered question carry no evidence: p = 1.
PairResult room_pair(const ResponseMatrix& matrix, const ProbabilityTable& table, std::size_t c, std::size_t s,
                     IndexVariant variant, const DetectOptions& options) {
    const auto& rc = matrix.record(c);
    const auto& rs = matrix.record(s);
    for (std::size_t i = 0; i < rc.responses.size(); ++i) {
        if (rc.responses[i] != kMissing && rs.responses[i] != kMissing)
            return detect_pair(matrix, table, c, s, variant, options);
    }
    PairResult r;
    r.copier_id = rc.student_id;
    r.source_id = rs.student_id;
    r.room_id = rc.room_id;
    r.variant = variant;
    return r;
}

} // namespace

RoomDetection detect_room(const ResponseMatrix& matrix, const ProbabilityTable& table,
                          std::span<const std::size_t> members, IndexVariant variant, const DetectOptions& options) {
    auto plan = plan_room(matrix, table, members, variant);
    parallel_for(plan.pairs.size(), [&](std::size_t k) {
        const auto [c, s] = plan.pairs[k];
        plan.detection.results[k] = room_pair(matrix, table, c, s, variant, options);
    });
    return std::move(plan.detection);
}

namespace serial {

RoomDetection detect_room(const ResponseMatrix& matrix, const ProbabilityTable& table,
                          std::span<const std::size_t> members, IndexVariant variant, const DetectOptions& options) {
    auto plan = plan_room(matrix, table, members, variant);
    for (std::size_t k = 0; k < plan.pairs.size(); ++k) {
        const auto [c, s] = plan.pairs[k];
        plan.detection.results[k] = room_pair(matrix, table, c, s, variant, options);
    }
    return std::move(plan.detection);
}

} // namespace serial

std::vector<RoomDetection> detect_all_rooms(const ResponseMatrix& matrix, const ProbabilityTable& table,
                                            IndexVariant variant, const DetectOptions& options) {
    std::vector<RoomDetection> rooms;
    for (const auto& room : matrix.room_ids()) {
        const auto members = matrix.room_members(room);
        rooms.push_back(detect_room(matrix, table, members, variant, options));
        rooms.back().room_id = room;
    }
    return rooms;
}

} // namespace copydetect
