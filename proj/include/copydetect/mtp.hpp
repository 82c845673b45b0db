#pragma once

#include "copydetect/indices.hpp"

#include <set>
#include <span>
#include <string>
#include <vector>

namespace copydetect::mtp {

/// Benjamini-Hochberg step-up: with p sorted ascending (stable), find the
/// largest i with P_(i) <= (i/m) p_star and reject the first i. Returns the
/// rejected input positions in ascending order.
std::vector<std::size_t> bh_reject(std::span<const double> p_values, double p_star);

/// Which role makes a student "suspected" when their pair is rejected.
enum class SuspectRule {
    copier,      ///< appears as the copier of a rejected ordered pair
    either_role, ///< appears on either side
};

struct RoomMeta {
    std::string room_id;
    std::size_t num_students = 0;
};

struct RoomReport {
    std::string room_id;
    std::size_t num_students = 0;
    std::size_t num_tests = 0;
    std::vector<PairResult> rejected_pairs;
    std::set<std::string> suspected_students;
    double suspected_share = 0.0;
    bool massive_flag = false;
    double p_star = 0.0;
    double threshold = 0.0;
    bool skipped = false;
};

inline constexpr double kDefaultPStar = 0.01;
inline constexpr double kDefaultThreshold = 0.6;

/// BH over one room's ordered-pair results; massive_flag iff the suspected
/// share strictly exceeds `threshold`.
RoomReport room_report(std::span<const PairResult> results, const RoomMeta& room, double p_star = kDefaultPStar,
                       double threshold = kDefaultThreshold, SuspectRule rule = SuspectRule::copier);

/// Reports for many rooms; rooms are independent and run in parallel.
std::vector<RoomReport> room_reports(std::span<const RoomDetection> rooms, std::span<const RoomMeta> meta,
                                      double p_star = kDefaultPStar, double threshold = kDefaultThreshold,
                                      SuspectRule rule = SuspectRule::copier);

struct MassiveSummary {
    std::size_t rooms = 0;
    std::size_t flagged = 0;
    double proportion = 0.0;
};

MassiveSummary massive_summary(std::span<const RoomReport> reports);

} // namespace copydetect::mtp
