#pragma once

#include "copydetect/dataio.hpp"
#include "copydetect/nominal.hpp"
#include "copydetect/pbd.hpp"
#include "copydetect/wesolowsky.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace copydetect {

enum class Family { omega, gamma };
enum class Conditioning { unconditional, conditional };
enum class Tail { exact, standardized };

/// One of the eight indices: omega1, omega2, omega1s, omega2s, gamma1,
/// gamma2, gamma1s, gamma2s ("1" unconditional, "2" conditional, "s"
/// normal-approximation tail). omega uses the nominal response model, gamma
/// the Wesolowsky model.
struct IndexVariant {
    Family family = Family::omega;
    Conditioning conditioning = Conditioning::conditional;
    Tail tail = Tail::standardized;

    std::string name() const;
    static IndexVariant parse(std::string_view name);
    static std::array<IndexVariant, 8> all();

    bool operator==(const IndexVariant&) const = default;
};

/// Option probabilities of every student, [student][item][option], from one
/// fitted model. Students the model cannot cover are marked ineligible.
class ProbabilityTable {
  public:
    ProbabilityTable(Family family, std::size_t students, std::size_t items, std::size_t options);

    Family family() const { return family_; }
    std::size_t num_students() const { return eligible_.size(); }
    std::size_t num_items() const { return items_; }
    std::size_t num_options() const { return options_; }

    std::span<const double> student(std::size_t j) const { return {data_.data() + j * stride(), stride()}; }
    std::span<double> student(std::size_t j) { return {data_.data() + j * stride(), stride()}; }
    bool eligible(std::size_t j) const { return eligible_[j] != 0; }
    void set_eligible(std::size_t j, bool ok) { eligible_[j] = ok ? 1 : 0; }

  private:
    std::size_t stride() const { return items_ * options_; }

    Family family_;
    std::size_t items_;
    std::size_t options_;
    std::vector<double> data_;
    std::vector<unsigned char> eligible_;
};

/// EAP abilities for every record, then nrm probabilities. All-missing
/// records are ineligible.
ProbabilityTable nominal_table(const NominalModel& model, const ResponseMatrix& matrix,
                               std::vector<AbilityEstimate>* abilities = nullptr);
/// Uses the model's stored ability for known student ids and solves the
/// ability equation for any other record.
ProbabilityTable wesolowsky_table(const WesolowskyModel& model, const ResponseMatrix& matrix);

struct PairResult {
    std::string copier_id;
    std::string source_id;
    std::string room_id;
    IndexVariant variant;
    std::size_t matches = 0;
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t n_scored = 0;
};

struct DetectOptions {
    /// Subtract 0.5 from the match count in the standardized statistic.
    bool continuity_correction = false;
};

/// Identical non-missing answers; positions where either side is missing
/// count as non-matches.
std::size_t count_matches(std::span<const Answer> copier, std::span<const Answer> source);

/// Match probabilities over the questions both students answered.
/// `probs_*` are [item][option] tables. Throws std::invalid_argument("no
/// overlapping answered questions") when nothing is scored.
pbd::MatchProfile match_profile(Conditioning conditioning, std::span<const double> probs_copier,
                                std::span<const double> probs_source, std::span<const Answer> answers_copier,
                                std::span<const Answer> answers_source, std::size_t num_options);

double exact_p(const pbd::MatchProfile& profile, std::size_t matches);

struct StandardizedResult {
    double z;
    double p;
};
StandardizedResult standardized_p(const pbd::MatchProfile& profile, std::size_t matches,
                                  bool continuity_correction = false);

PairResult detect_pair(const StudentRecord& copier, std::span<const double> probs_copier, const StudentRecord& source,
                       std::span<const double> probs_source, IndexVariant variant, std::size_t num_options,
                       const DetectOptions& options = {});

/// Convenience overload pulling both students from a matrix and its table.
PairResult detect_pair(const ResponseMatrix& matrix, const ProbabilityTable& table, std::size_t copier,
                       std::size_t source, IndexVariant variant, const DetectOptions& options = {});

struct RoomDetection {
    std::string room_id;
    std::size_t eligible_students = 0;
    bool skipped = false; ///< fewer than two eligible students
    std::vector<PairResult> results;
};

/// Every ordered pair of eligible students in `members`, sorted by copier id
/// then source id. OpenMP over pairs; output order is independent of the
/// schedule.
RoomDetection detect_room(const ResponseMatrix& matrix, const ProbabilityTable& table,
                          std::span<const std::size_t> members, IndexVariant variant,
                          const DetectOptions& options = {});

/// All rooms of the matrix, in room order of first appearance.
std::vector<RoomDetection> detect_all_rooms(const ResponseMatrix& matrix, const ProbabilityTable& table,
                                            IndexVariant variant, const DetectOptions& options = {});

namespace serial {
RoomDetection detect_room(const ResponseMatrix& matrix, const ProbabilityTable& table,
                          std::span<const std::size_t> members, IndexVariant variant,
                          const DetectOptions& options = {});
} // namespace serial

} // namespace copydetect
