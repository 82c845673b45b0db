#pragma once

#include "copydetect/dataio.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

// Wesolowsky's behavioral model. Item i has a proportion correct r_i; a
// student with ability exponent a answers it correctly with probability
// (1 - (1 - r_i)^a)^(1/a). Wrong answers are spread over the incorrect
// options in proportion to how often the cohort chose them.

namespace copydetect {

enum class AbilityStatus {
    ok,
    clamped_low,  ///< observed score below what a = 1e-3 predicts
    clamped_high, ///< observed score above what a = 1e3 predicts
    no_answers,   ///< nothing answered; excluded from pairwise detection
};

const char* to_string(AbilityStatus status);

struct WesolowskyStudent {
    double a = 1.0;
    double c = 0.0;
    double residual = 0.0;
    std::size_t answered = 0;
    AbilityStatus status = AbilityStatus::ok;

    bool usable() const { return status != AbilityStatus::no_answers; }
    bool operator==(const WesolowskyStudent&) const = default;
};

class WesolowskyModel {
  public:
    static constexpr double kEpsilon = 1e-6;
    static constexpr double kMinA = 1e-3;
    static constexpr double kMaxA = 1e3;

    WesolowskyModel(ExamDesign design, std::vector<double> proportion_correct, std::vector<double> wrong_shares);

    const ExamDesign& design() const { return design_; }
    std::size_t num_items() const { return design_.num_questions(); }
    std::size_t num_options() const { return design_.num_options(); }

    double proportion_correct(std::size_t item) const { return r_[item]; }
    /// Share of incorrect answers on `item` going to `option`; 0 for the key.
    double wrong_share(std::size_t item, std::size_t option) const { return q_[item * num_options() + option]; }
    std::span<const double> all_proportions() const { return r_; }
    std::span<const double> all_wrong_shares() const { return q_; }

    /// p_i(a) = (1 - (1 - r_i)^a)^(1/a), evaluated in log space.
    double correct_prob(double a, std::size_t item) const;
    /// Mean of p_i(a) over the answered items of `responses`.
    double expected_score(double a, std::span<const Answer> responses) const;
    void probabilities(double a, std::size_t item, std::span<double> out) const;

    /// Solves mean_i p_i(a) = c for one answer vector by a bracketed root
    /// search on log a in [log 1e-3, log 1e3].
    WesolowskyStudent solve_student(std::span<const Answer> responses) const;

    std::vector<std::string> student_ids;
    std::vector<WesolowskyStudent> students;

    const WesolowskyStudent* find_student(std::string_view id) const;

    bool operator==(const WesolowskyModel&) const = default;

  private:
    ExamDesign design_;
    std::vector<double> r_;
    std::vector<double> q_;
};

WesolowskyModel fit_wesolowsky(const ResponseMatrix& matrix);

/// Probability that student j (by fitted index) picks `option` on `item`.
double wes_prob(const WesolowskyModel& model, std::size_t student, std::size_t item, std::size_t option);

} // namespace copydetect
