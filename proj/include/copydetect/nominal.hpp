#pragma once

#include "copydetect/dataio.hpp"
#include "copydetect/quadrature.hpp"

#include <cstddef>
#include <span>
#include <vector>

// Nominal response model: option v of item i is chosen by an examinee of
// ability theta with probability softmax_v(intercept_iv + slope_iv * theta).
// Item parameters are estimated by marginal maximum likelihood (EM over a
// fixed normal quadrature); abilities by the posterior mean (EAP).

namespace copydetect {

enum class ItemStatus {
    ok,
    unused_option_pinned, ///< at least one option never chosen; its parameters are held fixed
    degenerate_uniform,   ///< one (or no) observed option; item falls back to the uniform model
};

const char* to_string(ItemStatus status);

class NominalModel {
  public:
    NominalModel(std::size_t num_items, std::size_t num_options, Quadrature quadrature);

    std::size_t num_items() const { return items_; }
    std::size_t num_options() const { return options_; }
    const Quadrature& quadrature() const { return quadrature_; }

    double intercept(std::size_t item, std::size_t option) const { return intercepts_[item * options_ + option]; }
    double slope(std::size_t item, std::size_t option) const { return slopes_[item * options_ + option]; }
    std::span<double> intercepts(std::size_t item) { return {intercepts_.data() + item * options_, options_}; }
    std::span<double> slopes(std::size_t item) { return {slopes_.data() + item * options_, options_}; }
    std::span<const double> intercepts(std::size_t item) const { return {intercepts_.data() + item * options_, options_}; }
    std::span<const double> slopes(std::size_t item) const { return {slopes_.data() + item * options_, options_}; }

    std::span<const double> all_intercepts() const { return intercepts_; }
    std::span<const double> all_slopes() const { return slopes_; }

    ItemStatus status(std::size_t item) const { return status_[item]; }
    void set_status(std::size_t item, ItemStatus s) { status_[item] = s; }

    /// Option probabilities for one item, written to `out` (size num_options).
    void probabilities(double theta, std::size_t item, std::span<double> out) const;

    /// Re-imposes sum-to-zero on intercepts and slopes of every item. Leaves
    /// all probabilities unchanged.
    void center();

    bool operator==(const NominalModel&) const = default;

  private:
    std::size_t items_;
    std::size_t options_;
    Quadrature quadrature_;
    std::vector<double> intercepts_;
    std::vector<double> slopes_;
    std::vector<ItemStatus> status_;
};

double nrm_prob(const NominalModel& model, double theta, std::size_t item, std::size_t option);

struct NominalFitConfig {
    std::size_t quadrature_nodes = 21;
    std::size_t max_cycles = 200;
    double tolerance = 1e-4;
    std::size_t min_examinees = 200;
    std::size_t newton_steps = 10;
};

struct NominalFit {
    NominalModel model;
    bool converged = false;
    std::size_t cycles = 0;
    /// Marginal log-likelihood at the start of every cycle, plus the final
    /// value after the last M-step.
    std::vector<double> loglik_trace;
};

/// Bock-Aitkin EM. Missing answers contribute no likelihood factor.
/// Throws std::invalid_argument("insufficient examinees") below
/// config.min_examinees.
NominalFit fit_nominal_mml(const ResponseMatrix& matrix, const NominalFitConfig& config = {});

/// Marginal log-likelihood of the data under `model` with its quadrature.
double marginal_loglik(const NominalModel& model, const ResponseMatrix& matrix);

struct AbilityEstimate {
    double theta = 0.0;
    double posterior_sd = 1.0;
    bool no_answers = false;
};

AbilityEstimate eap_ability(const NominalModel& model, std::span<const Answer> responses);

/// Expected sufficient statistics of one E-step: posterior-weighted option
/// counts laid out [item][option][node], and the marginal log-likelihood.
struct EStepResult {
    std::vector<double> counts;
    double loglik = 0.0;
};

/// OpenMP E-step; accumulation order is fixed so the result does not depend on
/// the thread count.
EStepResult e_step(const NominalModel& model, const ResponseMatrix& matrix);

namespace serial {
/// Single-threaded reference E-step.
EStepResult e_step(const NominalModel& model, const ResponseMatrix& matrix);
} // namespace serial

} // namespace copydetect
