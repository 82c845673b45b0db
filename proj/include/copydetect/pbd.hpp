#pragma once

#include <cstddef>
#include <span>
#include <vector>

// Exact Poisson-binomial distribution of the number of identical answers
// under the no-copying null, and the likelihood-ratio machinery that makes
// "reject for many matches" the uniformly most powerful rule.

namespace copydetect::pbd {

inline constexpr double kMinProbability = 1e-9;
inline constexpr double kMaxProbability = 1.0 - 1e-9;

/// Per-question match probabilities, clamped to [1e-9, 1-1e-9] on
/// construction.
class MatchProfile {
  public:
    MatchProfile() = default;
    explicit MatchProfile(std::vector<double> pis);

    std::size_t size() const { return pis_.size(); }
    std::span<const double> pis() const { return pis_; }
    double operator[](std::size_t i) const { return pis_[i]; }

    double mean() const;
    double variance() const;

  private:
    std::vector<double> pis_;
};

/// Zero-based question indices assumed copied. Sorted, unique.
class CopySet {
  public:
    CopySet() = default;
    CopySet(std::vector<std::size_t> indices, std::size_t num_questions);

    std::span<const std::size_t> indices() const { return indices_; }
    std::size_t size() const { return indices_.size(); }
    bool contains(std::size_t i) const;

  private:
    std::vector<std::size_t> indices_;
};

/// Full pmf f(0..N) by the one-question-at-a-time convolution.
/// Takes raw probabilities (no clamping) so callers can put 1 on copied items.
std::vector<double> pmf_vector(std::span<const double> pis);

/// Inclusive upper tails P(M >= x) for x = 0..N+1, computed as suffix sums of
/// one pmf so the sequence is non-increasing. tails[0] == 1, tails[N+1] == 0.
std::vector<double> upper_tails(std::span<const double> pis);

double pmf(const MatchProfile& profile, std::size_t x);
double upper_tail(const MatchProfile& profile, std::size_t x);

/// Smallest k with P(M > k) <= alpha. Rejecting M > k* has size <= alpha.
std::size_t critical_value(const MatchProfile& profile, double alpha);

/// pmf of the profile with every copied question's probability set to 1.
double spiked_pmf(const MatchProfile& profile, const CopySet& copied, std::size_t x);

/// spiked_pmf / pmf. Throws std::domain_error if the null pmf is zero at x.
double likelihood_ratio(const MatchProfile& profile, const CopySet& copied, std::size_t x);

/// The whole ratio curve over x = 0..N; entries where the null pmf vanishes
/// are NaN.
std::vector<double> likelihood_ratios(const MatchProfile& profile, const CopySet& copied);

} // namespace copydetect::pbd
