#include "copydetect/pbd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace copydetect::pbd {

namespace {

void check_x(std::size_t x, std::size_t limit, const char* what) {
    if (x > limit)
        throw std::out_of_range(std::string(what) + ": x=" + std::to_string(x) + " outside [0, " +
                                std::to_string(limit) + "]");
}

std::vector<double> spiked_pis(const MatchProfile& profile, const CopySet& copied) {
    std::vector<double> pis(profile.pis().begin(), profile.pis().end());
    for (std::size_t i : copied.indices()) {
        if (i >= pis.size())
            throw std::out_of_range("copy set index " + std::to_string(i) + " outside profile");
        pis[i] = 1.0;
    }
    return pis;
}

} // namespace

MatchProfile::MatchProfile(std::vector<double> pis) : pis_(std::move(pis)) {
    if (pis_.empty())
        throw std::invalid_argument("match profile needs at least one question");
    for (double& p : pis_) {
        if (!(p >= 0.0 && p <= 1.0))
            throw std::invalid_argument("match probability outside [0,1]");
        p = std::clamp(p, kMinProbability, kMaxProbability);
    }
}

double MatchProfile::mean() const {
    double s = 0.0;
    for (double p : pis_)
        s += p;
    return s;
}

double MatchProfile::variance() const {
    double s = 0.0;
    for (double p : pis_)
        s += p * (1.0 - p);
    return s;
}

CopySet::CopySet(std::vector<std::size_t> indices, std::size_t num_questions)
    : indices_(std::move(indices)) {
    std::sort(indices_.begin(), indices_.end());
    if (std::adjacent_find(indices_.begin(), indices_.end()) != indices_.end())
        throw std::invalid_argument("copy set has duplicate questions");
    if (!indices_.empty() && indices_.back() >= num_questions)
        throw std::out_of_range("copy set index outside [0, N)");
}

bool CopySet::contains(std::size_t i) const {
    return std::binary_search(indices_.begin(), indices_.end(), i);
}

std::vector<double> pmf_vector(std::span<const double> pis) {
    std::vector<double> f(pis.size() + 1, 0.0);
    f[0] = 1.0;
    std::size_t processed = 0;
    for (double p : pis) {
        const double q = 1.0 - p;
        ++processed;
        f[processed] = f[processed - 1] * p;
        for (std::size_t x = processed - 1; x > 0; --x)
            f[x] = f[x] * q + f[x - 1] * p;
        f[0] *= q;
    }
    return f;
}

std::vector<double> upper_tails(std::span<const double> pis) {
    const auto f = pmf_vector(pis);
    const std::size_t n = pis.size();
    std::vector<double> tails(n + 2, 0.0);
    // Summing from the top keeps the small far-tail terms exact.
    for (std::size_t x = n + 1; x-- > 0;)
        tails[x] = std::min(1.0, tails[x + 1] + f[x]);
    tails[0] = 1.0;
    return tails;
}

double pmf(const MatchProfile& profile, std::size_t x) {
    check_x(x, profile.size(), "pmf");
    return pmf_vector(profile.pis())[x];
}

double upper_tail(const MatchProfile& profile, std::size_t x) {
    check_x(x, profile.size() + 1, "upper_tail");
    return upper_tails(profile.pis())[x];
}

std::size_t critical_value(const MatchProfile& profile, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("alpha must lie in (0,1)");
    const auto tails = upper_tails(profile.pis());
    const std::size_t n = profile.size();
    for (std::size_t k = 0; k <= n; ++k) {
        if (tails[k + 1] <= alpha)
            return k;
    }
    return n;
}

double spiked_pmf(const MatchProfile& profile, const CopySet& copied, std::size_t x) {
    check_x(x, profile.size(), "spiked_pmf");
    if (x < copied.size())
        return 0.0;
    return pmf_vector(spiked_pis(profile, copied))[x];
}

double likelihood_ratio(const MatchProfile& profile, const CopySet& copied, std::size_t x) {
    check_x(x, profile.size(), "likelihood_ratio");
    const double null = pmf_vector(profile.pis())[x];
    if (!(null > 0.0))
        throw std::domain_error("null pmf vanishes at x=" + std::to_string(x));
    return spiked_pmf(profile, copied, x) / null;
}

std::vector<double> likelihood_ratios(const MatchProfile& profile, const CopySet& copied) {
    const auto null = pmf_vector(profile.pis());
    const auto alt = pmf_vector(spiked_pis(profile, copied));
    std::vector<double> ratio(null.size());
    for (std::size_t x = 0; x < null.size(); ++x) {
        const double num = x < copied.size() ? 0.0 : alt[x];
        ratio[x] = null[x] > 0.0 ? num / null[x] : std::numeric_limits<double>::quiet_NaN();
    }
    return ratio;
}

} // namespace copydetect::pbd
