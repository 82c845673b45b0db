#pragma once

#include <cstddef>
#include <vector>

namespace copydetect {

/// Fixed quadrature for expectations under the standard normal: nodes and
/// weights with sum(weights) == 1.
struct Quadrature {
    std::vector<double> nodes;
    std::vector<double> weights;

    std::size_t size() const { return nodes.size(); }
    bool operator==(const Quadrature&) const = default;
};

/// Gauss-Hermite rule for the weight exp(-x^2/2)/sqrt(2 pi) (Golub-Welsch on
/// the probabilists' Hermite recurrence). Exact for polynomials up to degree
/// 2n-1.
Quadrature gauss_hermite_normal(std::size_t n);

} // namespace copydetect
