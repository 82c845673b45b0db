#include "copydetect/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace copydetect {

Quadrature gauss_hermite_normal(std::size_t n) {
    if (n == 0)
        throw std::invalid_argument("quadrature needs at least one node");
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t k = 1; k < n; ++k) {
        const double b = std::sqrt(static_cast<double>(k));
        jacobi(k - 1, k) = b;
        jacobi(k, k - 1) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("Gauss-Hermite eigen decomposition failed");

    Quadrature q;
    q.nodes.resize(n);
    q.weights.resize(n);
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const auto idx = static_cast<Eigen::Index>(k);
        q.nodes[k] = solver.eigenvalues()(idx);
        const double v0 = solver.eigenvectors()(0, idx);
        q.weights[k] = v0 * v0;
        total += q.weights[k];
    }
    // Symmetrize: the rule is exactly symmetric, the eigen solver only nearly so.
    for (std::size_t k = 0; k < n / 2; ++k) {
        const double x = 0.5 * (q.nodes[n - 1 - k] - q.nodes[k]);
        const double w = 0.5 * (q.weights[k] + q.weights[n - 1 - k]);
        q.nodes[k] = -x;
        q.nodes[n - 1 - k] = x;
        q.weights[k] = q.weights[n - 1 - k] = w;
    }
    if (n % 2 == 1)
        q.nodes[n / 2] = 0.0;
    total = 0.0;
    for (double w : q.weights)
        total += w;
    for (double& w : q.weights)
        w /= total;
    return q;
}

} // namespace copydetect
