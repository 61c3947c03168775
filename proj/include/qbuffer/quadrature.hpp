#ifndef QBUFFER_QUADRATURE_HPP
#define QBUFFER_QUADRATURE_HPP

#include <Eigen/Dense>
#include <utility>

namespace qbuffer {

// Golub-Welsch nodes/weights. Weights are normalized to sum to one, so a
// rule integrates directly against the probability density.

// Gauss-Hermite rule for the standard normal N(0, 1).
std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_hermite_normal(int n);

// Gauss-Laguerre rule for the unit-mean exponential distribution.
std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_laguerre_exponential(int n);

}  // namespace qbuffer

#endif
