#ifndef QBUFFER_TESTS_ORACLES_HPP
#define QBUFFER_TESTS_ORACLES_HPP

// Independent reference computations used to pin expected values. These
// deliberately re-derive everything from the closed-form kernel with plain
// loops, sharing no code with the library paths they check.

#include <cmath>
#include <complex>

#include <Eigen/Dense>

#include "qbuffer/grid.hpp"
#include "qbuffer/rng.hpp"

namespace oracle {

using Complex = std::complex<double>;

// Markovian two-level emitter coherence, normalized by its continuum trace.
inline Complex kernel_value(double gamma, double gamma_star, double omega0,
                            double t1, double t2) {
  if (t1 < 0.0 || t2 < 0.0) return Complex(0.0, 0.0);
  const double mag = gamma * std::exp(-0.5 * gamma * (t1 + t2) -
                                      gamma_star * std::abs(t1 - t2));
  return mag * std::exp(Complex(0.0, omega0 * (t1 - t2)));
}

// Closed-form purity of the infinite-support kernel.
inline double dephasing_purity(double gamma, double gamma_star) {
  return gamma / (gamma + 2.0 * gamma_star);
}

// Closed-form |<psi_a|psi_b>|^2 for exponential modes released at t = 0.
inline double exponential_overlap(double gamma_a, double gamma_b) {
  const double amp = 2.0 * std::sqrt(gamma_a * gamma_b) / (gamma_a + gamma_b);
  return amp * amp;
}

// Brute-force trapezoidal evaluation of Tr[rho^2] for the analytic kernel.
inline double dephasing_purity_quadrature(double gamma, double gamma_star,
                                          double t_end, int n) {
  const double h = t_end / (n - 1);
  auto w = [&](int i) { return (i == 0 || i == n - 1) ? 0.5 * h : h; };
  double trace = 0.0;
  for (int i = 0; i < n; ++i)
    trace += w(i) * kernel_value(gamma, gamma_star, 0.0, i * h, i * h).real();
  double frob = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      frob += w(i) * w(j) *
              std::norm(kernel_value(gamma, gamma_star, 0.0, i * h, j * h));
  return frob / (trace * trace);
}

// Random valid density matrix (quadrature trace one) from a seeded draw.
inline Eigen::MatrixXcd random_density(const qbuffer::TimeGrid& grid,
                                       std::uint64_t seed, int rank = 0) {
  const int n = grid.n_points;
  if (rank <= 0) rank = n;
  const qbuffer::CounterRng rng{seed, 7};
  Eigen::MatrixXcd m(n, rank);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < rank; ++j)
      m(i, j) = Complex(rng.uniform(2 * (i * rank + j)) - 0.5,
                        rng.uniform(2 * (i * rank + j) + 1) - 0.5);
  Eigen::MatrixXcd rho = m * m.adjoint();
  const Eigen::VectorXd w = grid.quadrature();
  double trace = 0.0;
  for (int i = 0; i < n; ++i) trace += w[i] * rho(i, i).real();
  rho /= trace;
  return rho;
}

}  // namespace oracle

#endif
