#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstdio>

#include "qbuffer/mode_state.hpp"
#include "oracles.hpp"

using namespace qbuffer;

namespace {

ModeState random_state(const TimeGrid& grid, std::uint64_t seed, int rank = 0) {
  return ModeState(oracle::random_density(grid, seed, rank), grid, Domain::time);
}

VectorXcd exponential_mode(const TimeGrid& grid, double gamma, double t0 = 0.0) {
  VectorXcd psi(grid.n_points);
  for (int i = 0; i < grid.n_points; ++i) {
    const double t = grid.point(i) - t0;
    psi[i] = t >= 0.0 ? std::exp(-0.5 * gamma * t) : 0.0;
  }
  return psi;
}

}  // namespace

TEST_CASE("make_grid basics") {
  const TimeGrid g = make_grid(3, 0.0, 1.0);
  CHECK(g.dt() == doctest::Approx(0.5));
  CHECK(g.point(0) == doctest::Approx(0.0));
  CHECK(g.point(1) == doctest::Approx(0.5));
  CHECK(g.point(2) == doctest::Approx(1.0));

  const TimeGrid g2 = make_grid(2, 0.0, 1.0);
  CHECK(g2.dt() == doctest::Approx(1.0));

  CHECK_THROWS_AS(make_grid(1, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(make_grid(16, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("quadrature weights are trapezoidal") {
  const TimeGrid g = make_grid(5, 0.0, 2.0);
  const VectorXd w = g.quadrature();
  CHECK(w[0] == doctest::Approx(0.25));
  CHECK(w[2] == doctest::Approx(0.5));
  CHECK(w[4] == doctest::Approx(0.25));
  CHECK(w.sum() == doctest::Approx(2.0));
}

TEST_CASE("eigendecompose diagonal state") {
  const TimeGrid g = make_grid(2, 0.0, 1.0);
  // quadrature weights are (1/2, 1/2); diagonal entries chosen so the
  // quadrature-weighted populations are 0.6 and 0.4
  MatrixXcd rho = MatrixXcd::Zero(2, 2);
  rho(0, 0) = 1.2;
  rho(1, 1) = 0.8;
  const ModeState state(rho, g, Domain::time);
  const ModeDecomposition dec = eigendecompose(state);
  CHECK(dec.weights[0] == doctest::Approx(0.6).epsilon(1e-10));
  CHECK(dec.weights[1] == doctest::Approx(0.4).epsilon(1e-10));
}

TEST_CASE("eigendecompose pure state") {
  const TimeGrid g = make_grid(64, 0.0, 10.0);
  const ModeState state = pure_state(exponential_mode(g, 1.0), g, Domain::time);
  const ModeDecomposition dec = eigendecompose(state);
  CHECK(dec.weights[0] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(dec.weights[1] == doctest::Approx(0.0).epsilon(1e-10));
  // mode recovered up to the fixed global phase
  const VectorXd w = g.quadrature();
  VectorXcd psi = exponential_mode(g, 1.0);
  double norm2 = 0.0;
  for (int i = 0; i < g.n_points; ++i) norm2 += w[i] * std::norm(psi[i]);
  psi /= std::sqrt(norm2);
  CHECK((dec.modes.col(0) - psi).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("eigendecompose matches dense oracle on dephasing kernel") {
  const double gamma = 1.0, gamma_star = 0.5;
  const TimeGrid g = make_grid(64, 0.0, 12.0);
  const VectorXd t = g.points();
  const VectorXd w = g.quadrature();
  const int n = g.n_points;

  MatrixXcd rho(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      rho(i, j) = oracle::kernel_value(gamma, gamma_star, 0.0, t[i], t[j]);
  double trace = 0.0;
  for (int i = 0; i < n; ++i) trace += w[i] * rho(i, i).real();
  rho /= trace;

  // independent oracle: dense solve of the quadrature-symmetrized kernel
  MatrixXcd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      a(i, j) = std::sqrt(w[i]) * rho(i, j) * std::sqrt(w[j]);
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(a);
  const double alpha0_oracle =
      es.eigenvalues().maxCoeff() / es.eigenvalues().sum();

  const ModeState state(rho, g, Domain::time);
  const ModeDecomposition dec = eigendecompose(state);
  CHECK(dec.weights[0] == doctest::Approx(alpha0_oracle).epsilon(1e-6));
}

TEST_CASE("eigendecompose reconstructs the state") {
  const TimeGrid g = make_grid(48, 0.0, 4.0);
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const ModeState state = random_state(g, seed);
    const ModeDecomposition dec = eigendecompose(state);
    MatrixXcd rebuilt = MatrixXcd::Zero(g.n_points, g.n_points);
    for (int k = 0; k < dec.weights.size(); ++k)
      rebuilt += dec.weights[k] * dec.modes.col(k) * dec.modes.col(k).adjoint();
    CHECK((rebuilt - state.rho()).cwiseAbs().maxCoeff() < 1e-8);

    // modes orthonormal under the quadrature
    const VectorXd w = g.quadrature();
    MatrixXcd gram = dec.modes.adjoint() * w.asDiagonal() * dec.modes;
    CHECK((gram - MatrixXcd::Identity(g.n_points, g.n_points)).cwiseAbs().maxCoeff() <
          1e-8);
    CHECK(dec.weights.sum() == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("self indistinguishability on known mixtures") {
  const TimeGrid g = make_grid(128, 0.0, 8.0);
  const ModeState pure = pure_state(exponential_mode(g, 2.0), g, Domain::time);
  CHECK(self_indistinguishability(pure) == doctest::Approx(1.0).epsilon(1e-8));

  // two orthogonal modes: disjoint supports
  VectorXcd a = VectorXcd::Zero(g.n_points), b = VectorXcd::Zero(g.n_points);
  for (int i = 0; i < g.n_points / 2; ++i) a[i] = 1.0;
  for (int i = g.n_points / 2; i < g.n_points; ++i) b[i] = 1.0;
  const ModeState sa = pure_state(a, g, Domain::time);
  const ModeState sb = pure_state(b, g, Domain::time);
  const ModeState half = mix_states({{0.5, sa}, {0.5, sb}});
  CHECK(self_indistinguishability(half) == doctest::Approx(0.5).epsilon(1e-8));
  const ModeState tilted = mix_states({{0.7, sa}, {0.3, sb}});
  CHECK(self_indistinguishability(tilted) == doctest::Approx(0.58).epsilon(1e-8));
}

TEST_CASE("inter indistinguishability basics and exponential oracle") {
  const TimeGrid g = make_grid(1024, 0.0, 2.4);
  const ModeState fast = pure_state(exponential_mode(g, 10.0), g, Domain::time);
  const ModeState slow = pure_state(exponential_mode(g, 5.0), g, Domain::time);

  CHECK(inter_indistinguishability(fast, fast) == doctest::Approx(1.0).epsilon(1e-8));

  // decay times 100 ps and 200 ps -> |overlap|^2 = 8/9
  const double expected = oracle::exponential_overlap(10.0, 5.0);
  CHECK(expected == doctest::Approx(8.0 / 9.0).epsilon(1e-12));
  CHECK(inter_indistinguishability(fast, slow) ==
        doctest::Approx(expected).epsilon(1e-4));

  // orthogonal supports
  VectorXcd a = VectorXcd::Zero(g.n_points), b = VectorXcd::Zero(g.n_points);
  a[3] = 1.0;
  b[9] = 1.0;
  CHECK(inter_indistinguishability(pure_state(a, g, Domain::time),
                                   pure_state(b, g, Domain::time)) ==
        doctest::Approx(0.0).epsilon(1e-12));

  const TimeGrid other = make_grid(1024, 0.0, 2.5);
  CHECK_THROWS_AS(inter_indistinguishability(
                      fast, pure_state(exponential_mode(other, 5.0), other,
                                       Domain::time)),
                  std::invalid_argument);
}

TEST_CASE("inter equals self on the diagonal and respects Cauchy-Schwarz") {
  const TimeGrid g = make_grid(40, 0.0, 4.0);
  for (std::uint64_t seed : {3u, 4u}) {
    const ModeState x = random_state(g, seed, 6);
    const ModeState y = random_state(g, seed + 100, 4);
    CHECK(std::abs(inter_indistinguishability(x, x) -
                   self_indistinguishability(x)) < 1e-10);
    CHECK(inter_indistinguishability(x, y) <=
          std::sqrt(self_indistinguishability(x) * self_indistinguishability(y)) +
              1e-8);
  }
}

TEST_CASE("domain transform preserves trace and purity, round trips") {
  const TimeGrid g = make_grid(96, 0.0, 6.0);
  const ModeState state = random_state(g, 42, 8);
  const double purity = self_indistinguishability(state);

  const ModeState spectral = to_frequency(state);
  CHECK(spectral.domain() == Domain::frequency);
  CHECK(self_indistinguishability(spectral) == doctest::Approx(purity).epsilon(1e-8));

  const ModeState back = to_time(spectral);
  CHECK((back.rho() - state.rho()).cwiseAbs().maxCoeff() < 1e-8);

  CHECK_THROWS_AS(to_frequency(spectral), std::invalid_argument);
  CHECK_THROWS_AS(to_time(state), std::invalid_argument);
}

TEST_CASE("gaussian mode obeys the Fourier width relation") {
  const double sigma_t = 0.3;
  const TimeGrid g = make_grid(1024, 0.0, 12.0);
  VectorXcd psi(g.n_points);
  for (int i = 0; i < g.n_points; ++i) {
    const double u = g.point(i) - 6.0;
    psi[i] = std::exp(-u * u / (4.0 * sigma_t * sigma_t));
  }
  const ModeState spectral = to_frequency(pure_state(psi, g, Domain::time));

  const VectorXd omega = spectral.axis();
  const VectorXd w = spectral.quadrature();
  double mean = 0.0, second = 0.0;
  for (int i = 0; i < g.n_points; ++i) {
    const double p = w[i] * spectral.rho()(i, i).real();
    mean += p * omega[i];
    second += p * omega[i] * omega[i];
  }
  const double sigma_w = std::sqrt(second - mean * mean);
  CHECK(sigma_w == doctest::Approx(1.0 / (2.0 * sigma_t)).epsilon(0.01));
}

TEST_CASE("project_physical is idempotent and repairs perturbations") {
  const TimeGrid g = make_grid(32, 0.0, 3.0);
  const ModeState state = random_state(g, 7, 5);

  const ModeState same = project_physical(state.rho(), g, Domain::time);
  CHECK((same.rho() - state.rho()).cwiseAbs().maxCoeff() < 1e-14);

  MatrixXcd noisy = state.rho();
  for (int i = 0; i < g.n_points; ++i)
    for (int j = 0; j < g.n_points; ++j)
      noisy(i, j) += Complex(0.0, 1e-12) * ((i + j) % 2 ? 1.0 : -1.0) *
                     ((i == j) ? 0.0 : 1.0);
  const ModeState fixed = project_physical(noisy, g, Domain::time);
  CHECK((fixed.rho() - state.rho()).cwiseAbs().maxCoeff() < 1e-11);

  CHECK_THROWS_AS(project_physical(MatrixXcd::Zero(g.n_points, g.n_points), g,
                                   Domain::time),
                  std::runtime_error);
}

TEST_CASE("state validation rejects malformed matrices") {
  const TimeGrid g = make_grid(8, 0.0, 1.0);
  MatrixXcd rho = oracle::random_density(g, 5);

  MatrixXcd skew = rho;
  skew(0, 1) += Complex(0.0, 1e-3);
  CHECK_THROWS_AS(ModeState(skew, g, Domain::time), std::invalid_argument);

  CHECK_THROWS_AS(ModeState(2.0 * rho, g, Domain::time), std::invalid_argument);

  MatrixXcd indefinite = rho;
  indefinite(3, 3) -= 0.8 * indefinite.cwiseAbs().maxCoeff();
  CHECK_THROWS_AS(ModeState(indefinite, g, Domain::time), std::invalid_argument);
}

TEST_CASE("purity stays within [1/n, 1] for random states") {
  const TimeGrid g = make_grid(24, 0.0, 2.0);
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const ModeState state = random_state(g, 1000 + seed);
    const double p = self_indistinguishability(state);
    CHECK(p >= 1.0 / g.n_points - 1e-8);
    CHECK(p <= 1.0 + 1e-8);
  }
}

TEST_CASE("state container round trips bit-exactly") {
  const TimeGrid g = make_grid(20, -1.0, 3.0);
  const ModeState state = random_state(g, 77, 3);
  const std::string path = "state_roundtrip.qbms";
  save_state(state, path);
  const ModeState loaded = load_state(path);
  CHECK(loaded.domain() == state.domain());
  CHECK(loaded.grid() == state.grid());
  CHECK((loaded.rho() - state.rho()).cwiseAbs().maxCoeff() == 0.0);
  std::remove(path.c_str());
}
