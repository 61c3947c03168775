#include <doctest.h>

#include <cmath>

#include "qbuffer/emitters.hpp"
#include "qbuffer/filters.hpp"
#include "oracles.hpp"

using namespace qbuffer;

namespace {

// mixed two-colour emitter in the frequency domain
ModeState spectral_emitter(const TimeGrid& g, double gamma_star = 0.5,
                           double sigma = 1.0, double jitter = 0.3) {
  EmitterSpec spec;
  spec.gamma = 1.0;
  spec.gamma_star = gamma_star;
  spec.sigma_diff = sigma;
  spec.jitter_kind = JitterKind::exponential;
  spec.jitter_scale = jitter;
  return to_frequency(apply_inhomogeneous(spec, g, 7));
}

}  // namespace

TEST_CASE("all-pass band leaves the state unchanged") {
  const TimeGrid g = make_grid(192, 0.0, 14.0);
  const ModeState state = spectral_emitter(g);
  PassbandSpec band;
  band.shape = PassbandShape::rectangular;
  band.center = 0.0;
  band.width = 1e6;  // covers the whole grid
  auto [filtered, b] = apply_passband(state, band);
  CHECK(b == doctest::Approx(1.0).epsilon(1e-8));
  CHECK((filtered.rho() - state.rho()).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("rectangular band isolates a spectrally disjoint mode") {
  const TimeGrid g = make_grid(256, 0.0, 16.0);
  // two gaussian modes far apart in frequency
  VectorXcd a(g.n_points), b(g.n_points);
  for (int i = 0; i < g.n_points; ++i) {
    const double u = g.point(i) - 8.0;
    a[i] = std::exp(-u * u) * std::exp(Complex(0.0, 12.0 * g.point(i)));
    b[i] = std::exp(-u * u) * std::exp(Complex(0.0, -12.0 * g.point(i)));
  }
  const ModeState mixed = to_frequency(
      mix_states({{0.6, pure_state(a, g, Domain::time)},
                  {0.4, pure_state(b, g, Domain::time)}}));

  PassbandSpec band;
  band.shape = PassbandShape::rectangular;
  band.center = 12.0;
  band.width = 10.0;
  auto [filtered, bmult] = apply_passband(mixed, band);
  CHECK(bmult == doctest::Approx(0.6).epsilon(1e-6));
  CHECK(self_indistinguishability(filtered) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("lorentzian filter matches the dense matrix oracle") {
  const TimeGrid g = make_grid(256, 0.0, 14.0);
  EmitterSpec spec;
  spec.gamma = 1.0;
  spec.gamma_star = 0.5;
  const ModeState state = to_frequency(dephasing_kernel(spec, g));

  PassbandSpec band;
  band.shape = PassbandShape::lorentzian;
  band.center = 0.0;
  band.width = 1.0;  // FWHM equal to the radiative linewidth
  auto [filtered, bmult] = apply_passband(state, band);

  // oracle: direct dense computation of F rho F^dag with its own transfer
  const VectorXd omega = state.axis();
  const VectorXd w = state.quadrature();
  const int n = g.n_points;
  MatrixXcd fr(n, n);
  VectorXcd f(n);
  for (int i = 0; i < n; ++i)
    f[i] = 1.0 / Complex(1.0, 2.0 * (omega[i] - band.center) / band.width);
  double tr = 0.0;
  for (int i = 0; i < n; ++i) tr += w[i] * std::norm(f[i]) * state.rho()(i, i).real();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      fr(i, j) = f[i] * state.rho()(i, j) * std::conj(f[j]) / tr;
  double purity = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) purity += w[i] * w[j] * std::norm(fr(i, j));

  CHECK(bmult == doctest::Approx(tr).epsilon(1e-6));
  CHECK(self_indistinguishability(filtered) == doctest::Approx(purity).epsilon(1e-6));
}

TEST_CASE("band composition equals the pointwise product") {
  const TimeGrid g = make_grid(160, 0.0, 14.0);
  const ModeState state = spectral_emitter(g);
  PassbandSpec f1{PassbandShape::lorentzian, 0.4, 2.0};
  PassbandSpec f2{PassbandShape::gaussian, -0.3, 3.0};

  auto [s1, b1] = apply_passband(state, f1);
  auto [s12, b2] = apply_passband(s1, f2);

  // product filter applied in one pass
  const VectorXd omega = state.axis();
  VectorXcd f(g.n_points);
  MatrixXcd prod(g.n_points, g.n_points);
  for (int i = 0; i < g.n_points; ++i)
    f[i] = f1.transfer(omega[i]) * f2.transfer(omega[i]);
  const VectorXd w = state.quadrature();
  double tr = 0.0;
  for (int i = 0; i < g.n_points; ++i)
    tr += w[i] * std::norm(f[i]) * state.rho()(i, i).real();
  for (int i = 0; i < g.n_points; ++i)
    for (int j = 0; j < g.n_points; ++j)
      prod(i, j) = f[i] * state.rho()(i, j) * std::conj(f[j]) / tr;

  CHECK(b1 * b2 == doctest::Approx(tr).epsilon(1e-8));
  CHECK((s12.rho() - prod).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("time gate works in the temporal domain only") {
  const TimeGrid g = make_grid(128, 0.0, 12.0);
  EmitterSpec spec;
  spec.gamma = 1.0;
  const ModeState state = dephasing_kernel(spec, g);
  auto [gated, b] = apply_time_gate(state, 0.0, 2.0);
  CHECK(b == doctest::Approx(1.0 - std::exp(-2.0)).epsilon(1e-2));
  CHECK_THROWS_AS(apply_time_gate(to_frequency(state), 0.0, 2.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(apply_passband(state, PassbandSpec{}), std::invalid_argument);
}

TEST_CASE("sweep points agree with apply_passband and flag the frontier") {
  const TimeGrid g = make_grid(160, 0.0, 14.0);
  const ModeState state = spectral_emitter(g);
  const PassbandFamily fam =
      default_family(PassbandShape::lorentzian, -4.0, 4.0, 9, 0.2, 20.0, 9);
  std::vector<SweepPoint> points = sweep_passbands(state, fam);
  REQUIRE(points.size() == 9 * 9 + 1);

  // spot-check three points against the full operation
  for (std::size_t idx : {3u, 40u, 77u}) {
    const SweepPoint& pt = points[idx];
    PassbandSpec band{fam.shape, pt.center, pt.width};
    auto [filtered, b] = apply_passband(state, band);
    CHECK(pt.b_mult == doctest::Approx(b).epsilon(1e-10));
    CHECK(pt.purity ==
          doctest::Approx(self_indistinguishability(filtered)).epsilon(1e-8));
  }

  // all-pass sentinel present and exact
  const SweepPoint& ap = points.back();
  CHECK(std::isinf(ap.width));
  CHECK(ap.b_mult == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(ap.purity ==
        doctest::Approx(self_indistinguishability(state)).epsilon(1e-10));

  const std::vector<SweepPoint> serial = sweep_passbands_serial(state, fam);
  for (std::size_t i = 0; i < points.size(); ++i) {
    CHECK(points[i].b_mult == serial[i].b_mult);
    CHECK(points[i].purity == serial[i].purity);
  }
}

TEST_CASE("pareto frontier is dominant and matches a brute-force oracle") {
  const TimeGrid g = make_grid(160, 0.0, 14.0);
  const ModeState state = spectral_emitter(g);
  const PassbandFamily fam =
      default_family(PassbandShape::lorentzian, -5.0, 5.0, 17, 0.15, 30.0, 17);
  std::vector<SweepPoint> points = sweep_passbands(state, fam);
  const std::vector<SweepPoint> frontier = pareto_frontier(points);
  REQUIRE(!frontier.empty());

  // oracle: quadratic dominance scan over the raw sweep
  for (const auto& cand : points) {
    bool dominated = false;
    for (const auto& other : points) {
      if (other.b_mult >= cand.b_mult && other.purity >= cand.purity &&
          (other.b_mult > cand.b_mult || other.purity > cand.purity)) {
        dominated = true;
        break;
      }
    }
    if (cand.pareto) CHECK(!dominated);
  }
  // every undominated distinct value pair appears on the frontier
  for (const auto& cand : points) {
    bool dominated = false;
    for (const auto& other : points)
      if (other.b_mult >= cand.b_mult && other.purity >= cand.purity &&
          (other.b_mult > cand.b_mult || other.purity > cand.purity))
        dominated = true;
    if (!dominated && cand.b_mult > 0.0) {
      bool represented = false;
      for (const auto& f : frontier)
        if (f.b_mult == cand.b_mult && f.purity == cand.purity) represented = true;
      CHECK(represented);
    }
  }

  // brightness decreasing, purity increasing along the frontier
  for (std::size_t i = 1; i < frontier.size(); ++i) {
    CHECK(frontier[i].b_mult <= frontier[i - 1].b_mult);
    CHECK(frontier[i].purity >= frontier[i - 1].purity);
  }

  // frontier never dips below the input purity (the all-pass point anchors it)
  const double input_purity = self_indistinguishability(state);
  for (const auto& f : frontier) CHECK(f.purity >= input_purity - 1e-9);
}

TEST_CASE("pure input state needs no filtering") {
  const TimeGrid g = make_grid(128, 0.0, 12.0);
  EmitterSpec spec;
  spec.gamma = 1.0;
  const ModeState pure = to_frequency(dephasing_kernel(spec, g));
  const PassbandFamily fam =
      default_family(PassbandShape::lorentzian, -2.0, 2.0, 9, 0.3, 10.0, 9);
  std::vector<SweepPoint> points = sweep_passbands(pure, fam);
  const std::vector<SweepPoint> frontier = pareto_frontier(points);
  REQUIRE(!frontier.empty());
  CHECK(frontier.front().b_mult == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(frontier.front().purity == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("narrowing the band purifies while losing brightness") {
  const TimeGrid g = make_grid(192, 0.0, 14.0);
  const ModeState state = spectral_emitter(g, 0.8, 1.5, 0.4);
  CHECK(self_indistinguishability(state) < 0.8);

  PassbandFamily fam;
  fam.shape = PassbandShape::lorentzian;
  for (int c = 0; c < 33; ++c) fam.centers.push_back(-4.0 + 8.0 * c / 32.0);
  fam.widths = {0.05, 0.1, 0.2, 0.4};
  std::vector<SweepPoint> points = sweep_passbands(state, fam);

  auto best_at_width = [&](int iw) {
    SweepPoint best;
    best.purity = -1.0;
    for (const auto& pt : points)
      if (pt.width_index == iw && pt.purity > best.purity) best = pt;
    return best;
  };
  const SweepPoint narrow = best_at_width(0);
  const SweepPoint doubled = best_at_width(1);
  CHECK(narrow.purity >= doubled.purity);
  CHECK(narrow.b_mult < doubled.b_mult);
}

TEST_CASE("filter envelope combines per-state frontiers") {
  const TimeGrid g = make_grid(128, 0.0, 14.0);
  const std::vector<ModeState> states = {spectral_emitter(g, 0.3, 0.8, 0.2),
                                         spectral_emitter(g, 1.0, 2.0, 0.5)};
  const PassbandFamily fam =
      default_family(PassbandShape::lorentzian, -4.0, 4.0, 9, 0.2, 20.0, 9);
  const FilterEnvelope env = filter_envelope(states, fam);
  REQUIRE(env.per_state.size() == 2);
  CHECK(!env.envelope.empty());
  // envelope dominates every per-state frontier point
  for (const auto& sf : env.per_state)
    for (const auto& pt : sf.frontier) {
      bool covered = false;
      for (const auto& e : env.envelope)
        if (e.b_mult >= pt.b_mult - 1e-12 && e.purity >= pt.purity - 1e-12)
          covered = true;
      CHECK(covered);
    }
}
