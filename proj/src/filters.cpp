#include "qbuffer/filters.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace qbuffer {

void PassbandSpec::validate() const {
  if (!(width > 0.0)) throw std::invalid_argument("PassbandSpec.width must be > 0");
  if (!std::isfinite(center))
    throw std::invalid_argument("PassbandSpec.center must be finite");
}

Complex PassbandSpec::transfer(double omega) const {
  const double u = omega - center;
  switch (shape) {
    case PassbandShape::lorentzian:
      // single-pole cavity response, |f|^2 FWHM = width
      return 1.0 / Complex(1.0, 2.0 * u / width);
    case PassbandShape::gaussian:
      return Complex(std::exp(-2.0 * std::log(2.0) * u * u / (width * width)), 0.0);
    case PassbandShape::rectangular:
      return std::abs(u) <= 0.5 * width ? Complex(1.0, 0.0) : Complex(0.0, 0.0);
  }
  return Complex(0.0, 0.0);
}

namespace {

std::pair<ModeState, double> apply_diagonal(const ModeState& state,
                                            const VectorXcd& f) {
  const int n = state.size();
  const VectorXd w = state.quadrature();
  double b = 0.0;
  for (int i = 0; i < n; ++i)
    b += w[i] * std::norm(f[i]) * state.rho()(i, i).real();
  if (b <= 1e-12)
    throw std::runtime_error("apply_passband: zero-trace (filter removes the state)");

  MatrixXcd out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      out(i, j) = f[i] * state.rho()(i, j) * std::conj(f[j]) / b;
  return {ModeState(std::move(out), state.grid(), state.domain()), b};
}

}  // namespace

std::pair<ModeState, double> apply_passband(const ModeState& state,
                                            const PassbandSpec& band) {
  band.validate();
  if (state.domain() != Domain::frequency)
    throw std::invalid_argument("apply_passband: wrong-domain (state must be spectral)");
  const VectorXd omega = state.axis();
  VectorXcd f(omega.size());
  for (int i = 0; i < omega.size(); ++i) f[i] = band.transfer(omega[i]);
  return apply_diagonal(state, f);
}

std::pair<ModeState, double> apply_time_gate(const ModeState& state,
                                             double t_open, double t_close) {
  if (state.domain() != Domain::time)
    throw std::invalid_argument("apply_time_gate: wrong-domain (state must be temporal)");
  if (!(t_close > t_open))
    throw std::invalid_argument("apply_time_gate: empty gate");
  const VectorXd t = state.axis();
  VectorXcd f(t.size());
  for (int i = 0; i < t.size(); ++i)
    f[i] = (t[i] >= t_open && t[i] <= t_close) ? Complex(1.0, 0.0) : Complex(0.0, 0.0);
  return apply_diagonal(state, f);
}

PassbandFamily default_family(PassbandShape shape, double center_lo,
                              double center_hi, int n_centers, double width_lo,
                              double width_hi, int n_widths) {
  if (n_centers < 1 || n_widths < 1)
    throw std::invalid_argument("default_family: need at least one center and width");
  if (!(width_lo > 0.0) || !(width_hi >= width_lo))
    throw std::invalid_argument("default_family: ill-ordered width range");
  PassbandFamily fam;
  fam.shape = shape;
  fam.centers.resize(n_centers);
  for (int i = 0; i < n_centers; ++i)
    fam.centers[i] = n_centers == 1
                         ? 0.5 * (center_lo + center_hi)
                         : center_lo + (center_hi - center_lo) * i / (n_centers - 1);
  fam.widths.resize(n_widths);
  const double ratio = width_hi / width_lo;
  for (int k = 0; k < n_widths; ++k)
    fam.widths[k] = n_widths == 1
                        ? width_lo
                        : width_lo * std::pow(ratio, static_cast<double>(k) /
                                                         (n_widths - 1));
  return fam;
}

namespace {

struct SweepCache {
  VectorXd q;         // w_i rho_ii
  Eigen::MatrixXd p;  // w_i w_j |rho_ij|^2
  VectorXd omega;
};

SweepCache build_cache(const ModeState& state) {
  const int n = state.size();
  SweepCache cache;
  cache.omega = state.axis();
  cache.q.resize(n);
  cache.p.resize(n, n);
  const VectorXd w = state.quadrature();
  for (int i = 0; i < n; ++i) {
    cache.q[i] = w[i] * state.rho()(i, i).real();
    for (int j = 0; j < n; ++j)
      cache.p(i, j) = w[i] * w[j] * std::norm(state.rho()(i, j));
  }
  return cache;
}

SweepPoint evaluate_band(const SweepCache& cache, const PassbandSpec& band) {
  const int n = static_cast<int>(cache.q.size());
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = std::norm(band.transfer(cache.omega[i]));
  const double b = v.dot(cache.q);
  SweepPoint pt;
  pt.center = band.center;
  pt.width = band.width;
  if (b <= 1e-12) {
    pt.b_mult = 0.0;
    pt.purity = 0.0;
    return pt;
  }
  pt.b_mult = b;
  pt.purity = v.dot(cache.p * v) / (b * b);
  return pt;
}

std::vector<SweepPoint> sweep_impl(const ModeState& state,
                                   const PassbandFamily& family, bool parallel) {
  if (state.domain() != Domain::frequency)
    throw std::invalid_argument("sweep_passbands: wrong-domain (state must be spectral)");
  if (family.centers.empty() || family.widths.empty())
    throw std::invalid_argument("sweep_passbands: empty family");
  for (double w : family.widths)
    if (!(w > 0.0)) throw std::invalid_argument("PassbandSpec.width must be > 0");

  const SweepCache cache = build_cache(state);
  const int nc = static_cast<int>(family.centers.size());
  const int nw = static_cast<int>(family.widths.size());
  std::vector<SweepPoint> points(static_cast<std::size_t>(nc) * nw + 1);

#pragma omp parallel for schedule(static) if (parallel)
  for (int idx = 0; idx < nc * nw; ++idx) {
    const int ic = idx / nw;
    const int iw = idx % nw;
    PassbandSpec band{family.shape, family.centers[ic], family.widths[iw]};
    SweepPoint pt = evaluate_band(cache, band);
    pt.center_index = ic;
    pt.width_index = iw;
    points[idx] = pt;
  }

  // Exact all-pass reference: the no-filter option belongs to the family as
  // the infinite-width limit.
  SweepPoint all_pass;
  all_pass.center_index = -1;
  all_pass.width_index = -1;
  all_pass.center = 0.0;
  all_pass.width = std::numeric_limits<double>::infinity();
  all_pass.b_mult = cache.q.sum();
  all_pass.purity = VectorXd::Ones(cache.q.size()).dot(
                        cache.p * VectorXd::Ones(cache.q.size())) /
                    (all_pass.b_mult * all_pass.b_mult);
  points.back() = all_pass;
  return points;
}

}  // namespace

std::vector<SweepPoint> sweep_passbands(const ModeState& state,
                                        const PassbandFamily& family) {
  return sweep_impl(state, family, true);
}

std::vector<SweepPoint> sweep_passbands_serial(const ModeState& state,
                                               const PassbandFamily& family) {
  return sweep_impl(state, family, false);
}

std::vector<SweepPoint> pareto_frontier(std::vector<SweepPoint>& points) {
  std::vector<int> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (points[a].b_mult != points[b].b_mult)
      return points[a].b_mult > points[b].b_mult;
    return points[a].purity > points[b].purity;
  });

  std::vector<SweepPoint> frontier;
  double best_purity = -1.0;
  for (int idx : order) {
    if (points[idx].b_mult <= 0.0) continue;
    if (points[idx].purity > best_purity) {
      best_purity = points[idx].purity;
      points[idx].pareto = true;
      frontier.push_back(points[idx]);
    }
  }
  return frontier;
}

FilterEnvelope filter_envelope(const std::vector<ModeState>& states,
                               const PassbandFamily& family) {
  if (states.empty())
    throw std::invalid_argument("filter_envelope: need at least one state");
  FilterEnvelope result;
  result.per_state.reserve(states.size());
  std::vector<SweepPoint> pool;
  for (std::size_t s = 0; s < states.size(); ++s) {
    StateFrontier sf;
    sf.state_id = static_cast<int>(s);
    sf.input_purity = self_indistinguishability(states[s]);
    sf.sweep = sweep_passbands(states[s], family);
    sf.frontier = pareto_frontier(sf.sweep);
    pool.insert(pool.end(), sf.frontier.begin(), sf.frontier.end());
    result.per_state.push_back(std::move(sf));
  }
  for (auto& pt : pool) pt.pareto = false;
  result.envelope = pareto_frontier(pool);
  return result;
}

}  // namespace qbuffer
