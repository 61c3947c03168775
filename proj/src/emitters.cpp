#include "qbuffer/emitters.hpp"

#include <cmath>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>

#include "qbuffer/quadrature.hpp"
#include "qbuffer/rng.hpp"

namespace qbuffer {

std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_hermite_normal(int n) {
  if (n < 1) throw std::invalid_argument("gauss_hermite_normal: n >= 1");
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double b = std::sqrt(k / 2.0);
    jacobi(k, k - 1) = b;
    jacobi(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  Eigen::VectorXd nodes = es.eigenvalues();
  Eigen::VectorXd weights(n);
  for (int k = 0; k < n; ++k)
    weights[k] = es.eigenvectors()(0, k) * es.eigenvectors()(0, k);
  weights /= weights.sum();
  nodes *= std::sqrt(2.0);  // e^{-x^2} rule -> standard normal
  return {nodes, weights};
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_laguerre_exponential(int n) {
  if (n < 1) throw std::invalid_argument("gauss_laguerre_exponential: n >= 1");
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k) jacobi(k, k) = 2.0 * k + 1.0;
  for (int k = 1; k < n; ++k) {
    jacobi(k, k - 1) = k;
    jacobi(k - 1, k) = k;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  Eigen::VectorXd nodes = es.eigenvalues();
  Eigen::VectorXd weights(n);
  for (int k = 0; k < n; ++k)
    weights[k] = es.eigenvectors()(0, k) * es.eigenvectors()(0, k);
  weights /= weights.sum();
  return {nodes, weights};
}

void EmitterSpec::validate() const {
  if (!(gamma > 0.0)) throw std::invalid_argument("EmitterSpec.gamma must be > 0");
  if (gamma_star < 0.0) throw std::invalid_argument("EmitterSpec.gamma_star must be >= 0");
  if (sigma_diff < 0.0) throw std::invalid_argument("EmitterSpec.sigma_diff must be >= 0");
  if (jitter_scale < 0.0) throw std::invalid_argument("EmitterSpec.jitter_scale must be >= 0");
  if (!(b0 > 0.0) || b0 > 1.0) throw std::invalid_argument("EmitterSpec.b0 must be in (0, 1]");
}

namespace {

// Unnormalized kernel entry for emission starting at t0. The support edge is
// sharp; quadrature across it is second-order accurate when t0 falls mid-cell
// and degrades to first order for other placements, which the jitter rules
// tolerate.
Complex kernel_entry(const EmitterSpec& spec, double t1, double t2, double t0,
                     double omega0) {
  const double u1 = t1 - t0;
  const double u2 = t2 - t0;
  if (u1 < 0.0 || u2 < 0.0) return Complex(0.0, 0.0);
  const double mag = spec.gamma * std::exp(-0.5 * spec.gamma * (u1 + u2) -
                                           spec.gamma_star * std::abs(u1 - u2));
  const double phase = omega0 * (t1 - t2);
  return Complex(mag * std::cos(phase), mag * std::sin(phase));
}

// Continuum trace fraction of a t0-shifted kernel landing on the grid.
double on_grid_fraction(const EmitterSpec& spec, const TimeGrid& grid, double t0) {
  if (t0 >= grid.t_end) return 0.0;
  const double head = std::max(0.0, grid.t_start - t0);
  return std::exp(-spec.gamma * head) - std::exp(-spec.gamma * (grid.t_end - t0));
}

void check_grid_length(const EmitterSpec& spec, const TimeGrid& grid) {
  const double tail = std::exp(-spec.gamma * (grid.t_end - grid.t_start));
  if (tail > 1e-2)
    throw std::invalid_argument("dephasing_kernel: grid-too-short (exp(-Gamma t_end) > 1e-2)");
  if (tail > 1e-4)
    std::fprintf(stderr,
                 "qbuffer: warning: grid marginally short for Gamma=%g "
                 "(exp(-Gamma span)=%.2e)\n",
                 spec.gamma, tail);
}

}  // namespace

ModeState mix_kernel_nodes(const EmitterSpec& spec, const TimeGrid& grid,
                           std::span<const InhomogeneousNode> nodes) {
  spec.validate();
  check_grid_length(spec, grid);
  if (nodes.empty()) throw std::invalid_argument("mix_kernel_nodes: no nodes");

  double off_grid = 0.0;
  double total_weight = 0.0;
  for (const auto& node : nodes) {
    if (node.weight < 0.0)
      throw std::invalid_argument("mix_kernel_nodes: negative node weight");
    off_grid += node.weight * (1.0 - on_grid_fraction(spec, grid, node.t0));
    total_weight += node.weight;
  }
  if (total_weight <= 0.0)
    throw std::invalid_argument("mix_kernel_nodes: zero total weight");
  if (off_grid / total_weight > 1e-2)
    throw std::invalid_argument(
        "mix_kernel_nodes: grid-too-short (jitter pushes >1% of trace off-grid)");

  // Quadrature tails can place nodes with negligible mass entirely past the
  // grid; drop them and renormalize over what remains.
  double kept_weight = 0.0;
  for (const auto& node : nodes)
    if (node.weight * on_grid_fraction(spec, grid, node.t0) >
        1e-14 * total_weight)
      kept_weight += node.weight;
  if (kept_weight <= 0.0)
    throw std::invalid_argument("mix_kernel_nodes: grid-too-short (no node mass on grid)");

  const int n = grid.n_points;
  const VectorXd t = grid.points();
  const VectorXd w = grid.quadrature();
  MatrixXcd acc = MatrixXcd::Zero(n, n);
  MatrixXcd node_rho(n, n);

  for (const auto& node : nodes) {
    if (node.weight * on_grid_fraction(spec, grid, node.t0) <=
        1e-14 * total_weight)
      continue;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j <= i; ++j)
        node_rho(i, j) = kernel_entry(spec, t[i], t[j], node.t0, node.omega0);
    double tr = 0.0;
    for (int i = 0; i < n; ++i) tr += w[i] * node_rho(i, i).real();
    const double scale = node.weight / (kept_weight * tr);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j <= i; ++j) {
        acc(i, j) += scale * node_rho(i, j);
        if (j != i) acc(j, i) = std::conj(acc(i, j));
      }
  }
  return ModeState(std::move(acc), grid, Domain::time);
}

ModeState dephasing_kernel(const EmitterSpec& spec, const TimeGrid& grid) {
  const InhomogeneousNode node{0.0, spec.omega0, 1.0};
  return mix_kernel_nodes(spec, grid, std::span(&node, 1));
}

ModeState apply_inhomogeneous(const EmitterSpec& spec, const TimeGrid& grid,
                              int quadrature_points) {
  spec.validate();
  if (quadrature_points < 1)
    throw std::invalid_argument("apply_inhomogeneous: quadrature_points >= 1");

  std::vector<std::pair<double, double>> t_nodes;  // (t0, weight)
  if (spec.jitter_kind == JitterKind::none || spec.jitter_scale == 0.0) {
    t_nodes.emplace_back(0.0, 1.0);
  } else if (spec.jitter_kind == JitterKind::gaussian) {
    auto [x, p] = gauss_hermite_normal(quadrature_points);
    for (int k = 0; k < x.size(); ++k)
      t_nodes.emplace_back(spec.jitter_scale * x[k], p[k]);
  } else {
    auto [x, p] = gauss_laguerre_exponential(quadrature_points);
    for (int k = 0; k < x.size(); ++k)
      t_nodes.emplace_back(spec.jitter_scale * x[k], p[k]);
  }

  std::vector<std::pair<double, double>> w_nodes;  // (omega0, weight)
  if (spec.sigma_diff == 0.0) {
    w_nodes.emplace_back(spec.omega0, 1.0);
  } else {
    auto [x, p] = gauss_hermite_normal(quadrature_points);
    for (int k = 0; k < x.size(); ++k)
      w_nodes.emplace_back(spec.omega0 + spec.sigma_diff * x[k], p[k]);
  }

  std::vector<InhomogeneousNode> nodes;
  nodes.reserve(t_nodes.size() * w_nodes.size());
  for (const auto& [t0, pt] : t_nodes)
    for (const auto& [w0, pw] : w_nodes)
      nodes.push_back(InhomogeneousNode{t0, w0, pt * pw});
  return mix_kernel_nodes(spec, grid, nodes);
}

void EnsembleSpec::validate() const {
  if (count < 1) throw std::invalid_argument("EnsembleSpec.count must be >= 1");
  if (quadrature_points < 1)
    throw std::invalid_argument("EnsembleSpec.quadrature_points must be >= 1");
  auto ordered = [](double a, double b, const char* field) {
    if (a > b)
      throw std::invalid_argument(std::string("EnsembleSpec range ill-ordered: ") + field);
  };
  ordered(lo.gamma, hi.gamma, "gamma");
  ordered(lo.gamma_star, hi.gamma_star, "gamma_star");
  ordered(lo.sigma_diff, hi.sigma_diff, "sigma_diff");
  ordered(lo.jitter_scale, hi.jitter_scale, "jitter_scale");
  ordered(lo.omega0, hi.omega0, "omega0");
  ordered(lo.b0, hi.b0, "b0");
  lo.validate();
  hi.validate();
}

EmitterSpec draw_emitter(const EnsembleSpec& spec, int index) {
  const CounterRng rng{spec.seed, static_cast<std::uint64_t>(index)};
  EmitterSpec e;
  e.gamma = rng.uniform(0, spec.lo.gamma, spec.hi.gamma);
  e.gamma_star = rng.uniform(1, spec.lo.gamma_star, spec.hi.gamma_star);
  e.sigma_diff = rng.uniform(2, spec.lo.sigma_diff, spec.hi.sigma_diff);
  e.jitter_scale = rng.uniform(3, spec.lo.jitter_scale, spec.hi.jitter_scale);
  e.omega0 = rng.uniform(4, spec.lo.omega0, spec.hi.omega0);
  e.b0 = rng.uniform(5, spec.lo.b0, spec.hi.b0);
  e.jitter_kind = spec.lo.jitter_kind;
  return e;
}

namespace {

std::pair<EmitterSpec, ModeState> build_member(const EnsembleSpec& spec,
                                               const TimeGrid& grid, int index) {
  const EmitterSpec e = draw_emitter(spec, index);
  try {
    return {e, apply_inhomogeneous(e, grid, spec.quadrature_points)};
  } catch (const std::exception& err) {
    throw std::runtime_error("ensemble member " + std::to_string(index) + ": " +
                             err.what());
  }
}

}  // namespace

std::vector<std::pair<EmitterSpec, ModeState>> sample_ensemble_serial(
    const EnsembleSpec& spec, const TimeGrid& grid) {
  spec.validate();
  std::vector<std::pair<EmitterSpec, ModeState>> out;
  out.reserve(spec.count);
  for (int i = 0; i < spec.count; ++i) out.push_back(build_member(spec, grid, i));
  return out;
}

std::vector<std::pair<EmitterSpec, ModeState>> sample_ensemble(
    const EnsembleSpec& spec, const TimeGrid& grid) {
  spec.validate();
  std::vector<std::optional<std::pair<EmitterSpec, ModeState>>> slots(spec.count);
  std::exception_ptr failure = nullptr;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < spec.count; ++i) {
    try {
      slots[i] = build_member(spec, grid, i);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<std::pair<EmitterSpec, ModeState>> out;
  out.reserve(spec.count);
  for (auto& slot : slots) out.push_back(std::move(*slot));
  return out;
}

}  // namespace qbuffer
