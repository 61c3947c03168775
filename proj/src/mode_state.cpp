#include "qbuffer/mode_state.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace qbuffer {

namespace {

constexpr double kHermitianTol = 1e-10;   // relative to max |entry|
constexpr double kPsdTol = 1e-8;          // relative to largest eigenvalue
constexpr double kTraceTol = 1e-8;
constexpr double kMaxClippedWeight = 1e-4;

VectorXd axis_quadrature(const TimeGrid& grid, Domain domain) {
  return domain == Domain::time ? grid.quadrature() : frequency_quadrature(grid);
}

double quad_trace(const MatrixXcd& rho, const VectorXd& w) {
  double tr = 0.0;
  for (int i = 0; i < rho.rows(); ++i) tr += w[i] * rho(i, i).real();
  return tr;
}

double max_abs(const MatrixXcd& m) { return m.cwiseAbs().maxCoeff(); }

// Unitary map from time samples to frequency samples,
// U_{ji} = exp(-i w_j t_i) / sqrt(n). Exactly unitary because w_j t_i
// separates into row/column phases plus the DFT kernel.
MatrixXcd fourier_unitary(const TimeGrid& grid) {
  const int n = grid.n_points;
  const VectorXd t = grid.points();
  const VectorXd w = frequency_axis(grid);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  MatrixXcd u(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      u(j, i) = scale * std::exp(Complex(0.0, -w[j] * t[i]));
  return u;
}

}  // namespace

namespace detail {

MatrixXcd symmetrized(const MatrixXcd& rho, const VectorXd& weights) {
  const VectorXd s = weights.cwiseSqrt();
  return s.asDiagonal() * rho * s.asDiagonal();
}

MatrixXcd unsymmetrized(const MatrixXcd& a, const VectorXd& weights) {
  const VectorXd s = weights.cwiseSqrt().cwiseInverse();
  return s.asDiagonal() * a * s.asDiagonal();
}

void fix_mode_phases(MatrixXcd& modes) {
  for (int k = 0; k < modes.cols(); ++k) {
    int imax = 0;
    modes.col(k).cwiseAbs().maxCoeff(&imax);
    const Complex pivot = modes(imax, k);
    if (std::abs(pivot) > 0.0) modes.col(k) *= std::abs(pivot) / pivot;
  }
}

}  // namespace detail

ModeState::ModeState(MatrixXcd rho, TimeGrid grid, Domain domain)
    : grid_(grid), domain_(domain), rho_(std::move(rho)) {
  if (grid_.n_points < 2) throw std::invalid_argument("ModeState: bad grid");
  if (rho_.rows() != grid_.n_points || rho_.cols() != grid_.n_points)
    throw std::invalid_argument("ModeState: matrix does not match grid");

  const double scale = max_abs(rho_);
  if (!(scale > 0.0) || !std::isfinite(scale))
    throw std::invalid_argument("ModeState: matrix is zero or non-finite");
  const double herm = max_abs(rho_ - rho_.adjoint());
  if (herm > kHermitianTol * scale)
    throw std::invalid_argument("ModeState: not-hermitian");

  const VectorXd w = axis_quadrature(grid_, domain_);
  if (std::abs(quad_trace(rho_, w) - 1.0) > kTraceTol)
    throw std::invalid_argument("ModeState: trace is not one under quadrature");

  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(detail::symmetrized(rho_, w),
                                              Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (lo < -kPsdTol * hi)
    throw std::invalid_argument("ModeState: not positive semidefinite");
}

VectorXd ModeState::axis() const {
  return domain_ == Domain::time ? grid_.points() : frequency_axis(grid_);
}

VectorXd ModeState::quadrature() const {
  return axis_quadrature(grid_, domain_);
}

double ModeDecomposition::schmidt_number() const {
  return 1.0 / weights.squaredNorm();
}

ModeDecomposition eigendecompose(const ModeState& state) {
  const VectorXd w = state.quadrature();
  const MatrixXcd a = detail::symmetrized(state.rho(), w);
  if (max_abs(a - a.adjoint()) > kHermitianTol * std::max(1e-300, max_abs(a)))
    throw std::invalid_argument("eigendecompose: not-hermitian");

  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(a);
  const int n = state.size();

  // Eigen returns ascending order; flip to descending.
  VectorXd alpha(n);
  MatrixXcd modes(n, n);
  for (int k = 0; k < n; ++k) {
    alpha[k] = es.eigenvalues()[n - 1 - k];
    modes.col(k) = es.eigenvectors().col(n - 1 - k);
  }

  double clipped = 0.0;
  for (int k = 0; k < n; ++k) {
    if (alpha[k] < 0.0) {
      clipped -= alpha[k];
      alpha[k] = 0.0;
    }
  }
  if (clipped > kMaxClippedWeight)
    throw std::runtime_error("eigendecompose: clipped eigenvalue weight exceeds 1e-4");
  alpha /= alpha.sum();

  // Back to quadrature-orthonormal modes.
  const VectorXd sinv = w.cwiseSqrt().cwiseInverse();
  modes = sinv.asDiagonal() * modes;
  detail::fix_mode_phases(modes);
  return ModeDecomposition{std::move(alpha), std::move(modes)};
}

double self_indistinguishability(const ModeState& state) {
  const MatrixXcd a = detail::symmetrized(state.rho(), state.quadrature());
  return a.squaredNorm();
}

double inter_indistinguishability(const ModeState& a, const ModeState& b) {
  if (!a.same_layout(b))
    throw std::invalid_argument("inter_indistinguishability: grid-mismatch");
  const VectorXd w = a.quadrature();
  const MatrixXcd sa = detail::symmetrized(a.rho(), w);
  const MatrixXcd sb = detail::symmetrized(b.rho(), w);
  return (sa * sb).trace().real();
}

namespace {

ModeState transform_domain(const ModeState& state, Domain target) {
  const TimeGrid& grid = state.grid();
  const MatrixXcd u = fourier_unitary(grid);
  const VectorXd w_from = state.quadrature();
  const VectorXd w_to = axis_quadrature(grid, target);

  MatrixXcd a = detail::symmetrized(state.rho(), w_from);
  if (target == Domain::frequency)
    a = u * a * u.adjoint();
  else
    a = u.adjoint() * a * u;
  // Unitary conjugation can leave ~1e-16 asymmetry; remove it before
  // validation.
  a = 0.5 * (a + a.adjoint()).eval();
  return ModeState(detail::unsymmetrized(a, w_to), grid, target);
}

}  // namespace

ModeState to_frequency(const ModeState& state) {
  if (state.domain() != Domain::time)
    throw std::invalid_argument("to_frequency: wrong-domain");
  return transform_domain(state, Domain::frequency);
}

ModeState to_time(const ModeState& state) {
  if (state.domain() != Domain::frequency)
    throw std::invalid_argument("to_time: wrong-domain");
  return transform_domain(state, Domain::time);
}

ModeState project_physical(const MatrixXcd& raw, const TimeGrid& grid,
                           Domain domain) {
  if (raw.rows() != grid.n_points || raw.cols() != grid.n_points)
    throw std::invalid_argument("project_physical: matrix does not match grid");

  const MatrixXcd herm = 0.5 * (raw + raw.adjoint());
  const VectorXd w = axis_quadrature(grid, domain);

  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(detail::symmetrized(herm, w));
  VectorXd ev = es.eigenvalues();
  const double trace_before = ev.sum();

  double trace = 0.0;
  for (int k = 0; k < ev.size(); ++k) {
    if (ev[k] < 0.0) ev[k] = 0.0;
    trace += ev[k];
  }
  if (trace <= 1e-12)
    throw std::runtime_error("project_physical: zero-trace after clipping");

  // Already valid: hand the symmetrized input back untouched so the
  // operation is idempotent.
  if (es.eigenvalues().minCoeff() >= 0.0 && std::abs(trace_before - 1.0) <= 1e-12)
    return ModeState(herm, grid, domain);

  const MatrixXcd a =
      es.eigenvectors() * (ev / trace).asDiagonal() * es.eigenvectors().adjoint();
  return ModeState(detail::unsymmetrized(0.5 * (a + a.adjoint()), w), grid, domain);
}

ModeState pure_state(const VectorXcd& envelope, const TimeGrid& grid,
                     Domain domain) {
  if (envelope.size() != grid.n_points)
    throw std::invalid_argument("pure_state: envelope does not match grid");
  const VectorXd w = axis_quadrature(grid, domain);
  double norm2 = 0.0;
  for (int i = 0; i < envelope.size(); ++i)
    norm2 += w[i] * std::norm(envelope[i]);
  if (norm2 <= 0.0)
    throw std::invalid_argument("pure_state: zero envelope");
  const VectorXcd psi = envelope / std::sqrt(norm2);
  return ModeState(psi * psi.adjoint(), grid, domain);
}

ModeState mix_states(const std::vector<std::pair<double, ModeState>>& terms) {
  if (terms.empty()) throw std::invalid_argument("mix_states: empty mixture");
  MatrixXcd acc = MatrixXcd::Zero(terms.front().second.size(),
                                  terms.front().second.size());
  double total = 0.0;
  for (const auto& [p, state] : terms) {
    if (p < 0.0) throw std::invalid_argument("mix_states: negative weight");
    if (!state.same_layout(terms.front().second))
      throw std::invalid_argument("mix_states: grid-mismatch");
    acc += p * state.rho();
    total += p;
  }
  if (total <= 0.0) throw std::invalid_argument("mix_states: zero total weight");
  return ModeState(acc / total, terms.front().second.grid(),
                   terms.front().second.domain());
}

namespace {

constexpr char kMagic[4] = {'Q', 'B', 'M', 'S'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("state container: truncated file");
  return v;
}

}  // namespace

void save_state(const ModeState& state, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_state: cannot open " + path);
  os.write(kMagic, 4);
  write_pod(os, kVersion);
  write_pod(os, static_cast<std::int32_t>(state.grid().n_points));
  write_pod(os, state.grid().t_start);
  write_pod(os, state.grid().t_end);
  write_pod(os, static_cast<std::uint8_t>(state.domain()));
  const MatrixXcd& rho = state.rho();
  for (int i = 0; i < rho.rows(); ++i)
    for (int j = 0; j < rho.cols(); ++j) write_pod(os, rho(i, j));
  if (!os) throw std::runtime_error("save_state: write failed for " + path);
}

ModeState load_state(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_state: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("load_state: bad magic");
  const auto version = read_pod<std::uint32_t>(is);
  if (version != kVersion)
    throw std::runtime_error("load_state: unsupported container version");
  const auto n = read_pod<std::int32_t>(is);
  const auto t0 = read_pod<double>(is);
  const auto t1 = read_pod<double>(is);
  const auto domain = static_cast<Domain>(read_pod<std::uint8_t>(is));
  MatrixXcd rho(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) rho(i, j) = read_pod<Complex>(is);
  return ModeState(std::move(rho), TimeGrid{n, t0, t1}, domain);
}

}  // namespace qbuffer
