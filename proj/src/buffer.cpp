#include "qbuffer/buffer.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "qbuffer/rng.hpp"

namespace qbuffer {

void BufferConfig::validate() const {
  if (!(coupling_d > 0.0)) throw std::invalid_argument("BufferConfig.coupling_d must be > 0");
  if (!(delta > 0.0)) throw std::invalid_argument("BufferConfig.delta must be > 0");
  if (gamma_b < 0.0) throw std::invalid_argument("BufferConfig.gamma_b must be >= 0");
  if (n_z < 2) throw std::invalid_argument("BufferConfig.n_z must be >= 2");
  if (t_buff < 0.0) throw std::invalid_argument("BufferConfig.t_buff must be >= 0");
  if (!(rabi_calibration > 0.0))
    throw std::invalid_argument("BufferConfig.rabi_calibration must be > 0");
}

namespace {

double envelope_norm2(const TimeGrid& grid, const VectorXcd& env) {
  const VectorXd w = grid.quadrature();
  double acc = 0.0;
  for (int i = 0; i < env.size(); ++i) acc += w[i] * std::norm(env[i]);
  return acc;
}

}  // namespace

ControlPulse ControlPulse::off(const TimeGrid& grid) {
  ControlPulse p;
  p.envelope_ = VectorXcd::Zero(grid.n_points);
  p.energy_pj_ = 0.0;
  p.window_start_ = grid.t_start;
  p.window_end_ = grid.t_start;  // degenerate: no window
  return p;
}

ControlPulse ControlPulse::gaussian(const TimeGrid& grid,
                                    const BufferConfig& config, double center,
                                    double fwhm, double energy_pj,
                                    double chirp) {
  config.validate();
  if (!(fwhm > 0.0)) throw std::invalid_argument("ControlPulse: fwhm must be > 0");
  if (energy_pj < 0.0) throw std::invalid_argument("ControlPulse: energy must be >= 0");

  ControlPulse p;
  p.envelope_ = VectorXcd::Zero(grid.n_points);
  const double alpha = 2.0 * std::log(2.0) / (fwhm * fwhm);
  for (int i = 0; i < grid.n_points; ++i) {
    const double u = grid.point(i) - center;
    p.envelope_[i] = std::exp(-alpha * u * u) *
                     std::exp(Complex(0.0, chirp * u * u));
  }
  const double raw = envelope_norm2(grid, p.envelope_);
  const double target = config.rabi_calibration * config.rabi_calibration * energy_pj;
  if (energy_pj == 0.0)
    p.envelope_.setZero();
  else
    p.envelope_ *= std::sqrt(target / raw);
  p.energy_pj_ = energy_pj;

  const double half = 2.58 * fwhm;  // amplitude ~1e-4 of the peak
  p.window_start_ = std::max(grid.t_start, center - half);
  p.window_end_ = std::min(grid.t_end, center + half);
  return p;
}

ControlPulse ControlPulse::piecewise_linear(const TimeGrid& grid,
                                            const BufferConfig& config,
                                            const std::vector<double>& knot_times,
                                            const std::vector<double>& knot_amps,
                                            double energy_pj, double chirp) {
  config.validate();
  if (knot_times.size() < 2 || knot_times.size() != knot_amps.size())
    throw std::invalid_argument("ControlPulse: need matching knot times/amplitudes (>= 2)");
  for (std::size_t k = 1; k < knot_times.size(); ++k)
    if (!(knot_times[k] > knot_times[k - 1]))
      throw std::invalid_argument("ControlPulse: knot times must increase");
  for (double a : knot_amps)
    if (a < 0.0) throw std::invalid_argument("ControlPulse: knot amplitudes must be >= 0");
  if (energy_pj < 0.0) throw std::invalid_argument("ControlPulse: energy must be >= 0");

  ControlPulse p;
  p.envelope_ = VectorXcd::Zero(grid.n_points);
  const double mid = 0.5 * (knot_times.front() + knot_times.back());
  for (int i = 0; i < grid.n_points; ++i) {
    const double t = grid.point(i);
    if (t < knot_times.front() || t > knot_times.back()) continue;
    std::size_t k = 1;
    while (k + 1 < knot_times.size() && knot_times[k] < t) ++k;
    const double f = (t - knot_times[k - 1]) / (knot_times[k] - knot_times[k - 1]);
    const double amp = (1.0 - f) * knot_amps[k - 1] + f * knot_amps[k];
    const double u = t - mid;
    p.envelope_[i] = amp * std::exp(Complex(0.0, chirp * u * u));
  }
  const double raw = envelope_norm2(grid, p.envelope_);
  const double target = config.rabi_calibration * config.rabi_calibration * energy_pj;
  if (energy_pj == 0.0) {
    p.envelope_.setZero();
  } else {
    if (raw <= 0.0)
      throw std::invalid_argument("ControlPulse: zero knot envelope with nonzero energy");
    p.envelope_ *= std::sqrt(target / raw);
  }
  p.energy_pj_ = energy_pj;
  p.window_start_ = std::max(grid.t_start, knot_times.front());
  p.window_end_ = std::min(grid.t_end, knot_times.back());
  return p;
}

ControlPulse ControlPulse::from_raw(const TimeGrid& grid,
                                    const BufferConfig& config,
                                    VectorXcd envelope, double energy_pj,
                                    double window_start, double window_end) {
  if (envelope.size() != grid.n_points)
    throw std::invalid_argument("ControlPulse: envelope does not match grid");
  if (energy_pj < 0.0) throw std::invalid_argument("ControlPulse: energy must be >= 0");
  const double raw = envelope_norm2(grid, envelope);
  const double target = config.rabi_calibration * config.rabi_calibration * energy_pj;
  if (std::abs(raw - target) > 1e-6 * std::max(1.0, target))
    throw std::invalid_argument("ControlPulse: energy inconsistent with envelope");
  ControlPulse p;
  p.envelope_ = std::move(envelope);
  p.energy_pj_ = energy_pj;
  p.window_start_ = window_start;
  p.window_end_ = window_end;
  return p;
}

ControlPulse ControlPulse::frequency_shifted(const TimeGrid& grid,
                                             double delta_omega) const {
  ControlPulse p(*this);
  for (int i = 0; i < p.envelope_.size(); ++i)
    p.envelope_[i] *= std::exp(Complex(0.0, delta_omega * grid.point(i)));
  return p;
}

namespace {

constexpr double kMaxStepRotation = 1.0;  // rad per step*cell

struct MeshPlan {
  int n = 0;
  int n_z = 0;
  int split = 0;
  VectorXd theta;        // rotation magnitude per step
  VectorXcd phase;       // unit phase of the coupling per step
  VectorXcd stark_half;  // half-step AC-Stark multiplier on B
  double storage_factor = 1.0;
};

bool window_empty(const ControlPulse& p) {
  return !(p.window_end() > p.window_start());
}

MeshPlan build_plan(const BufferConfig& cfg, const TimeGrid& grid,
                    const ControlPulse& read_in, const ControlPulse& read_out) {
  cfg.validate();
  if (read_in.envelope().size() != grid.n_points ||
      read_out.envelope().size() != grid.n_points)
    throw std::invalid_argument("solve_eom: control pulses do not match grid");

  const bool in_empty = window_empty(read_in);
  const bool out_empty = window_empty(read_out);
  const double in_end = in_empty ? grid.t_start : read_in.window_end();
  const double out_start = out_empty ? grid.t_end : read_out.window_start();
  if (!in_empty && !out_empty && in_end > out_start)
    throw std::invalid_argument("solve_eom: overlapping-windows");

  MeshPlan plan;
  plan.n = grid.n_points;
  plan.n_z = cfg.n_z;
  const double t_split = 0.5 * (in_end + out_start);
  plan.split = static_cast<int>(std::ceil((t_split - grid.t_start) / grid.dt() - 1e-9));
  plan.split = std::max(0, std::min(plan.split, plan.n));

  const VectorXd w = grid.quadrature();
  const double dz = 1.0 / cfg.n_z;
  const double couple = std::sqrt(cfg.coupling_d) / (2.0 * cfg.delta);
  plan.theta.resize(plan.n);
  plan.phase.resize(plan.n);
  plan.stark_half.resize(plan.n);
  for (int m = 0; m < plan.n; ++m) {
    const Complex omega = (m < plan.split) ? read_in.envelope()[m]
                                           : read_out.envelope()[m];
    const Complex g = couple * omega;
    const double mag = std::abs(g);
    plan.theta[m] = mag * std::sqrt(dz * w[m]);
    plan.phase[m] = (mag > 0.0) ? g / mag : Complex(1.0, 0.0);
    if (plan.theta[m] > kMaxStepRotation)
      throw std::invalid_argument("solve_eom: grid-too-coarse for this control power");
    const double stark = cfg.include_stark
                             ? std::norm(omega) / (4.0 * cfg.delta) * w[m] * 0.5
                             : 0.0;
    plan.stark_half[m] = std::exp(Complex(0.0, -stark));
  }

  if (cfg.t_buff == 0.0 || cfg.gamma_b == 0.0)
    plan.storage_factor = 1.0;
  else
    plan.storage_factor = std::exp(-cfg.gamma_b * cfg.t_buff);
  return plan;
}

// One pass of the beam-splitter mesh in slice coordinates
// (s_m = S(t_m) sqrt(w_m), photon content |s_m|^2). Each slice/cell pair
// undergoes an exact 2x2 unitary rotation, so the discrete map conserves
// photon number to machine precision.
void run_mesh(const MeshPlan& plan, const VectorXcd& shat_in,
              VectorXcd& shat_ret, VectorXcd* shat_trans, VectorXcd* spin_final) {
  VectorXcd b = VectorXcd::Zero(plan.n_z);
  shat_ret.setZero(plan.n);
  if (shat_trans) shat_trans->setZero(plan.n);

  for (int m = 0; m < plan.n; ++m) {
    if (m == plan.split && plan.storage_factor != 1.0) b *= plan.storage_factor;

    const bool stored_stage = m >= plan.split;
    Complex s = stored_stage ? Complex(0.0, 0.0) : shat_in[m];

    const double theta = plan.theta[m];
    if (theta > 0.0) {
      const double c = std::cos(theta);
      const double sn = std::sin(theta);
      const Complex up = Complex(0.0, 1.0) * plan.phase[m] * sn;
      const Complex dn = Complex(0.0, 1.0) * std::conj(plan.phase[m]) * sn;
      const Complex sh = plan.stark_half[m];
      if (sh != Complex(1.0, 0.0)) b *= sh;
      for (int j = 0; j < plan.n_z; ++j) {
        const Complex s_old = s;
        const Complex b_old = b[j];
        s = c * s_old + up * b_old;
        b[j] = dn * s_old + c * b_old;
      }
      if (sh != Complex(1.0, 0.0)) b *= sh;
    }

    if (stored_stage)
      shat_ret[m] = s;
    else if (shat_trans)
      (*shat_trans)[m] = s;
  }
  if (spin_final) *spin_final = b;
}

}  // namespace

EomResult solve_eom(const BufferConfig& config, const TimeGrid& grid,
                    const ControlPulse& read_in, const ControlPulse& read_out,
                    const VectorXcd& s_in) {
  if (s_in.size() != grid.n_points)
    throw std::invalid_argument("solve_eom: input envelope does not match grid");
  const MeshPlan plan = build_plan(config, grid, read_in, read_out);

  const VectorXd w = grid.quadrature();
  const VectorXd sw = w.cwiseSqrt();
  VectorXcd shat_in = s_in.cwiseProduct(sw.cast<Complex>());

  EomResult result;
  VectorXcd shat_ret, shat_trans;
  run_mesh(plan, shat_in, shat_ret, &shat_trans, &result.spin_wave);
  result.retrieved = shat_ret.cwiseQuotient(sw.cast<Complex>());
  result.transmitted = shat_trans.cwiseQuotient(sw.cast<Complex>());
  result.split_index = plan.split;
  return result;
}

double total_efficiency(const TimeGrid& grid, const VectorXcd& s_in,
                        const VectorXcd& s_out) {
  const double in2 = envelope_norm2(grid, s_in);
  if (in2 <= 0.0) throw std::invalid_argument("total_efficiency: zero input");
  return envelope_norm2(grid, s_out) / in2;
}

GreenOperator::GreenOperator(MatrixXcd kernel, TimeGrid grid, BufferConfig config)
    : grid_(grid), config_(config), kernel_(std::move(kernel)) {
  if (kernel_.rows() != grid_.n_points || kernel_.cols() != grid_.n_points)
    throw std::invalid_argument("GreenOperator: kernel does not match grid");

  const VectorXd w = grid_.quadrature();
  slice_matrix_ = detail::symmetrized(kernel_, w);

  Eigen::BDCSVD<MatrixXcd> svd(slice_matrix_,
                               Eigen::ComputeThinU | Eigen::ComputeThinV);
  sigma_ = svd.singularValues();
  if (sigma_.size() > 0 && sigma_[0] > 1.0 + 1e-6)
    throw std::runtime_error("GreenOperator: passivity violated (sigma > 1)");

  const VectorXd sinv = w.cwiseSqrt().cwiseInverse();
  output_modes_ = sinv.asDiagonal() * svd.matrixU();
  input_modes_ = sinv.asDiagonal() * svd.matrixV();

  // Deterministic mode phases: pivot of each output mode real positive,
  // with the matching rotation applied to the input mode.
  for (int k = 0; k < output_modes_.cols(); ++k) {
    int imax = 0;
    output_modes_.col(k).cwiseAbs().maxCoeff(&imax);
    const Complex pivot = output_modes_(imax, k);
    if (std::abs(pivot) > 0.0) {
      const Complex rot = std::abs(pivot) / pivot;
      output_modes_.col(k) *= rot;
      input_modes_.col(k) *= rot;
    }
  }
}

VectorXcd GreenOperator::apply(const VectorXcd& s_in) const {
  if (s_in.size() != grid_.n_points)
    throw std::invalid_argument("GreenOperator::apply: envelope does not match grid");
  const VectorXd sw = grid_.quadrature().cwiseSqrt();
  const VectorXcd shat = s_in.cwiseProduct(sw.cast<Complex>());
  return (slice_matrix_ * shat).cwiseQuotient(sw.cast<Complex>());
}

namespace {

MatrixXcd build_slice_columns(const BufferConfig& config, const TimeGrid& grid,
                              const ControlPulse& read_in,
                              const ControlPulse& read_out, bool parallel) {
  const MeshPlan plan = build_plan(config, grid, read_in, read_out);
  const int n = grid.n_points;
  MatrixXcd ghat = MatrixXcd::Zero(n, n);

  // Inputs inside the read-out segment are not part of the buffered
  // channel; their columns stay zero.
  const int n_cols = plan.split;

  if (parallel) {
#pragma omp parallel for schedule(static)
    for (int j = 0; j < n_cols; ++j) {
      VectorXcd e = VectorXcd::Zero(n);
      e[j] = 1.0;
      VectorXcd col;
      run_mesh(plan, e, col, nullptr, nullptr);
      ghat.col(j) = col;
    }
  } else {
    for (int j = 0; j < n_cols; ++j) {
      VectorXcd e = VectorXcd::Zero(n);
      e[j] = 1.0;
      VectorXcd col;
      run_mesh(plan, e, col, nullptr, nullptr);
      ghat.col(j) = col;
    }
  }

  // Linearity spot check on a random superposition.
  const CounterRng rng{0xC0FFEEULL, 17};
  VectorXcd x(n), y(n);
  for (int i = 0; i < n; ++i) {
    x[i] = Complex(rng.uniform(4 * i) - 0.5, rng.uniform(4 * i + 1) - 0.5);
    y[i] = Complex(rng.uniform(4 * i + 2) - 0.5, rng.uniform(4 * i + 3) - 0.5);
  }
  const Complex a(0.8, -0.3), bcoef(-0.4, 0.6);
  VectorXcd gx, gy, gxy;
  run_mesh(plan, x, gx, nullptr, nullptr);
  run_mesh(plan, y, gy, nullptr, nullptr);
  VectorXcd mix = a * x + bcoef * y;
  run_mesh(plan, mix, gxy, nullptr, nullptr);
  const double resid = (gxy - a * gx - bcoef * gy).norm();
  if (resid > 1e-8 * std::max(1.0, mix.norm()))
    throw std::runtime_error("green_function: linearity check failed");

  return ghat;
}

GreenOperator assemble_green(const BufferConfig& config, const TimeGrid& grid,
                             const ControlPulse& read_in,
                             const ControlPulse& read_out, bool parallel) {
  MatrixXcd ghat = build_slice_columns(config, grid, read_in, read_out, parallel);
  return GreenOperator(detail::unsymmetrized(ghat, grid.quadrature()), grid, config);
}

}  // namespace

GreenOperator green_function(const BufferConfig& config, const TimeGrid& grid,
                             const ControlPulse& read_in,
                             const ControlPulse& read_out) {
  return assemble_green(config, grid, read_in, read_out, true);
}

GreenOperator green_function_serial(const BufferConfig& config,
                                    const TimeGrid& grid,
                                    const ControlPulse& read_in,
                                    const ControlPulse& read_out) {
  return assemble_green(config, grid, read_in, read_out, false);
}

std::pair<ModeState, double> buffer_output_state(const GreenOperator& g,
                                                 const ModeState& rho_in) {
  if (!(rho_in.grid() == g.grid()) || rho_in.domain() != Domain::time)
    throw std::invalid_argument("buffer_output_state: grid-mismatch");
  const VectorXd w = g.grid().quadrature();
  const MatrixXcd a_in = detail::symmetrized(rho_in.rho(), w);
  const MatrixXcd a_raw = g.slice_matrix() * a_in * g.slice_matrix().adjoint();
  const double total = a_raw.trace().real();
  if (total <= 1e-12)
    throw std::runtime_error("buffer_output_state: zero-trace (nothing retrieved)");
  const MatrixXcd rho_raw = detail::unsymmetrized(a_raw, w) / total;
  return {project_physical(rho_raw, g.grid(), Domain::time), total};
}

ControlPulse with_energy(const ControlPulse& pulse, const TimeGrid& grid,
                         const BufferConfig& config, double energy_pj) {
  if (energy_pj < 0.0) throw std::invalid_argument("with_energy: energy must be >= 0");
  if (!(pulse.energy_pj() > 0.0))
    throw std::invalid_argument("with_energy: template pulse must carry energy");
  VectorXcd env = pulse.envelope() * std::sqrt(energy_pj / pulse.energy_pj());
  return ControlPulse::from_raw(grid, config, env, energy_pj,
                                pulse.window_start(), pulse.window_end());
}

namespace {

Eigen::MatrixXd surface_impl(const BufferConfig& config, const TimeGrid& grid,
                             const ControlPulse& in_tpl, const ControlPulse& out_tpl,
                             const std::vector<double>& ri, const std::vector<double>& ro,
                             const VectorXcd& probe, double gate_half_ns,
                             bool parallel) {
  for (double e : ri)
    if (e < 0.0) throw std::invalid_argument("efficiency_surface: energies must be >= 0");
  for (double e : ro)
    if (e < 0.0) throw std::invalid_argument("efficiency_surface: energies must be >= 0");

  const VectorXd w = grid.quadrature();
  const double in2 = envelope_norm2(grid, probe);
  if (in2 <= 0.0) throw std::invalid_argument("efficiency_surface: zero probe");
  const double gate_center =
      0.5 * (out_tpl.window_start() + out_tpl.window_end());

  const int nr = static_cast<int>(ri.size());
  const int nc = static_cast<int>(ro.size());
  Eigen::MatrixXd eta(nr, nc);
  const int total = nr * nc;
  std::exception_ptr failure = nullptr;

#pragma omp parallel for schedule(static) if (parallel)
  for (int idx = 0; idx < total; ++idx) {
    try {
      const int r = idx / nc;
      const int c = idx % nc;
      const ControlPulse pin = with_energy(in_tpl, grid, config, ri[r]);
      const ControlPulse pout = with_energy(out_tpl, grid, config, ro[c]);
      const EomResult res = solve_eom(config, grid, pin, pout, probe);
      double out2 = 0.0;
      for (int i = 0; i < grid.n_points; ++i) {
        if (gate_half_ns > 0.0 &&
            std::abs(grid.point(i) - gate_center) > gate_half_ns)
          continue;
        out2 += w[i] * std::norm(res.retrieved[i]);
      }
      eta(r, c) = out2 / in2;
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return eta;
}

}  // namespace

Eigen::MatrixXd efficiency_surface(const BufferConfig& config, const TimeGrid& grid,
                                   const ControlPulse& read_in_template,
                                   const ControlPulse& read_out_template,
                                   const std::vector<double>& read_in_energies,
                                   const std::vector<double>& read_out_energies,
                                   const VectorXcd& probe, double gate_half_ns) {
  return surface_impl(config, grid, read_in_template, read_out_template,
                      read_in_energies, read_out_energies, probe, gate_half_ns,
                      true);
}

Eigen::MatrixXd efficiency_surface_serial(
    const BufferConfig& config, const TimeGrid& grid,
    const ControlPulse& read_in_template, const ControlPulse& read_out_template,
    const std::vector<double>& read_in_energies,
    const std::vector<double>& read_out_energies, const VectorXcd& probe,
    double gate_half_ns) {
  return surface_impl(config, grid, read_in_template, read_out_template,
                      read_in_energies, read_out_energies, probe, gate_half_ns,
                      false);
}

MatrixXcd propagate_slices(const BufferConfig& config, const TimeGrid& grid,
                           const ControlPulse& read_in,
                           const ControlPulse& read_out,
                           const MatrixXcd& inputs, bool parallel) {
  if (inputs.rows() != grid.n_points)
    throw std::invalid_argument("propagate_slices: inputs do not match grid");
  const MeshPlan plan = build_plan(config, grid, read_in, read_out);
  const int cols = static_cast<int>(inputs.cols());
  MatrixXcd out(grid.n_points, cols);
#pragma omp parallel for schedule(static) if (parallel)
  for (int k = 0; k < cols; ++k) {
    VectorXcd ret;
    run_mesh(plan, inputs.col(k), ret, nullptr, nullptr);
    out.col(k) = ret;
  }
  return out;
}

double storage_efficiency(const BufferConfig& config, const TimeGrid& grid,
                          const ControlPulse& read_in, const VectorXcd& s_in) {
  BufferConfig cfg = config;
  cfg.gamma_b = 0.0;  // measure what was written, not what survives storage
  const EomResult res =
      solve_eom(cfg, grid, read_in, ControlPulse::off(grid), s_in);
  const double in2 = envelope_norm2(grid, s_in);
  if (in2 <= 0.0) throw std::invalid_argument("storage_efficiency: zero input");
  return res.spin_wave.squaredNorm() / in2;
}

GreenOperator shifted_readout(const BufferConfig& config, const TimeGrid& grid,
                              const ControlPulse& read_in,
                              const ControlPulse& read_out, double delta_omega) {
  const double nyquist = M_PI / grid.dt();
  if (std::abs(delta_omega) > nyquist)
    throw std::invalid_argument("shifted_readout: nyquist-exceeded");
  return green_function(config, grid, read_in,
                        read_out.frequency_shifted(grid, delta_omega));
}

namespace {

constexpr char kGreenMagic[4] = {'Q', 'B', 'G', 'O'};
constexpr std::uint32_t kGreenVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("green container: truncated file");
  return v;
}

}  // namespace

void GreenOperator::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("GreenOperator::save: cannot open " + path);
  os.write(kGreenMagic, 4);
  write_pod(os, kGreenVersion);
  write_pod(os, static_cast<std::int32_t>(grid_.n_points));
  write_pod(os, grid_.t_start);
  write_pod(os, grid_.t_end);
  write_pod(os, config_.coupling_d);
  write_pod(os, config_.delta);
  write_pod(os, config_.gamma_b);
  write_pod(os, static_cast<std::int32_t>(config_.n_z));
  write_pod(os, config_.t_buff);
  write_pod(os, config_.rabi_calibration);
  write_pod(os, static_cast<std::uint8_t>(config_.include_stark ? 1 : 0));
  for (int i = 0; i < kernel_.rows(); ++i)
    for (int j = 0; j < kernel_.cols(); ++j) write_pod(os, kernel_(i, j));
  if (!os) throw std::runtime_error("GreenOperator::save: write failed");
}

GreenOperator GreenOperator::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("GreenOperator::load: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kGreenMagic, 4) != 0)
    throw std::runtime_error("GreenOperator::load: bad magic");
  if (read_pod<std::uint32_t>(is) != kGreenVersion)
    throw std::runtime_error("GreenOperator::load: unsupported version");
  const auto n = read_pod<std::int32_t>(is);
  TimeGrid grid{n, 0.0, 0.0};
  grid.t_start = read_pod<double>(is);
  grid.t_end = read_pod<double>(is);
  BufferConfig cfg;
  cfg.coupling_d = read_pod<double>(is);
  cfg.delta = read_pod<double>(is);
  cfg.gamma_b = read_pod<double>(is);
  cfg.n_z = read_pod<std::int32_t>(is);
  cfg.t_buff = read_pod<double>(is);
  cfg.rabi_calibration = read_pod<double>(is);
  cfg.include_stark = read_pod<std::uint8_t>(is) != 0;
  MatrixXcd kernel(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) kernel(i, j) = read_pod<Complex>(is);
  return GreenOperator(std::move(kernel), grid, cfg);
}

}  // namespace qbuffer
