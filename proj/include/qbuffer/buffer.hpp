#ifndef QBUFFER_BUFFER_HPP
#define QBUFFER_BUFFER_HPP

#include <string>
#include <utility>
#include <vector>

#include "qbuffer/mode_state.hpp"

namespace qbuffer {

// Coherent-buffer parameters. The read-in/read-out interaction is the
// adiabatically-eliminated two-field model
//   d/dz S(z,t) =  i g(t) B(z,t)
//   d/dt B(z,t) =  i g*(t) S(z,t) - i stark(t) B(z,t)
// with g = sqrt(d) Omega / (2 Delta) and stark = |Omega|^2 / (4 Delta).
// The stored coherence decays by exp(-gamma_b * t_buff) once, between the
// read-in and read-out windows.
struct BufferConfig {
  double coupling_d = 8.0;       // effective optical depth, dimensionless
  double delta = 47.1238898038469;  // 2*pi*7.5 rad/ns
  double gamma_b = 0.0;          // storage decay rate, 1/ns
  int n_z = 24;                  // longitudinal cells
  double t_buff = 5.5;           // ns
  double rabi_calibration = 1.0; // integral |Omega|^2 dt = kappa^2 * E[pJ]
  bool include_stark = true;

  void validate() const;
};

// Complex control envelope Omega(t) on the grid, tied to a pulse energy in
// picojoules through the config's calibration constant.
class ControlPulse {
 public:
  static ControlPulse off(const TimeGrid& grid);
  static ControlPulse gaussian(const TimeGrid& grid, const BufferConfig& config,
                               double center, double fwhm, double energy_pj,
                               double chirp = 0.0);
  // Real non-negative knot amplitudes at the given times, linearly
  // interpolated, zero outside, scaled to the requested energy; a linear
  // chirp may be applied around the window center.
  static ControlPulse piecewise_linear(const TimeGrid& grid,
                                       const BufferConfig& config,
                                       const std::vector<double>& knot_times,
                                       const std::vector<double>& knot_amps,
                                       double energy_pj, double chirp = 0.0);
  // Deserialization/rescaling entry; re-checks the energy/envelope
  // consistency invariant against the calibration constant.
  static ControlPulse from_raw(const TimeGrid& grid, const BufferConfig& config,
                               VectorXcd envelope, double energy_pj,
                               double window_start, double window_end);

  const VectorXcd& envelope() const { return envelope_; }
  double energy_pj() const { return energy_pj_; }
  double window_start() const { return window_start_; }
  double window_end() const { return window_end_; }

  // Same envelope multiplied by exp(i domega t): carrier reassignment for
  // frequency-shifted readout.
  ControlPulse frequency_shifted(const TimeGrid& grid, double delta_omega) const;

 private:
  ControlPulse() = default;
  VectorXcd envelope_;
  double energy_pj_ = 0.0;
  double window_start_ = 0.0;
  double window_end_ = 0.0;
};

struct EomResult {
  VectorXcd retrieved;    // field emitted during the read-out window
  VectorXcd transmitted;  // field leaking through during read-in (diagnostic)
  VectorXcd spin_wave;    // coherence profile after read-out
  int split_index = 0;
};

EomResult solve_eom(const BufferConfig& config, const TimeGrid& grid,
                    const ControlPulse& read_in, const ControlPulse& read_out,
                    const VectorXcd& s_in);

// Linear map from input to retrieved envelopes, with its quadrature-aware SVD.
class GreenOperator {
 public:
  GreenOperator(MatrixXcd kernel, TimeGrid grid, BufferConfig config);

  const TimeGrid& grid() const { return grid_; }
  const BufferConfig& config() const { return config_; }
  // Continuum kernel G(t_i, t_j); apply() folds the quadrature in.
  const MatrixXcd& kernel() const { return kernel_; }

  VectorXcd apply(const VectorXcd& s_in) const;

  const VectorXd& singular_values() const { return sigma_; }
  // Quadrature-orthonormal accepted input modes u_k / released output modes.
  const MatrixXcd& input_modes() const { return input_modes_; }
  const MatrixXcd& output_modes() const { return output_modes_; }

  void save(const std::string& path) const;
  static GreenOperator load(const std::string& path);

  // Slice-coordinate matrix W^(1/2) G W^(1/2); the representation in which
  // passivity and the SVD are Euclidean.
  const MatrixXcd& slice_matrix() const { return slice_matrix_; }

 private:
  TimeGrid grid_;
  BufferConfig config_;
  MatrixXcd kernel_;
  MatrixXcd slice_matrix_;
  VectorXd sigma_;
  MatrixXcd input_modes_;
  MatrixXcd output_modes_;
};

GreenOperator green_function(const BufferConfig& config, const TimeGrid& grid,
                             const ControlPulse& read_in,
                             const ControlPulse& read_out);
GreenOperator green_function_serial(const BufferConfig& config,
                                    const TimeGrid& grid,
                                    const ControlPulse& read_in,
                                    const ControlPulse& read_out);

// rho_out = G rho_in Gdag / W with W = Tr[G rho_in Gdag]; W is the
// brightness ratio of the buffered photon.
std::pair<ModeState, double> buffer_output_state(const GreenOperator& g,
                                                 const ModeState& rho_in);

// Total efficiency |s_out|^2 / |s_in|^2 over a grid of pulse energies; the
// pulse shapes are taken from the two template pulses. The output is counted
// inside a detection gate of half-width gate_half_ns around the read-out
// pulse center (gate <= 0 counts everything): light recaptured during
// retrieval exits late and misses the gate, which is what rolls the measured
// efficiency over at strong read-out drive.
Eigen::MatrixXd efficiency_surface(const BufferConfig& config,
                                   const TimeGrid& grid,
                                   const ControlPulse& read_in_template,
                                   const ControlPulse& read_out_template,
                                   const std::vector<double>& read_in_energies,
                                   const std::vector<double>& read_out_energies,
                                   const VectorXcd& probe,
                                   double gate_half_ns = 0.0);
Eigen::MatrixXd efficiency_surface_serial(
    const BufferConfig& config, const TimeGrid& grid,
    const ControlPulse& read_in_template, const ControlPulse& read_out_template,
    const std::vector<double>& read_in_energies,
    const std::vector<double>& read_out_energies, const VectorXcd& probe,
    double gate_half_ns = 0.0);

// Rebuild a Gaussian-family pulse with a new energy, keeping its shape.
ControlPulse with_energy(const ControlPulse& pulse, const TimeGrid& grid,
                         const BufferConfig& config, double energy_pj);

// Green operator with the read-out carrier detuned by delta_omega; output
// modes pick up the corresponding carrier shift at unchanged efficiency.
GreenOperator shifted_readout(const BufferConfig& config, const TimeGrid& grid,
                              const ControlPulse& read_in,
                              const ControlPulse& read_out, double delta_omega);

double total_efficiency(const TimeGrid& grid, const VectorXcd& s_in,
                        const VectorXcd& s_out);

// Retrieved responses for a batch of slice-coordinate inputs (one per
// column); equals G_hat * inputs column by column. Columns run in parallel
// and the result is bit-identical to the serial order.
MatrixXcd propagate_slices(const BufferConfig& config, const TimeGrid& grid,
                           const ControlPulse& read_in,
                           const ControlPulse& read_out,
                           const MatrixXcd& inputs, bool parallel = true);

// Norm^2 of the stored coherence after the read-in stage for a continuum
// input envelope; the read-in selectivity metric.
double storage_efficiency(const BufferConfig& config, const TimeGrid& grid,
                          const ControlPulse& read_in, const VectorXcd& s_in);

}  // namespace qbuffer

#endif
