#ifndef QBUFFER_OPTIMIZE_HPP
#define QBUFFER_OPTIMIZE_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "qbuffer/buffer.hpp"
#include "qbuffer/mode_state.hpp"

namespace qbuffer {

enum class ObjectiveKind { brightness_at_purity_floor, mode_overlap, unification };
enum class ControlBasis { gaussian_with_chirp, piecewise_knots };

struct PulseNominal {
  double center = 0.0;  // ns
  double fwhm = 1.0;    // ns
  double chirp = 0.0;   // rad/ns^2
  double energy = 0.0;  // pJ
};

struct OptimizationProblem {
  ObjectiveKind objective = ObjectiveKind::brightness_at_purity_floor;
  ControlBasis basis = ControlBasis::gaussian_with_chirp;
  int knot_count = 6;
  int budget = 400;
  std::uint64_t seed = 1;
  double purity_floor = 0.95;
  double brightness_floor = 0.15;
  double penalty_weight = 1e3;
  PulseNominal read_in_nominal;
  PulseNominal read_out_nominal;
  // Per-parameter box; empty vectors select the defaults derived from the
  // nominal pulses.
  VectorXd lower;
  VectorXd upper;

  int pulse_dim() const {
    return basis == ControlBasis::gaussian_with_chirp ? 4 : 3 + knot_count;
  }
  void validate() const;
};

struct TraceEntry {
  int iteration = 0;
  double objective = 0.0;
};

struct FilterReport {
  double b_ratio = 0.0;  // B / B0
  double i1 = 0.0;
  std::optional<double> i2;
  std::vector<double> mode_weights;  // xi_k alpha_k / W, descending
};

struct BufferControls {
  ControlPulse read_in;
  ControlPulse read_out;
};

struct OptimizationResult {
  std::vector<BufferControls> controls;  // one entry per buffer
  std::vector<FilterReport> reports;     // matching controls
  std::optional<double> i2;
  double best_objective = 0.0;
  VectorXd best_params;
  std::vector<TraceEntry> trace;
  bool converged = false;
};

// Analytic reference of a perfect coherent filter: keeps the dominant
// eigenmode (or the given target mode) with unit efficiency.
std::pair<ModeState, double> ideal_buffer_filter(
    const ModeState& rho_in, const VectorXcd* target_mode = nullptr);

OptimizationResult optimize_single(const OptimizationProblem& problem,
                                   const BufferConfig& config,
                                   const ModeState& rho_in);

// Read-in pulses are first fixed to select each emitter's dominant mode;
// both read-out pulses are then co-optimized to maximize the overlap of the
// two outputs above a brightness floor.
OptimizationResult optimize_unification(const OptimizationProblem& problem,
                                        const BufferConfig& config_a,
                                        const BufferConfig& config_b,
                                        const ModeState& rho_a,
                                        const ModeState& rho_b);

// Derivative-free simplex search with seeded restarts. The evaluation
// sequence does not depend on the budget, so enlarging the budget can only
// improve the best value. Maximizes f.
struct SimplexOptions {
  int budget = 200;
  std::uint64_t seed = 1;
  bool mirror_blocks = false;  // restart draws symmetric under block swap
};

struct SimplexResult {
  VectorXd best_x;
  double best_f = 0.0;
  std::vector<TraceEntry> trace;
  bool converged = false;
  int evaluations = 0;
};

SimplexResult simplex_maximize(const std::function<double(const VectorXd&)>& f,
                               const VectorXd& lower, const VectorXd& upper,
                               const VectorXd& start, const SimplexOptions& options);

// Pulse pair encoded in a parameter vector (read-in block, read-out block).
std::pair<ControlPulse, ControlPulse> build_pulse_pair(
    const OptimizationProblem& problem, const BufferConfig& config,
    const TimeGrid& grid, const VectorXd& params);

VectorXd nominal_params(const OptimizationProblem& problem);
std::pair<VectorXd, VectorXd> default_bounds(const OptimizationProblem& problem,
                                             const TimeGrid& grid);

}  // namespace qbuffer

#endif
