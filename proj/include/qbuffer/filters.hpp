#ifndef QBUFFER_FILTERS_HPP
#define QBUFFER_FILTERS_HPP

#include <utility>
#include <vector>

#include "qbuffer/mode_state.hpp"

namespace qbuffer {

enum class PassbandShape { lorentzian, gaussian, rectangular };

// Time-stationary spectral filter. The amplitude transfer function is
// bounded by one; width is the FWHM of the intensity response |f|^2.
struct PassbandSpec {
  PassbandShape shape = PassbandShape::lorentzian;
  double center = 0.0;  // rad/ns
  double width = 1.0;   // rad/ns

  void validate() const;
  Complex transfer(double omega) const;
};

// rho' = F rho F^dag / b with F = diag f(omega); b is the brightness
// multiplier Tr[F rho F^dag].
std::pair<ModeState, double> apply_passband(const ModeState& state,
                                            const PassbandSpec& band);

// Rectangular time gate; the optional second baseline family.
std::pair<ModeState, double> apply_time_gate(const ModeState& state,
                                             double t_open, double t_close);

struct SweepPoint {
  int center_index = 0;
  int width_index = 0;
  double center = 0.0;
  double width = 0.0;  // +inf marks the all-pass reference point
  double b_mult = 1.0;
  double purity = 1.0;
  bool pareto = false;
};

struct PassbandFamily {
  PassbandShape shape = PassbandShape::lorentzian;
  std::vector<double> centers;  // rad/ns
  std::vector<double> widths;   // rad/ns, positive
};

// Geometric width ladder and linear center ladder used by default sweeps.
PassbandFamily default_family(PassbandShape shape, double center_lo,
                              double center_hi, int n_centers, double width_lo,
                              double width_hi, int n_widths);

// Every (center, width) combination evaluated on one state; an exact
// all-pass sentinel is appended so the no-filter point is always available.
std::vector<SweepPoint> sweep_passbands(const ModeState& state,
                                        const PassbandFamily& family);
std::vector<SweepPoint> sweep_passbands_serial(const ModeState& state,
                                               const PassbandFamily& family);

// Pareto-maximal subset under (b_mult, purity), sorted by descending
// brightness; flags are also set on the input points.
std::vector<SweepPoint> pareto_frontier(std::vector<SweepPoint>& points);

struct StateFrontier {
  int state_id = 0;
  double input_purity = 1.0;
  std::vector<SweepPoint> sweep;     // full sweep with pareto flags
  std::vector<SweepPoint> frontier;  // Pareto subset
};

// Per-state frontiers plus the envelope across all states (the Pareto
// frontier of the union of per-state frontiers).
struct FilterEnvelope {
  std::vector<StateFrontier> per_state;
  std::vector<SweepPoint> envelope;
};

FilterEnvelope filter_envelope(const std::vector<ModeState>& states,
                               const PassbandFamily& family);

}  // namespace qbuffer

#endif
