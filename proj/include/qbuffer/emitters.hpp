#ifndef QBUFFER_EMITTERS_HPP
#define QBUFFER_EMITTERS_HPP

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "qbuffer/mode_state.hpp"

namespace qbuffer {

enum class JitterKind { none, gaussian, exponential };

// Parameters of one noisy single-photon source.
struct EmitterSpec {
  double gamma = 1.0;        // radiative decay rate, 1/ns
  double gamma_star = 0.0;   // pure-dephasing rate, 1/ns
  double sigma_diff = 0.0;   // spectral-diffusion rms width, rad/ns
  JitterKind jitter_kind = JitterKind::none;
  double jitter_scale = 0.0; // ns
  double omega0 = 0.0;       // carrier offset from grid center, rad/ns
  double b0 = 1.0;           // initial brightness

  void validate() const;
};

// First-order coherence of a Markovian two-level emitter,
//   rho(t1, t2) ~ exp(-Gamma (t1+t2)/2) exp(-gamma* |t1-t2|) exp(i w0 (t1-t2)),
// whose purity converges to Gamma / (Gamma + 2 gamma*).
ModeState dephasing_kernel(const EmitterSpec& spec, const TimeGrid& grid);

// One node of the inhomogeneous average: kernel shifted by t0 and carrier
// shifted to omega0, entering the mixture with the given weight.
struct InhomogeneousNode {
  double t0 = 0.0;
  double omega0 = 0.0;
  double weight = 1.0;
};

ModeState mix_kernel_nodes(const EmitterSpec& spec, const TimeGrid& grid,
                           std::span<const InhomogeneousNode> nodes);

// Convex average of the dephasing kernel over a deterministic quadrature of
// the timing-jitter and spectral-diffusion distributions.
ModeState apply_inhomogeneous(const EmitterSpec& spec, const TimeGrid& grid,
                              int quadrature_points);

struct EnsembleSpec {
  int count = 1;
  std::uint64_t seed = 0;
  EmitterSpec lo;  // per-field lower bounds
  EmitterSpec hi;  // per-field upper bounds (jitter_kind taken from lo)
  int quadrature_points = 7;

  void validate() const;
};

EmitterSpec draw_emitter(const EnsembleSpec& spec, int index);

// Deterministic given the seed; members are built in parallel and are
// bit-identical to the serial reference.
std::vector<std::pair<EmitterSpec, ModeState>> sample_ensemble(
    const EnsembleSpec& spec, const TimeGrid& grid);
std::vector<std::pair<EmitterSpec, ModeState>> sample_ensemble_serial(
    const EnsembleSpec& spec, const TimeGrid& grid);

}  // namespace qbuffer

#endif
