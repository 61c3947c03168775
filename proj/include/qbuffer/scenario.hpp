#ifndef QBUFFER_SCENARIO_HPP
#define QBUFFER_SCENARIO_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qbuffer/buffer.hpp"
#include "qbuffer/emitters.hpp"
#include "qbuffer/filters.hpp"
#include "qbuffer/optimize.hpp"

namespace qbuffer {

extern const char* const kVersion;

enum class ScenarioKind { single_run, efficiency_surface, tradeoff_sweep, unification };

struct PulseSettings {
  double center = 0.0;
  double fwhm = 1.0;
  double chirp = 0.0;
  double energy_pj = 0.0;
};

struct SurfaceSettings {
  std::vector<double> read_in_energies;
  std::vector<double> read_out_energies;
  double gate_half_ns = 1.0;
  double probe_center = 1.5;
  double probe_fwhm = 1.0;
};

struct PassbandSettings {
  PassbandShape shape = PassbandShape::lorentzian;
  double center_min = -12.0;
  double center_max = 12.0;
  int n_centers = 64;
  double width_min = 0.1;
  double width_max = 28.0;
  int n_widths = 65;

  PassbandFamily family() const;
};

struct OptimizationSettings {
  ControlBasis basis = ControlBasis::gaussian_with_chirp;
  int knots = 6;
  int budget = 300;
  std::uint64_t seed = 5;
  double purity_floor = 0.95;
  double brightness_floor = 0.15;
};

// Fully resolved execution plan: parsed, validated, defaults filled. The
// canonical JSON form is what gets hashed and echoed to the output directory.
struct Scenario {
  ScenarioKind kind = ScenarioKind::single_run;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  int threads = 0;  // 0: leave the OpenMP default alone
  TimeGrid grid{256, 0.0, 16.0};
  int quadrature_points = 9;

  BufferConfig buffer;
  PulseSettings read_in;
  PulseSettings read_out;

  EmitterSpec emitter;                       // single-run
  std::optional<double> tune_purity_to;      // single-run: adjust jitter scale
  SurfaceSettings surface;                   // efficiency-surface
  EnsembleSpec ensemble;                     // tradeoff-sweep
  int envelope_count = 24;                   // tradeoff-sweep
  PassbandSettings passbands;                // tradeoff-sweep / single-run
  OptimizationSettings optimization;
  EmitterSpec emitter_a, emitter_b;          // unification
  std::optional<double> tune_i2_to;          // unification: decay-time tuning

  nlohmann::json canonical;  // defaults filled, sorted keys
  std::uint64_t hash = 0;    // over the canonical form minus out_dir/threads
};

Scenario load_config(const std::string& path);
Scenario parse_config(const nlohmann::json& raw);

struct RunRecord {
  std::uint64_t scenario_hash = 0;
  std::string version;
  std::uint64_t seed = 0;
  double wall_ms = 0.0;
  std::vector<std::string> files;                 // emitted, relative to out_dir
  std::map<std::string, std::string> tables;      // name -> csv body
  nlohmann::json parameters;                      // resolved inputs for re-derivation
};

RunRecord run_scenario(const Scenario& scenario);

// Plot-ready per-figure CSVs plus a manifest; returns the file list.
std::vector<std::string> emit_plotdata(const RunRecord& record,
                                       const std::string& out_dir);

std::uint64_t fnv1a64(const std::string& text);

}  // namespace qbuffer

#endif
