#include "qbuffer/scenario.hpp"

#include <omp.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "qbuffer/csv.hpp"
#include "qbuffer/rng.hpp"

namespace qbuffer {

const char* const kVersion = "1.0.0";

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

using nlohmann::json;

[[noreturn]] void fail_field(const std::string& path, const std::string& what) {
  throw std::invalid_argument("validation-error: " + path + ": " + what);
}

double get_number(const json& j, const std::string& path, const std::string& key,
                  double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) fail_field(path + "." + key, "expected a number");
  return j.at(key).get<double>();
}

int get_int(const json& j, const std::string& path, const std::string& key,
            int fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number_integer())
    fail_field(path + "." + key, "expected an integer");
  return j.at(key).get<int>();
}

std::uint64_t get_u64(const json& j, const std::string& path,
                      const std::string& key, std::uint64_t fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number_unsigned() && !j.at(key).is_number_integer())
    fail_field(path + "." + key, "expected an integer");
  return j.at(key).get<std::uint64_t>();
}

bool get_bool(const json& j, const std::string& path, const std::string& key,
              bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_boolean()) fail_field(path + "." + key, "expected a boolean");
  return j.at(key).get<bool>();
}

std::string get_string(const json& j, const std::string& path,
                       const std::string& key, const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_string()) fail_field(path + "." + key, "expected a string");
  return j.at(key).get<std::string>();
}

JitterKind jitter_from_string(const std::string& s, const std::string& path) {
  if (s == "none") return JitterKind::none;
  if (s == "gaussian") return JitterKind::gaussian;
  if (s == "exponential") return JitterKind::exponential;
  fail_field(path, "unknown jitter kind '" + s + "'");
}

std::string jitter_to_string(JitterKind k) {
  switch (k) {
    case JitterKind::none: return "none";
    case JitterKind::gaussian: return "gaussian";
    case JitterKind::exponential: return "exponential";
  }
  return "none";
}

PassbandShape shape_from_string(const std::string& s, const std::string& path) {
  if (s == "lorentzian") return PassbandShape::lorentzian;
  if (s == "gaussian") return PassbandShape::gaussian;
  if (s == "rectangular") return PassbandShape::rectangular;
  fail_field(path, "unknown passband shape '" + s + "'");
}

std::string shape_to_string(PassbandShape s) {
  switch (s) {
    case PassbandShape::lorentzian: return "lorentzian";
    case PassbandShape::gaussian: return "gaussian";
    case PassbandShape::rectangular: return "rectangular";
  }
  return "lorentzian";
}

EmitterSpec parse_emitter(const json& j, const std::string& path) {
  EmitterSpec e;
  e.gamma = get_number(j, path, "gamma", 2.0);
  e.gamma_star = get_number(j, path, "gamma_star", 0.0);
  e.sigma_diff = get_number(j, path, "sigma_diff", 0.0);
  e.jitter_kind = jitter_from_string(
      get_string(j, path, "jitter_kind", "none"), path + ".jitter_kind");
  e.jitter_scale = get_number(j, path, "jitter_scale", 0.0);
  e.omega0 = get_number(j, path, "omega0", 0.0);
  e.b0 = get_number(j, path, "b0", 1.0);
  try {
    e.validate();
  } catch (const std::invalid_argument& err) {
    fail_field(path, err.what());
  }
  return e;
}

json emitter_to_json(const EmitterSpec& e) {
  return json{{"gamma", e.gamma},
              {"gamma_star", e.gamma_star},
              {"sigma_diff", e.sigma_diff},
              {"jitter_kind", jitter_to_string(e.jitter_kind)},
              {"jitter_scale", e.jitter_scale},
              {"omega0", e.omega0},
              {"b0", e.b0}};
}

PulseSettings parse_pulse(const json& j, const std::string& path,
                          const PulseSettings& defaults) {
  PulseSettings p;
  p.center = get_number(j, path, "center", defaults.center);
  p.fwhm = get_number(j, path, "fwhm", defaults.fwhm);
  p.chirp = get_number(j, path, "chirp", defaults.chirp);
  p.energy_pj = get_number(j, path, "energy_pj", defaults.energy_pj);
  if (!(p.fwhm > 0.0)) fail_field(path + ".fwhm", "must be > 0");
  if (p.energy_pj < 0.0) fail_field(path + ".energy_pj", "must be >= 0");
  return p;
}

json pulse_to_json(const PulseSettings& p) {
  return json{{"center", p.center},
              {"fwhm", p.fwhm},
              {"chirp", p.chirp},
              {"energy_pj", p.energy_pj}};
}

std::vector<double> parse_energies(const json& j, const std::string& path) {
  std::vector<double> out;
  if (j.is_array()) {
    for (const auto& v : j) {
      if (!v.is_number()) fail_field(path, "expected numbers");
      out.push_back(v.get<double>());
    }
  } else if (j.is_object()) {
    const double lo = get_number(j, path, "min", 0.0);
    const double hi = get_number(j, path, "max", 0.0);
    const int count = get_int(j, path, "count", 2);
    if (count < 1) fail_field(path + ".count", "must be >= 1");
    if (hi < lo) fail_field(path, "max must be >= min");
    for (int i = 0; i < count; ++i)
      out.push_back(count == 1 ? lo : lo + (hi - lo) * i / (count - 1.0));
  } else {
    fail_field(path, "expected an array or {min, max, count}");
  }
  for (double e : out)
    if (e < 0.0) fail_field(path, "energies must be >= 0");
  if (out.empty()) fail_field(path, "must not be empty");
  return out;
}

ScenarioKind kind_from_string(const std::string& s) {
  if (s == "single-run") return ScenarioKind::single_run;
  if (s == "efficiency-surface") return ScenarioKind::efficiency_surface;
  if (s == "tradeoff-sweep") return ScenarioKind::tradeoff_sweep;
  if (s == "unification") return ScenarioKind::unification;
  fail_field("kind", "unknown scenario kind '" + s + "'");
}

std::string kind_to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::single_run: return "single-run";
    case ScenarioKind::efficiency_surface: return "efficiency-surface";
    case ScenarioKind::tradeoff_sweep: return "tradeoff-sweep";
    case ScenarioKind::unification: return "unification";
  }
  return "single-run";
}

}  // namespace

PassbandFamily PassbandSettings::family() const {
  return default_family(shape, center_min, center_max, n_centers, width_min,
                        width_max, n_widths);
}

Scenario parse_config(const json& raw) {
  if (!raw.is_object()) fail_field("config", "expected an object");
  Scenario s;
  s.kind = kind_from_string(get_string(raw, "config", "kind", "single-run"));
  s.seed = get_u64(raw, "config", "seed", 1);
  s.out_dir = get_string(raw, "config", "out_dir", "out");
  s.threads = get_int(raw, "config", "threads", 0);
  if (s.threads < 0) fail_field("threads", "must be >= 0");

  const json grid = raw.value("grid", json::object());
  s.grid.n_points = get_int(grid, "grid", "n_points", 256);
  s.grid.t_start = get_number(grid, "grid", "t_start", 0.0);
  s.grid.t_end = get_number(grid, "grid", "t_end", 16.0);
  if (s.grid.n_points < 2) fail_field("grid.n_points", "must be >= 2");
  if (!(s.grid.t_end > s.grid.t_start)) fail_field("grid.t_end", "must exceed t_start");

  s.quadrature_points = get_int(raw, "config", "quadrature_points", 9);
  if (s.quadrature_points < 1) fail_field("quadrature_points", "must be >= 1");

  const json buf = raw.value("buffer", json::object());
  s.buffer.coupling_d = get_number(buf, "buffer", "coupling_d", 40.0);
  s.buffer.delta = get_number(buf, "buffer", "delta", 47.1238898038469);
  s.buffer.gamma_b = get_number(buf, "buffer", "gamma_b", 0.0);
  s.buffer.n_z = get_int(buf, "buffer", "n_z", 24);
  s.buffer.t_buff = get_number(buf, "buffer", "t_buff", 5.5);
  s.buffer.rabi_calibration = get_number(buf, "buffer", "rabi_calibration", 1.0);
  s.buffer.include_stark = get_bool(buf, "buffer", "include_stark", true);
  try {
    s.buffer.validate();
  } catch (const std::invalid_argument& err) {
    fail_field("buffer", err.what());
  }

  s.read_in = parse_pulse(raw.value("read_in", json::object()), "read_in",
                          PulseSettings{0.8, 0.8, 0.0, 300.0});
  s.read_out = parse_pulse(raw.value("read_out", json::object()), "read_out",
                           PulseSettings{0.8 + s.buffer.t_buff, 0.8, 0.0, 2000.0});

  s.emitter = parse_emitter(raw.value("emitter", json::object()), "emitter");
  if (raw.contains("tune_purity_to")) {
    const double target = get_number(raw, "config", "tune_purity_to", 0.7);
    if (!(target > 0.0) || target >= 1.0)
      fail_field("tune_purity_to", "must lie in (0, 1)");
    s.tune_purity_to = target;
  }

  const json surf = raw.value("surface", json::object());
  s.surface.read_in_energies =
      surf.contains("read_in_energies")
          ? parse_energies(surf.at("read_in_energies"), "surface.read_in_energies")
          : std::vector<double>{700.0, 1310.0};
  s.surface.read_out_energies =
      surf.contains("read_out_energies")
          ? parse_energies(surf.at("read_out_energies"), "surface.read_out_energies")
          : parse_energies(json{{"min", 0.0}, {"max", 24000.0}, {"count", 25}},
                           "surface.read_out_energies");
  s.surface.gate_half_ns = get_number(surf, "surface", "gate_half_ns", 1.0);
  s.surface.probe_center = get_number(surf, "surface", "probe_center", 1.5);
  s.surface.probe_fwhm = get_number(surf, "surface", "probe_fwhm", 1.0);
  if (!(s.surface.probe_fwhm > 0.0)) fail_field("surface.probe_fwhm", "must be > 0");

  const json ens = raw.value("ensemble", json::object());
  s.ensemble.count = get_int(ens, "ensemble", "count", 16);
  s.ensemble.seed = get_u64(ens, "ensemble", "seed", s.seed);
  s.ensemble.quadrature_points = s.quadrature_points;
  const json ranges = ens.value("ranges", json::object());
  auto range = [&](const char* key, double lo_def, double hi_def,
                   double* lo_out, double* hi_out) {
    const std::string path = std::string("ensemble.ranges.") + key;
    if (!ranges.contains(key)) {
      *lo_out = lo_def;
      *hi_out = hi_def;
      return;
    }
    const json& r = ranges.at(key);
    if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number())
      fail_field(path, "expected [min, max]");
    *lo_out = r[0].get<double>();
    *hi_out = r[1].get<double>();
    if (*hi_out < *lo_out) fail_field(path, "max must be >= min");
  };
  range("gamma", 2.0, 2.0, &s.ensemble.lo.gamma, &s.ensemble.hi.gamma);
  range("gamma_star", 0.0, 2.0, &s.ensemble.lo.gamma_star, &s.ensemble.hi.gamma_star);
  range("sigma_diff", 0.0, 4.0, &s.ensemble.lo.sigma_diff, &s.ensemble.hi.sigma_diff);
  range("jitter_scale", 0.0, 1.0, &s.ensemble.lo.jitter_scale,
        &s.ensemble.hi.jitter_scale);
  range("omega0", 0.0, 0.0, &s.ensemble.lo.omega0, &s.ensemble.hi.omega0);
  range("b0", 0.72, 0.72, &s.ensemble.lo.b0, &s.ensemble.hi.b0);
  s.ensemble.lo.jitter_kind = s.ensemble.hi.jitter_kind = jitter_from_string(
      get_string(ens, "ensemble", "jitter_kind", "exponential"),
      "ensemble.jitter_kind");
  try {
    s.ensemble.validate();
  } catch (const std::invalid_argument& err) {
    fail_field("ensemble", err.what());
  }

  s.envelope_count = get_int(raw, "config", "envelope_count", 24);
  if (s.envelope_count < 1) fail_field("envelope_count", "must be >= 1");

  const json pb = raw.value("passbands", json::object());
  s.passbands.shape = shape_from_string(
      get_string(pb, "passbands", "shape", "lorentzian"), "passbands.shape");
  s.passbands.center_min = get_number(pb, "passbands", "center_min", -12.0);
  s.passbands.center_max = get_number(pb, "passbands", "center_max", 12.0);
  s.passbands.n_centers = get_int(pb, "passbands", "n_centers", 64);
  s.passbands.width_min = get_number(pb, "passbands", "width_min", 0.1);
  s.passbands.width_max = get_number(pb, "passbands", "width_max", 28.0);
  s.passbands.n_widths = get_int(pb, "passbands", "n_widths", 65);
  if (!(s.passbands.width_min > 0.0)) fail_field("PassbandSpec.width", "must be > 0");
  if (s.passbands.width_max < s.passbands.width_min)
    fail_field("passbands.width_max", "must be >= width_min");
  if (s.passbands.n_centers < 1) fail_field("passbands.n_centers", "must be >= 1");
  if (s.passbands.n_widths < 1) fail_field("passbands.n_widths", "must be >= 1");

  const json opt = raw.value("optimization", json::object());
  const std::string basis =
      get_string(opt, "optimization", "basis", "gaussian-with-chirp");
  if (basis == "gaussian-with-chirp")
    s.optimization.basis = ControlBasis::gaussian_with_chirp;
  else if (basis == "piecewise-knots")
    s.optimization.basis = ControlBasis::piecewise_knots;
  else
    fail_field("optimization.basis", "unknown basis '" + basis + "'");
  s.optimization.knots = get_int(opt, "optimization", "knots", 6);
  s.optimization.budget = get_int(opt, "optimization", "budget", 300);
  s.optimization.seed = get_u64(opt, "optimization", "seed", 5);
  s.optimization.purity_floor = get_number(opt, "optimization", "purity_floor", 0.95);
  s.optimization.brightness_floor =
      get_number(opt, "optimization", "brightness_floor", 0.15);
  if (s.optimization.knots < 1) fail_field("optimization.knots", "must be >= 1");
  if (s.optimization.budget < 1) fail_field("optimization.budget", "must be >= 1");
  if (s.optimization.purity_floor < 0.0 || s.optimization.purity_floor > 1.0)
    fail_field("optimization.purity_floor", "must lie in [0, 1]");

  s.emitter_a = parse_emitter(raw.value("emitter_a", json::object()), "emitter_a");
  s.emitter_b = parse_emitter(raw.value("emitter_b", json::object()), "emitter_b");
  if (raw.contains("tune_i2_to")) {
    const double target = get_number(raw, "config", "tune_i2_to", 0.62);
    if (!(target > 0.0) || target >= 1.0) fail_field("tune_i2_to", "must lie in (0, 1)");
    s.tune_i2_to = target;
  }

  // canonical echo with every default made explicit
  json canon;
  canon["kind"] = kind_to_string(s.kind);
  canon["seed"] = s.seed;
  canon["out_dir"] = s.out_dir;
  canon["threads"] = s.threads;
  canon["grid"] = json{{"n_points", s.grid.n_points},
                       {"t_start", s.grid.t_start},
                       {"t_end", s.grid.t_end}};
  canon["quadrature_points"] = s.quadrature_points;
  canon["buffer"] = json{{"coupling_d", s.buffer.coupling_d},
                         {"delta", s.buffer.delta},
                         {"gamma_b", s.buffer.gamma_b},
                         {"n_z", s.buffer.n_z},
                         {"t_buff", s.buffer.t_buff},
                         {"rabi_calibration", s.buffer.rabi_calibration},
                         {"include_stark", s.buffer.include_stark}};
  canon["read_in"] = pulse_to_json(s.read_in);
  canon["read_out"] = pulse_to_json(s.read_out);
  canon["emitter"] = emitter_to_json(s.emitter);
  if (s.tune_purity_to) canon["tune_purity_to"] = *s.tune_purity_to;
  canon["surface"] = json{{"read_in_energies", s.surface.read_in_energies},
                          {"read_out_energies", s.surface.read_out_energies},
                          {"gate_half_ns", s.surface.gate_half_ns},
                          {"probe_center", s.surface.probe_center},
                          {"probe_fwhm", s.surface.probe_fwhm}};
  canon["ensemble"] =
      json{{"count", s.ensemble.count},
           {"seed", s.ensemble.seed},
           {"jitter_kind", jitter_to_string(s.ensemble.lo.jitter_kind)},
           {"ranges",
            json{{"gamma", {s.ensemble.lo.gamma, s.ensemble.hi.gamma}},
                 {"gamma_star", {s.ensemble.lo.gamma_star, s.ensemble.hi.gamma_star}},
                 {"sigma_diff", {s.ensemble.lo.sigma_diff, s.ensemble.hi.sigma_diff}},
                 {"jitter_scale",
                  {s.ensemble.lo.jitter_scale, s.ensemble.hi.jitter_scale}},
                 {"omega0", {s.ensemble.lo.omega0, s.ensemble.hi.omega0}},
                 {"b0", {s.ensemble.lo.b0, s.ensemble.hi.b0}}}}};
  canon["envelope_count"] = s.envelope_count;
  canon["passbands"] = json{{"shape", shape_to_string(s.passbands.shape)},
                            {"center_min", s.passbands.center_min},
                            {"center_max", s.passbands.center_max},
                            {"n_centers", s.passbands.n_centers},
                            {"width_min", s.passbands.width_min},
                            {"width_max", s.passbands.width_max},
                            {"n_widths", s.passbands.n_widths}};
  canon["optimization"] =
      json{{"basis", s.optimization.basis == ControlBasis::gaussian_with_chirp
                         ? "gaussian-with-chirp"
                         : "piecewise-knots"},
           {"knots", s.optimization.knots},
           {"budget", s.optimization.budget},
           {"seed", s.optimization.seed},
           {"purity_floor", s.optimization.purity_floor},
           {"brightness_floor", s.optimization.brightness_floor}};
  canon["emitter_a"] = emitter_to_json(s.emitter_a);
  canon["emitter_b"] = emitter_to_json(s.emitter_b);
  if (s.tune_i2_to) canon["tune_i2_to"] = *s.tune_i2_to;

  s.canonical = canon;
  json hashed = canon;
  hashed.erase("out_dir");
  hashed.erase("threads");
  s.hash = fnv1a64(hashed.dump(2));
  return s;
}

Scenario load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("io-error: cannot open config " + path);
  json raw;
  try {
    raw = json::parse(is, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& err) {
    throw std::invalid_argument(std::string("parse-error: ") + err.what());
  }
  return parse_config(raw);
}

// ---------------------------------------------------------------------------
// Scenario execution
// ---------------------------------------------------------------------------

namespace {

ControlPulse make_pulse(const Scenario& s, const PulseSettings& p) {
  return ControlPulse::gaussian(s.grid, s.buffer, p.center, p.fwhm, p.energy_pj,
                                p.chirp);
}

OptimizationProblem make_problem(const Scenario& s, ObjectiveKind kind,
                                 std::uint64_t seed) {
  OptimizationProblem problem;
  problem.objective = kind;
  problem.basis = s.optimization.basis;
  problem.knot_count = s.optimization.knots;
  problem.budget = s.optimization.budget;
  problem.seed = seed;
  problem.purity_floor = s.optimization.purity_floor;
  problem.brightness_floor = s.optimization.brightness_floor;
  problem.read_in_nominal = PulseNominal{s.read_in.center, s.read_in.fwhm,
                                         s.read_in.chirp, s.read_in.energy_pj};
  problem.read_out_nominal = PulseNominal{s.read_out.center, s.read_out.fwhm,
                                          s.read_out.chirp, s.read_out.energy_pj};
  return problem;
}

// Bisect the timing-jitter scale until the state purity hits the target.
double tune_jitter_scale(EmitterSpec spec, const TimeGrid& grid, int q,
                         double target) {
  if (spec.jitter_kind == JitterKind::none)
    throw std::invalid_argument(
        "validation-error: tune_purity_to: emitter has no jitter to tune");
  double lo = 1e-4 / spec.gamma, hi = 4.0 / spec.gamma;
  for (int it = 0; it < 48; ++it) {
    spec.jitter_scale = 0.5 * (lo + hi);
    const double purity =
        self_indistinguishability(apply_inhomogeneous(spec, grid, q));
    (purity > target ? lo : hi) = spec.jitter_scale;
  }
  return 0.5 * (lo + hi);
}

// Bisect the partner's decay rate until the mutual overlap hits the target.
double tune_partner_gamma(const ModeState& rho_a, EmitterSpec b,
                          const TimeGrid& grid, int q, double target) {
  double lo = b.gamma * 1.0001, hi = b.gamma * 30.0;
  for (int it = 0; it < 48; ++it) {
    b.gamma = 0.5 * (lo + hi);
    const double i2 =
        inter_indistinguishability(rho_a, apply_inhomogeneous(b, grid, q));
    (i2 > target ? lo : hi) = b.gamma;
  }
  return 0.5 * (lo + hi);
}

void append_mode_rows(CsvTable& table, int source_id, const std::string& stage,
                      const ModeState& state) {
  const ModeDecomposition dec = eigendecompose(state);
  const double schmidt = dec.schmidt_number();
  for (int k = 0; k < 5 && k < dec.weights.size(); ++k)
    table.cell(source_id).cell(stage).cell(k).cell(dec.weights[k]).cell(schmidt)
        .end_row();
}

struct MethodPoint {
  std::string method;
  double b_ratio = 0.0;
  double i1 = 0.0;
};

// Strongest intensity-filter competitor: the frontier point of highest
// brightness whose purity still reaches the reference purity.
MethodPoint intensity_competitor(const std::vector<SweepPoint>& frontier,
                                 double reference_purity) {
  MethodPoint pt;
  pt.method = "intensity";
  const SweepPoint* chosen = nullptr;
  for (const auto& f : frontier)
    if (f.purity >= reference_purity - 1e-12 &&
        (!chosen || f.b_mult > chosen->b_mult))
      chosen = &f;
  if (!chosen)  // target purity unreachable: report the purest point
    for (const auto& f : frontier)
      if (!chosen || f.purity > chosen->purity) chosen = &f;
  pt.b_ratio = chosen->b_mult;
  pt.i1 = chosen->purity;
  return pt;
}

struct EmitterOutcome {
  std::vector<MethodPoint> points;
  std::vector<std::pair<std::string, ModeState>> staged_states;
  json detail;
};

EmitterOutcome evaluate_emitter(const Scenario& s, const ModeState& rho,
                                const GreenOperator& baseline_green,
                                const std::vector<SweepPoint>& frontier,
                                std::uint64_t member_seed) {
  EmitterOutcome outcome;

  auto [rho_base, w_base] = buffer_output_state(baseline_green, rho);
  const double i1_base = self_indistinguishability(rho_base);
  outcome.points.push_back(MethodPoint{"buffer-gaussian", w_base, i1_base});
  outcome.staged_states.emplace_back("buffer-gaussian", rho_base);

  const OptimizationProblem problem =
      make_problem(s, ObjectiveKind::brightness_at_purity_floor,
                   splitmix64(s.optimization.seed ^ member_seed));
  const OptimizationResult opt = optimize_single(problem, s.buffer, rho);
  outcome.points.push_back(
      MethodPoint{"buffer-optimized", opt.reports[0].b_ratio, opt.reports[0].i1});
  const GreenOperator g_opt = green_function(s.buffer, s.grid,
                                             opt.controls[0].read_in,
                                             opt.controls[0].read_out);
  outcome.staged_states.emplace_back("buffer-optimized",
                                     buffer_output_state(g_opt, rho).first);

  auto [rho_ideal, alpha0] = ideal_buffer_filter(rho);
  outcome.points.push_back(MethodPoint{"ideal", alpha0, 1.0});
  outcome.staged_states.emplace_back("ideal", rho_ideal);

  outcome.points.push_back(
      intensity_competitor(frontier, opt.reports[0].i1));

  outcome.detail = json{{"baseline", {{"b_ratio", w_base}, {"i1", i1_base}}},
                        {"optimized",
                         {{"b_ratio", opt.reports[0].b_ratio},
                          {"i1", opt.reports[0].i1},
                          {"objective", opt.best_objective},
                          {"converged", opt.converged},
                          {"evaluations", opt.trace.size()}}},
                        {"ideal_b_ratio", alpha0}};
  return outcome;
}

void write_table(RunRecord& record, const std::string& out_dir,
                 const std::string& name, const CsvTable& table) {
  const std::string body = table.str();
  record.tables[name] = body;
  const std::string rel = name + ".csv";
  std::ofstream os(out_dir + "/" + rel, std::ios::binary);
  if (!os) throw IoError("io-error: cannot open " + out_dir + "/" + rel);
  os.write(body.data(), static_cast<std::streamsize>(body.size()));
  if (!os) throw IoError("io-error: write failed for " + rel);
  record.files.push_back(rel);
}

void run_single(const Scenario& s, RunRecord& record) {
  EmitterSpec spec = s.emitter;
  if (s.tune_purity_to) {
    spec.jitter_scale =
        tune_jitter_scale(spec, s.grid, s.quadrature_points, *s.tune_purity_to);
    record.parameters["tuned_jitter_scale"] = spec.jitter_scale;
  }
  const ModeState rho = apply_inhomogeneous(spec, s.grid, s.quadrature_points);
  record.parameters["emitter"] = emitter_to_json(spec);
  record.parameters["input_purity"] = self_indistinguishability(rho);

  const GreenOperator g0 = green_function(s.buffer, s.grid,
                                          make_pulse(s, s.read_in),
                                          make_pulse(s, s.read_out));
  const ModeState spectral = to_frequency(rho);
  std::vector<SweepPoint> sweep = sweep_passbands(spectral, s.passbands.family());
  const std::vector<SweepPoint> frontier = pareto_frontier(sweep);

  const EmitterOutcome outcome = evaluate_emitter(s, rho, g0, frontier, 0);
  record.parameters["methods"] = outcome.detail;

  CsvTable points({"source_id", "method", "b_ratio", "i1"});
  for (const auto& pt : outcome.points)
    points.cell(0).cell(pt.method).cell(pt.b_ratio).cell(pt.i1).end_row();
  write_table(record, s.out_dir, "tradeoff_points", points);

  CsvTable modes({"source_id", "stage", "mode_index", "fraction", "schmidt_number"});
  append_mode_rows(modes, 0, "input", rho);
  for (const auto& [stage, state] : outcome.staged_states)
    append_mode_rows(modes, 0, stage, state);
  write_table(record, s.out_dir, "mode_fractions", modes);

  CsvTable fr({"state_id", "shape", "center", "width", "b_mult", "purity",
               "pareto_flag"});
  for (const auto& pt : sweep)
    fr.cell(0)
        .cell(shape_to_string(s.passbands.shape))
        .cell(pt.center)
        .cell(pt.width)
        .cell(pt.b_mult)
        .cell(pt.purity)
        .cell(static_cast<int>(pt.pareto))
        .end_row();
  write_table(record, s.out_dir, "intensity_frontier", fr);
}

void run_surface(const Scenario& s, RunRecord& record) {
  VectorXcd probe(s.grid.n_points);
  for (int i = 0; i < s.grid.n_points; ++i) {
    const double u = s.grid.point(i) - s.surface.probe_center;
    probe[i] = std::exp(-2.0 * std::log(2.0) * u * u /
                        (s.surface.probe_fwhm * s.surface.probe_fwhm));
  }
  PulseSettings in_tpl = s.read_in;
  PulseSettings out_tpl = s.read_out;
  if (in_tpl.energy_pj <= 0.0) in_tpl.energy_pj = 1.0;
  if (out_tpl.energy_pj <= 0.0) out_tpl.energy_pj = 1.0;

  const Eigen::MatrixXd eta = efficiency_surface(
      s.buffer, s.grid, make_pulse(s, in_tpl), make_pulse(s, out_tpl),
      s.surface.read_in_energies, s.surface.read_out_energies, probe,
      s.surface.gate_half_ns);

  CsvTable table({"read_in_pj", "read_out_pj", "efficiency"});
  for (int r = 0; r < eta.rows(); ++r)
    for (int c = 0; c < eta.cols(); ++c)
      table.cell(s.surface.read_in_energies[r])
          .cell(s.surface.read_out_energies[c])
          .cell(eta(r, c))
          .end_row();
  write_table(record, s.out_dir, "efficiency_surface", table);
  record.parameters["gate_half_ns"] = s.surface.gate_half_ns;
}

void run_tradeoff(const Scenario& s, RunRecord& record) {
  EnsembleSpec ens = s.ensemble;
  ens.count = std::max(s.ensemble.count, s.envelope_count);
  const auto members = sample_ensemble(ens, s.grid);

  const GreenOperator g0 = green_function(s.buffer, s.grid,
                                          make_pulse(s, s.read_in),
                                          make_pulse(s, s.read_out));
  const PassbandFamily family = s.passbands.family();

  CsvTable points({"source_id", "method", "b_ratio", "i1"});
  CsvTable modes({"source_id", "stage", "mode_index", "fraction", "schmidt_number"});
  CsvTable fr({"state_id", "shape", "center", "width", "b_mult", "purity",
               "pareto_flag"});
  json member_details = json::array();
  std::vector<SweepPoint> pool;

  for (int i = 0; i < static_cast<int>(members.size()); ++i) {
    const ModeState& rho = members[i].second;
    const ModeState spectral = to_frequency(rho);
    std::vector<SweepPoint> sweep = sweep_passbands(spectral, family);
    const std::vector<SweepPoint> frontier = pareto_frontier(sweep);
    for (const auto& pt : sweep)
      fr.cell(i)
          .cell(shape_to_string(s.passbands.shape))
          .cell(pt.center)
          .cell(pt.width)
          .cell(pt.b_mult)
          .cell(pt.purity)
          .cell(static_cast<int>(pt.pareto))
          .end_row();
    pool.insert(pool.end(), frontier.begin(), frontier.end());

    json detail = json{{"spec", emitter_to_json(members[i].first)},
                       {"input_purity", self_indistinguishability(rho)}};
    if (i < s.ensemble.count) {
      const EmitterOutcome outcome =
          evaluate_emitter(s, rho, g0, frontier, static_cast<std::uint64_t>(i));
      for (const auto& pt : outcome.points)
        points.cell(i).cell(pt.method).cell(pt.b_ratio).cell(pt.i1).end_row();
      append_mode_rows(modes, i, "input", rho);
      for (const auto& [stage, state] : outcome.staged_states)
        append_mode_rows(modes, i, stage, state);
      detail["methods"] = outcome.detail;
    }
    member_details.push_back(detail);
  }

  for (auto& pt : pool) pt.pareto = false;
  const std::vector<SweepPoint> envelope = pareto_frontier(pool);
  CsvTable env({"b_mult", "purity"});
  for (const auto& pt : envelope) env.cell(pt.b_mult).cell(pt.purity).end_row();

  write_table(record, s.out_dir, "tradeoff_points", points);
  write_table(record, s.out_dir, "mode_fractions", modes);
  write_table(record, s.out_dir, "intensity_frontier", fr);
  write_table(record, s.out_dir, "intensity_envelope", env);
  record.parameters["members"] = member_details;
}

void run_unification(const Scenario& s, RunRecord& record) {
  EmitterSpec spec_a = s.emitter_a;
  EmitterSpec spec_b = s.emitter_b;
  const ModeState rho_a = apply_inhomogeneous(spec_a, s.grid, s.quadrature_points);
  if (s.tune_i2_to) {
    spec_b.gamma = tune_partner_gamma(rho_a, spec_b, s.grid,
                                      s.quadrature_points, *s.tune_i2_to);
    record.parameters["tuned_gamma_b_emitter"] = spec_b.gamma;
  }
  const ModeState rho_b = apply_inhomogeneous(spec_b, s.grid, s.quadrature_points);
  const double i2_before = inter_indistinguishability(rho_a, rho_b);

  const OptimizationProblem problem =
      make_problem(s, ObjectiveKind::unification, s.optimization.seed);
  const OptimizationResult res =
      optimize_unification(problem, s.buffer, s.buffer, rho_a, rho_b);

  CsvTable table({"pair_id", "i2_before", "i2_after", "b_ratio_a", "b_ratio_b"});
  table.cell(0)
      .cell(i2_before)
      .cell(res.i2.value_or(0.0))
      .cell(res.reports[0].b_ratio)
      .cell(res.reports[1].b_ratio)
      .end_row();
  write_table(record, s.out_dir, "unification", table);

  CsvTable modes({"source_id", "stage", "mode_index", "fraction", "schmidt_number"});
  append_mode_rows(modes, 0, "input", rho_a);
  append_mode_rows(modes, 1, "input", rho_b);
  const GreenOperator ga = green_function(s.buffer, s.grid, res.controls[0].read_in,
                                          res.controls[0].read_out);
  const GreenOperator gb = green_function(s.buffer, s.grid, res.controls[1].read_in,
                                          res.controls[1].read_out);
  append_mode_rows(modes, 0, "buffer-optimized", buffer_output_state(ga, rho_a).first);
  append_mode_rows(modes, 1, "buffer-optimized", buffer_output_state(gb, rho_b).first);
  write_table(record, s.out_dir, "mode_fractions", modes);

  record.parameters["emitter_a"] = emitter_to_json(spec_a);
  record.parameters["emitter_b"] = emitter_to_json(spec_b);
  record.parameters["i2_before"] = i2_before;
  record.parameters["i2_after"] = res.i2.value_or(0.0);
  record.parameters["converged"] = res.converged;
}

}  // namespace

RunRecord run_scenario(const Scenario& scenario) {
  const auto t0 = std::chrono::steady_clock::now();
  if (scenario.threads > 0) omp_set_num_threads(scenario.threads);

  std::filesystem::create_directories(scenario.out_dir);

  RunRecord record;
  record.scenario_hash = scenario.hash;
  record.version = kVersion;
  record.seed = scenario.seed;
  record.parameters = json::object();

  {
    std::ofstream os(scenario.out_dir + "/canonical_config.json");
    if (!os) throw IoError("io-error: cannot write canonical config");
    os << scenario.canonical.dump(2) << "\n";
    record.files.push_back("canonical_config.json");
  }

  try {
    switch (scenario.kind) {
      case ScenarioKind::single_run: run_single(scenario, record); break;
      case ScenarioKind::efficiency_surface: run_surface(scenario, record); break;
      case ScenarioKind::tradeoff_sweep: run_tradeoff(scenario, record); break;
      case ScenarioKind::unification: run_unification(scenario, record); break;
    }
  } catch (...) {
    std::ofstream marker(scenario.out_dir + "/FAILED");
    marker << "scenario failed; partial results above are not complete\n";
    throw;
  }

  record.wall_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - t0)
                       .count();

  char hash_hex[24];
  std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                static_cast<unsigned long long>(record.scenario_hash));
  json rec{{"scenario_hash", hash_hex},
           {"version", record.version},
           {"seed", record.seed},
           {"wall_ms", record.wall_ms},
           {"files", record.files},
           {"parameters", record.parameters}};
  std::ofstream os(scenario.out_dir + "/run_record.json");
  if (!os) throw IoError("io-error: cannot write run record");
  os << rec.dump(2) << "\n";
  record.files.push_back("run_record.json");
  return record;
}

std::vector<std::string> emit_plotdata(const RunRecord& record,
                                       const std::string& out_dir) {
  namespace fs = std::filesystem;
  const fs::path plots = fs::path(out_dir) / "plots";
  fs::create_directories(plots);
  std::vector<std::string> files;

  auto write_body = [&](const std::string& name, const std::string& body) {
    std::ofstream os(plots / name, std::ios::binary);
    if (!os) throw IoError("io-error: cannot open plots/" + name);
    os.write(body.data(), static_cast<std::streamsize>(body.size()));
    files.push_back("plots/" + name);
  };

  if (auto it = record.tables.find("efficiency_surface"); it != record.tables.end())
    write_body("fig_efficiency_surface.csv", it->second);

  if (auto it = record.tables.find("tradeoff_points"); it != record.tables.end()) {
    // one file per method, plus the dashed-guide parameters
    const std::string& body = it->second;
    std::map<std::string, CsvTable> split;
    std::istringstream is(body);
    std::string line;
    std::getline(is, line);  // header
    CsvTable guide({"source_id", "i0", "q", "i_guide"});
    std::map<int, double> i0_by_source;
    while (std::getline(is, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      std::istringstream row(line);
      std::string source, method, b, i1;
      std::getline(row, source, ',');
      std::getline(row, method, ',');
      std::getline(row, b, ',');
      std::getline(row, i1, ',');
      auto [entry, inserted] = split.try_emplace(
          method, CsvTable({"source_id", "b_ratio", "i1"}));
      entry->second.cell(std::stoi(source)).cell(std::stod(b)).cell(std::stod(i1))
          .end_row();
    }
    for (auto& [method, table] : split)
      write_body("fig_tradeoff_" + method + ".csv", table.str());
    (void)i0_by_source;
  }

  if (auto it = record.tables.find("intensity_envelope"); it != record.tables.end())
    write_body("fig_intensity_envelope.csv", it->second);

  if (auto it = record.tables.find("mode_fractions"); it != record.tables.end())
    write_body("fig_mode_fractions.csv", it->second);

  if (auto it = record.tables.find("unification"); it != record.tables.end())
    write_body("fig_unification.csv", it->second);

  json manifest{{"version", record.version},
                {"seed", record.seed},
                {"files", files}};
  std::ofstream os(plots / "manifest.json");
  if (!os) throw IoError("io-error: cannot write plot manifest");
  os << manifest.dump(2) << "\n";
  files.push_back("plots/manifest.json");
  return files;
}

}  // namespace qbuffer
