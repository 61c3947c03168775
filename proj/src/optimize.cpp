#include "qbuffer/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "qbuffer/rng.hpp"

namespace qbuffer {

void OptimizationProblem::validate() const {
  if (knot_count < 1)
    throw std::invalid_argument("OptimizationProblem.knot_count must be >= 1");
  if (budget < 1) throw std::invalid_argument("OptimizationProblem.budget must be >= 1");
  if (purity_floor < 0.0 || purity_floor > 1.0)
    throw std::invalid_argument("OptimizationProblem.purity_floor must be in [0, 1]");
  if (brightness_floor < 0.0)
    throw std::invalid_argument("OptimizationProblem.brightness_floor must be >= 0");
  if (lower.size() != upper.size())
    throw std::invalid_argument("OptimizationProblem: bounds size mismatch");
  for (int i = 0; i < lower.size(); ++i)
    if (!(lower[i] <= upper[i]))
      throw std::invalid_argument("OptimizationProblem: bounds ill-ordered");
}

std::pair<ModeState, double> ideal_buffer_filter(const ModeState& rho_in,
                                                 const VectorXcd* target_mode) {
  if (target_mode) {
    ModeState out = pure_state(*target_mode, rho_in.grid(), rho_in.domain());
    // weight of the target mode inside rho_in
    const VectorXd w = rho_in.quadrature();
    const MatrixXcd a = detail::symmetrized(rho_in.rho(), w);
    VectorXcd that = target_mode->cwiseProduct(w.cwiseSqrt().cast<Complex>());
    that /= that.norm();
    const double b_ratio = (that.adjoint() * a * that)(0, 0).real();
    return {std::move(out), b_ratio};
  }
  const ModeDecomposition dec = eigendecompose(rho_in);
  ModeState out = pure_state(dec.modes.col(0), rho_in.grid(), rho_in.domain());
  return {std::move(out), dec.weights[0]};
}

// ---------------------------------------------------------------------------
// Simplex search
// ---------------------------------------------------------------------------

namespace {

struct Vertex {
  VectorXd y;
  double f = 0.0;
};

}  // namespace

SimplexResult simplex_maximize(const std::function<double(const VectorXd&)>& f,
                               const VectorXd& lower, const VectorXd& upper,
                               const VectorXd& start, const SimplexOptions& options) {
  const int dim = static_cast<int>(lower.size());
  if (dim < 1 || upper.size() != dim || start.size() != dim)
    throw std::invalid_argument("simplex_maximize: inconsistent dimensions");
  if (options.budget < 1)
    throw std::invalid_argument("simplex_maximize: budget must be >= 1");

  const VectorXd span = (upper - lower).cwiseMax(0.0);
  auto to_x = [&](const VectorXd& y) { return (lower + span.cwiseProduct(y)).eval(); };
  auto clamp = [](VectorXd y) {
    for (int i = 0; i < y.size(); ++i) y[i] = std::min(1.0, std::max(0.0, y[i]));
    return y;
  };

  SimplexResult result;
  result.best_f = -std::numeric_limits<double>::infinity();

  auto evaluate = [&](const VectorXd& y) {
    const double val = f(to_x(y));
    ++result.evaluations;
    result.trace.push_back(TraceEntry{result.evaluations, val});
    if (val > result.best_f) {
      result.best_f = val;
      result.best_x = to_x(y);
    }
    return val;
  };

  VectorXd y_start(dim);
  for (int i = 0; i < dim; ++i) {
    const double s = span[i] > 0.0 ? (start[i] - lower[i]) / span[i] : 0.5;
    y_start[i] = std::min(1.0, std::max(0.0, s));
  }

  const CounterRng rng{options.seed, 0x51u};
  const int half = dim / 2;
  const double step = 0.25;

  // Restart loop: each restart runs to convergence, so the evaluation
  // sequence (and therefore the best value found within any prefix) does
  // not depend on the budget.
  for (int restart = 0; result.evaluations < options.budget; ++restart) {
    VectorXd y0(dim);
    if (restart == 0) {
      y0 = y_start;
    } else {
      for (int i = 0; i < dim; ++i) {
        const int key = options.mirror_blocks && half > 0 ? i % half : i;
        y0[i] = rng.uniform(static_cast<std::uint64_t>(restart) * 1024 + key);
      }
    }

    std::vector<Vertex> simplex;
    simplex.reserve(dim + 1);
    simplex.push_back(Vertex{y0, evaluate(y0)});
    for (int k = 0; k < dim && result.evaluations < options.budget; ++k) {
      VectorXd y = y0;
      y[k] = y[k] + step <= 1.0 ? y[k] + step : y[k] - step;
      simplex.push_back(Vertex{y, evaluate(y)});
    }
    if (static_cast<int>(simplex.size()) < dim + 1) break;  // budget exhausted

    bool restart_converged = false;
    while (result.evaluations < options.budget) {
      std::stable_sort(simplex.begin(), simplex.end(),
                       [](const Vertex& a, const Vertex& b) { return a.f > b.f; });
      const double spread = simplex.front().f - simplex.back().f;
      double extent = 0.0;
      for (const auto& v : simplex)
        extent = std::max(extent, (v.y - simplex.front().y).norm());
      if (spread <= 1e-10 * (1.0 + std::abs(simplex.front().f)) || extent <= 1e-7) {
        restart_converged = true;
        break;
      }

      VectorXd centroid = VectorXd::Zero(dim);
      for (int k = 0; k < dim; ++k) centroid += simplex[k].y;
      centroid /= dim;
      Vertex& worst = simplex.back();

      const VectorXd y_reflect = clamp(centroid + (centroid - worst.y));
      const double f_reflect = evaluate(y_reflect);

      if (f_reflect > simplex.front().f) {
        if (result.evaluations >= options.budget) {
          worst = Vertex{y_reflect, f_reflect};
          break;
        }
        const VectorXd y_expand = clamp(centroid + 2.0 * (centroid - worst.y));
        const double f_expand = evaluate(y_expand);
        worst = f_expand > f_reflect ? Vertex{y_expand, f_expand}
                                     : Vertex{y_reflect, f_reflect};
      } else if (f_reflect > simplex[dim - 1].f) {
        worst = Vertex{y_reflect, f_reflect};
      } else {
        const bool outside = f_reflect > worst.f;
        const VectorXd offset = 0.5 * (centroid - worst.y);
        const VectorXd y_contract =
            clamp(outside ? VectorXd(centroid + offset)
                          : VectorXd(centroid - offset));
        if (result.evaluations >= options.budget) break;
        const double f_contract = evaluate(y_contract);
        if (f_contract > (outside ? f_reflect : worst.f)) {
          worst = Vertex{y_contract, f_contract};
        } else {
          // shrink toward the best vertex
          for (int k = 1; k <= dim && result.evaluations < options.budget; ++k) {
            simplex[k].y = clamp(simplex.front().y +
                                 0.5 * (simplex[k].y - simplex.front().y));
            simplex[k].f = evaluate(simplex[k].y);
          }
        }
      }
    }
    result.converged = result.converged || restart_converged;
    if (!restart_converged) break;  // budget ran out inside this restart
  }
  return result;
}

// ---------------------------------------------------------------------------
// Pulse parameterization
// ---------------------------------------------------------------------------

namespace {

ControlPulse build_pulse(const OptimizationProblem& problem,
                         const BufferConfig& config, const TimeGrid& grid,
                         const PulseNominal& nominal, const double* p) {
  if (problem.basis == ControlBasis::gaussian_with_chirp) {
    // p = [center, fwhm, chirp, energy]
    return ControlPulse::gaussian(grid, config, p[0], p[1], p[3], p[2]);
  }
  // p = [shift, chirp, energy, a_1 .. a_K]; the envelope is anchored to the
  // nominal window and pinned to zero at both ends.
  const int k = problem.knot_count;
  const double w0 = nominal.center - 2.5 * nominal.fwhm + p[0];
  const double w1 = nominal.center + 2.5 * nominal.fwhm + p[0];
  std::vector<double> times(k + 2), amps(k + 2, 0.0);
  for (int i = 0; i < k + 2; ++i)
    times[i] = w0 + (w1 - w0) * i / (k + 1);
  for (int i = 0; i < k; ++i) amps[i + 1] = std::max(0.0, p[3 + i]);
  return ControlPulse::piecewise_linear(grid, config, times, amps, p[2], p[1]);
}

}  // namespace

std::pair<ControlPulse, ControlPulse> build_pulse_pair(
    const OptimizationProblem& problem, const BufferConfig& config,
    const TimeGrid& grid, const VectorXd& params) {
  const int dim = problem.pulse_dim();
  if (params.size() != 2 * dim)
    throw std::invalid_argument("build_pulse_pair: parameter size mismatch");
  ControlPulse read_in =
      build_pulse(problem, config, grid, problem.read_in_nominal, params.data());
  ControlPulse read_out = build_pulse(problem, config, grid,
                                      problem.read_out_nominal, params.data() + dim);
  return {std::move(read_in), std::move(read_out)};
}

VectorXd nominal_params(const OptimizationProblem& problem) {
  const int dim = problem.pulse_dim();
  VectorXd x(2 * dim);
  const PulseNominal* noms[2] = {&problem.read_in_nominal, &problem.read_out_nominal};
  for (int b = 0; b < 2; ++b) {
    double* p = x.data() + b * dim;
    if (problem.basis == ControlBasis::gaussian_with_chirp) {
      p[0] = noms[b]->center;
      p[1] = noms[b]->fwhm;
      p[2] = noms[b]->chirp;
      p[3] = noms[b]->energy;
    } else {
      p[0] = 0.0;
      p[1] = noms[b]->chirp;
      p[2] = noms[b]->energy;
      for (int i = 0; i < problem.knot_count; ++i) p[3 + i] = 0.6;
    }
  }
  return x;
}

std::pair<VectorXd, VectorXd> default_bounds(const OptimizationProblem& problem,
                                             const TimeGrid& grid) {
  const int dim = problem.pulse_dim();
  VectorXd lo(2 * dim), hi(2 * dim);
  const PulseNominal* noms[2] = {&problem.read_in_nominal, &problem.read_out_nominal};
  for (int b = 0; b < 2; ++b) {
    const PulseNominal& nom = *noms[b];
    double* l = lo.data() + b * dim;
    double* h = hi.data() + b * dim;
    const double e_hi = 6.0 * std::max(nom.energy, 1.0);
    if (problem.basis == ControlBasis::gaussian_with_chirp) {
      l[0] = std::max(grid.t_start, nom.center - 2.0 * nom.fwhm);
      h[0] = std::min(grid.t_end, nom.center + 2.0 * nom.fwhm);
      l[1] = 0.3 * nom.fwhm;
      h[1] = 3.0 * nom.fwhm;
      l[2] = -25.0;
      h[2] = 25.0;
      l[3] = 0.0;
      h[3] = e_hi;
    } else {
      l[0] = -1.5 * nom.fwhm;
      h[0] = 1.5 * nom.fwhm;
      l[1] = -25.0;
      h[1] = 25.0;
      l[2] = 0.0;
      h[2] = e_hi;
      for (int i = 0; i < problem.knot_count; ++i) {
        l[3 + i] = 0.0;
        h[3 + i] = 1.0;
      }
    }
  }
  return {lo, hi};
}

// ---------------------------------------------------------------------------
// Objectives
// ---------------------------------------------------------------------------

namespace {

constexpr double kInfeasible = -1e9;

struct KeptModes {
  VectorXd alpha;
  MatrixXcd psi_hat;  // slice-coordinate modes, Euclidean-orthonormal columns
};

KeptModes keep_modes(const ModeState& rho, double weight_tol, int cap) {
  const ModeDecomposition dec = eigendecompose(rho);
  const VectorXd sw = rho.quadrature().cwiseSqrt();
  double kept = 0.0;
  int k = 0;
  while (k < dec.weights.size() && k < cap && kept < 1.0 - weight_tol) {
    kept += dec.weights[k];
    ++k;
  }
  KeptModes km;
  km.alpha = dec.weights.head(k);
  km.psi_hat = sw.asDiagonal() * dec.modes.leftCols(k);
  return km;
}

struct GramMetrics {
  double brightness = 0.0;
  double purity = 0.0;
};

GramMetrics gram_metrics(const VectorXd& alpha, const MatrixXcd& vhat) {
  const MatrixXcd c = vhat.adjoint() * vhat;
  GramMetrics m;
  double num = 0.0;
  for (int k = 0; k < alpha.size(); ++k) {
    m.brightness += alpha[k] * c(k, k).real();
    for (int l = 0; l < alpha.size(); ++l)
      num += alpha[k] * alpha[l] * std::norm(c(k, l));
  }
  if (m.brightness > 0.0) m.purity = num / (m.brightness * m.brightness);
  return m;
}

double cross_indistinguishability(const VectorXd& alpha_a, const MatrixXcd& va,
                                  double wa, const VectorXd& alpha_b,
                                  const MatrixXcd& vb, double wb) {
  const MatrixXcd c = va.adjoint() * vb;
  double num = 0.0;
  for (int k = 0; k < alpha_a.size(); ++k)
    for (int l = 0; l < alpha_b.size(); ++l)
      num += alpha_a[k] * alpha_b[l] * std::norm(c(k, l));
  return num / (wa * wb);
}

FilterReport full_report(const GreenOperator& g, const ModeState& rho_in,
                         const KeptModes& km) {
  auto [rho_out, w] = buffer_output_state(g, rho_in);
  FilterReport report;
  report.b_ratio = w;
  report.i1 = self_indistinguishability(rho_out);
  const MatrixXcd v = g.slice_matrix() * km.psi_hat;
  report.mode_weights.resize(km.alpha.size());
  for (int k = 0; k < km.alpha.size(); ++k)
    report.mode_weights[k] = km.alpha[k] * v.col(k).squaredNorm() / w;
  return report;
}

}  // namespace

OptimizationResult optimize_single(const OptimizationProblem& problem,
                                   const BufferConfig& config,
                                   const ModeState& rho_in) {
  problem.validate();
  config.validate();
  if (rho_in.domain() != Domain::time)
    throw std::invalid_argument("optimize_single: state must be in the time domain");
  const TimeGrid grid = rho_in.grid();

  auto [lo, hi] = problem.lower.size() > 0
                      ? std::make_pair(problem.lower, problem.upper)
                      : default_bounds(problem, grid);
  const KeptModes km = keep_modes(rho_in, 1e-9, 64);

  auto objective = [&](const VectorXd& params) -> double {
    try {
      auto [read_in, read_out] = build_pulse_pair(problem, config, grid, params);
      if (problem.objective == ObjectiveKind::mode_overlap) {
        const GreenOperator g = green_function(config, grid, read_in, read_out);
        const VectorXd sw = grid.quadrature().cwiseSqrt();
        VectorXcd u0 = g.input_modes().col(0).cwiseProduct(sw.cast<Complex>());
        return std::norm(u0.dot(km.psi_hat.col(0)));
      }
      const MatrixXcd v = propagate_slices(config, grid, read_in, read_out,
                                           km.psi_hat);
      const GramMetrics m = gram_metrics(km.alpha, v);
      const double gap = std::max(0.0, problem.purity_floor - m.purity);
      return m.brightness - problem.penalty_weight * gap * gap;
    } catch (const std::invalid_argument&) {
      return kInfeasible;
    } catch (const std::runtime_error&) {
      return kInfeasible;
    }
  };

  SimplexOptions opts;
  opts.budget = problem.budget;
  opts.seed = problem.seed;
  const SimplexResult sr =
      simplex_maximize(objective, lo, hi, nominal_params(problem), opts);

  OptimizationResult result;
  result.best_objective = sr.best_f;
  result.best_params = sr.best_x;
  result.trace = sr.trace;
  result.converged = sr.converged;

  auto [read_in, read_out] = build_pulse_pair(problem, config, grid, sr.best_x);
  const GreenOperator g = green_function(config, grid, read_in, read_out);
  result.reports.push_back(full_report(g, rho_in, km));
  result.controls.push_back(BufferControls{std::move(read_in), std::move(read_out)});
  return result;
}

OptimizationResult optimize_unification(const OptimizationProblem& problem,
                                        const BufferConfig& config_a,
                                        const BufferConfig& config_b,
                                        const ModeState& rho_a,
                                        const ModeState& rho_b) {
  problem.validate();
  config_a.validate();
  config_b.validate();
  if (!rho_a.same_layout(rho_b))
    throw std::invalid_argument("optimize_unification: grid-mismatch");
  if (rho_a.domain() != Domain::time)
    throw std::invalid_argument("optimize_unification: states must be temporal");
  const TimeGrid grid = rho_a.grid();

  auto [lo_pair, hi_pair] = problem.lower.size() > 0
                                ? std::make_pair(problem.lower, problem.upper)
                                : default_bounds(problem, grid);
  const int dim = problem.pulse_dim();

  const KeptModes km_a = keep_modes(rho_a, 1e-9, 64);
  const KeptModes km_b = keep_modes(rho_b, 1e-9, 64);
  const VectorXd sw = grid.quadrature().cwiseSqrt();

  // Stage 1: per buffer, pick the read-in that best stores the dominant
  // eigenmode. The read-in stays a gaussian regardless of the read-out
  // basis. Both fits use the same seed and a fixed budget so swapping the
  // emitters swaps the fitted controls.
  OptimizationProblem gaussian_like = problem;
  gaussian_like.basis = ControlBasis::gaussian_with_chirp;
  const auto [glo, ghi] =
      problem.basis == ControlBasis::gaussian_with_chirp &&
              problem.lower.size() > 0
          ? std::make_pair(VectorXd(problem.lower.head(4)),
                           VectorXd(problem.upper.head(4)))
          : [&] {
              auto b = default_bounds(gaussian_like, grid);
              return std::make_pair(VectorXd(b.first.head(4)),
                                    VectorXd(b.second.head(4)));
            }();

  auto fit_read_in = [&](const BufferConfig& cfg, const KeptModes& km) {
    const VectorXcd psi0 =
        km.psi_hat.col(0).cwiseQuotient(sw.cast<Complex>());
    auto f = [&](const VectorXd& p) -> double {
      try {
        const ControlPulse pulse =
            ControlPulse::gaussian(grid, cfg, p[0], p[1], p[3], p[2]);
        return storage_efficiency(cfg, grid, pulse, psi0);
      } catch (const std::exception&) {
        return kInfeasible;
      }
    };
    SimplexOptions opts;
    opts.budget = 120;
    opts.seed = problem.seed ^ 0x5eedULL;
    VectorXd start(4);
    start << problem.read_in_nominal.center, problem.read_in_nominal.fwhm,
        problem.read_in_nominal.chirp, problem.read_in_nominal.energy;
    const SimplexResult r = simplex_maximize(f, glo, ghi, start, opts);
    return ControlPulse::gaussian(grid, cfg, r.best_x[0], r.best_x[1],
                                  r.best_x[3], r.best_x[2]);
  };
  const ControlPulse read_in_a = fit_read_in(config_a, km_a);
  const ControlPulse read_in_b = fit_read_in(config_b, km_b);

  // Stage 2: co-optimize both read-out pulses for output overlap.
  VectorXd lo(2 * dim), hi(2 * dim), start(2 * dim);
  lo << lo_pair.tail(dim), lo_pair.tail(dim);
  hi << hi_pair.tail(dim), hi_pair.tail(dim);
  const VectorXd nom = nominal_params(problem).tail(dim);
  start << nom, nom;

  auto build_read_out = [&](const BufferConfig& cfg, const double* p) {
    return build_pulse(problem, cfg, grid, problem.read_out_nominal, p);
  };

  auto objective = [&](const VectorXd& params) -> double {
    try {
      const ControlPulse out_a = build_read_out(config_a, params.data());
      const ControlPulse out_b = build_read_out(config_b, params.data() + dim);
      const MatrixXcd va =
          propagate_slices(config_a, grid, read_in_a, out_a, km_a.psi_hat);
      const MatrixXcd vb =
          propagate_slices(config_b, grid, read_in_b, out_b, km_b.psi_hat);
      const GramMetrics ma = gram_metrics(km_a.alpha, va);
      const GramMetrics mb = gram_metrics(km_b.alpha, vb);
      if (ma.brightness <= 1e-12 || mb.brightness <= 1e-12) return kInfeasible;
      const double i2 = cross_indistinguishability(
          km_a.alpha, va, ma.brightness, km_b.alpha, vb, mb.brightness);
      const double ga = std::max(0.0, problem.brightness_floor - ma.brightness);
      const double gb = std::max(0.0, problem.brightness_floor - mb.brightness);
      return i2 - problem.penalty_weight * (ga * ga + gb * gb);
    } catch (const std::invalid_argument&) {
      return kInfeasible;
    } catch (const std::runtime_error&) {
      return kInfeasible;
    }
  };

  SimplexOptions opts;
  opts.budget = problem.budget;
  opts.seed = problem.seed;
  opts.mirror_blocks = true;
  const SimplexResult sr = simplex_maximize(objective, lo, hi, start, opts);

  OptimizationResult result;
  result.best_objective = sr.best_f;
  result.best_params = sr.best_x;
  result.trace = sr.trace;
  result.converged = sr.converged;

  const ControlPulse out_a = build_read_out(config_a, sr.best_x.data());
  const ControlPulse out_b = build_read_out(config_b, sr.best_x.data() + dim);
  const GreenOperator ga = green_function(config_a, grid, read_in_a, out_a);
  const GreenOperator gb = green_function(config_b, grid, read_in_b, out_b);
  auto [rho_out_a, wa] = buffer_output_state(ga, rho_a);
  auto [rho_out_b, wb] = buffer_output_state(gb, rho_b);
  const double i2 = inter_indistinguishability(rho_out_a, rho_out_b);

  FilterReport ra = full_report(ga, rho_a, km_a);
  FilterReport rb = full_report(gb, rho_b, km_b);
  ra.i2 = i2;
  rb.i2 = i2;
  result.i2 = i2;
  result.reports.push_back(std::move(ra));
  result.reports.push_back(std::move(rb));
  result.controls.push_back(BufferControls{read_in_a, out_a});
  result.controls.push_back(BufferControls{read_in_b, out_b});
  return result;
}

}  // namespace qbuffer
