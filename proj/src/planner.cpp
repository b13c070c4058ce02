#include "cesplan/planner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <spdlog/spdlog.h>

#include "cesplan/error.hpp"

namespace cesplan {

namespace {

constexpr double kRandomIndex3 = 0.58;
constexpr double kReciprocalTol = 1e-3;
constexpr double kPowerIterTol = 1e-12;
constexpr double kDegenerateTol = 1e-9;
constexpr double kTieBreakWeight = 1e-7;
constexpr double kTieTol = 1e-9;

std::size_t idx(Objective o) { return static_cast<std::size_t>(o); }

SolveReport solve_combination(const ModelInstance& model, const Scenario& scenario, const Weights& coef,
                              const SolverSettings& settings) {
  const QuadraticProgram qp = weighted_core_problem(model, coef);
  const QpSolution sol = solve_qp(qp, settings);
  SolveReport r;
  r.status = sol.status;
  r.iterations = sol.iterations;
  r.primal_residual = sol.primal_residual;
  r.dual_residual = sol.dual_residual;
  r.polished = sol.polished;
  if (sol.x.size() == qp.num_variables() && sol.x.allFinite()) {
    r.x = expand_core(model, scenario, sol.x);
    r.values = model.evaluate(r.x);
  }
  return r;
}

template <class F>
void parallel_for(std::size_t count, int threads, F&& body) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads) : std::thread::hardware_concurrency();
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(count, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

struct Prepared {
  ModelInstance model;
  LocationResult result;
  std::array<SolveReport, 3> singles;
  bool ready = false;  // payoff table complete
};

Prepared prepare(const Scenario& scenario, NodeId location, const PlanOptions& options) {
  Prepared p;
  p.result.location = location;
  p.model = build_model(scenario, location);
  if (p.model.statically_infeasible) {
    p.result.status = LocationStatus::Infeasible;
    p.result.message = p.model.infeasibility_reason;
    return p;
  }
  for (Objective k : kObjectives) {
    SolveReport r = solve_single_objective(p.model, scenario, k, options.solver);
    p.result.iterations += r.iterations;
    if (r.status != QpStatus::Optimal) {
      p.result.status =
          r.status == QpStatus::PrimalInfeasible ? LocationStatus::Infeasible : LocationStatus::SolverFailure;
      p.result.message = "minimizing " + std::string(to_string(k)) + ": " + std::string(to_string(r.status));
      return p;
    }
    for (Objective i : kObjectives) p.result.context.payoff[idx(k)][idx(i)] = r.values[i];
    p.singles[idx(k)] = std::move(r);
  }
  p.ready = true;
  return p;
}

void finish(Prepared& p, const Scenario& scenario, const PlanOptions& options,
            const std::optional<NormalizationContext>& shared) {
  if (!p.ready) return;
  LocationResult& res = p.result;
  const PayoffMatrix payoff = res.context.payoff;

  SolveReport chosen;
  bool all_degenerate = false;
  try {
    res.context = shared ? *shared : nadir_utopia(payoff);
    res.context.payoff = payoff;
  } catch (const Error& e) {
    if (e.code() != Errc::DegenerateSpan) throw;
    all_degenerate = true;
  }

  if (all_degenerate) {
    // Every objective is flat across the payoff table: the loss minimizer is
    // as good as any other point.
    for (Objective i : kObjectives) {
      res.context.utopia[idx(i)] = res.context.nadir[idx(i)] = payoff[idx(Objective::Loss)][idx(i)];
      res.context.degenerate[idx(i)] = true;
    }
    res.warnings.push_back("all objectives degenerate; using the loss minimizer");
    chosen = p.singles[idx(Objective::Loss)];
  } else {
    res.effective_weights = effective_weights(res.context, options.weights);
    const bool any = std::any_of(res.effective_weights.begin(), res.effective_weights.end(),
                                 [](double w) { return w > 0.0; });
    if (!any) {
      const auto top = static_cast<std::size_t>(
          std::max_element(options.weights.begin(), options.weights.end()) - options.weights.begin());
      res.warnings.push_back("all weighted objectives degenerate; using the single-objective minimizer");
      chosen = p.singles[top];
    } else {
      chosen = solve_weighted(p.model, scenario, res.context, options.weights, options.solver);
      res.iterations += chosen.iterations;
    }
    for (Objective i : kObjectives) {
      if (res.context.degenerate[idx(i)]) {
        res.warnings.push_back(std::string(to_string(i)) + " span degenerate; weight redistributed");
      }
    }
  }

  if (chosen.status != QpStatus::Optimal) {
    res.status =
        chosen.status == QpStatus::PrimalInfeasible ? LocationStatus::Infeasible : LocationStatus::SolverFailure;
    res.message = "weighted solve: " + std::string(to_string(chosen.status));
    return;
  }
  res.status = LocationStatus::Optimal;
  res.primal_residual = chosen.primal_residual;
  res.values = chosen.values;
  auto [design, schedule] = extract_schedule(p.model, scenario, chosen.x);
  res.design = design;
  res.schedule = std::move(schedule);
  res.weighted_objective = 0.0;
  for (Objective i : kObjectives) {
    res.normalized[idx(i)] = res.context.normalized(i, res.values[i]);
    res.weighted_objective += res.effective_weights[idx(i)] * res.normalized[idx(i)];
  }
}

}  // namespace

AhpResult ahp_weights(const AhpMatrix& m) {
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      const double a = m[i][j];
      if (!std::isfinite(a) || a <= 0.0) throw Error(Errc::NonReciprocal, "AHP entries must be positive");
      if (a < 1.0 / 9.0 - kReciprocalTol || a > 9.0 + kReciprocalTol) {
        throw Error(Errc::NonReciprocal, "AHP entries must lie on the 1/9..9 scale");
      }
      if (i == j && std::abs(a - 1.0) > kReciprocalTol) throw Error(Errc::NonReciprocal, "AHP diagonal must be 1");
      if (std::abs(a * m[j][i] - 1.0) > kReciprocalTol) {
        throw Error(Errc::NonReciprocal, "AHP entry (" + std::to_string(i) + "," + std::to_string(j) +
                                             ") is not the reciprocal of its transpose");
      }
    }
  }
  Eigen::Matrix3d a;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a(i, j) = m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  Eigen::Vector3d v = Eigen::Vector3d::Constant(1.0 / 3.0);
  for (int iter = 0; iter < 10000; ++iter) {
    Eigen::Vector3d w = a * v;
    w /= w.sum();
    const double change = (w - v).cwiseAbs().maxCoeff();
    v = w;
    if (change < kPowerIterTol) break;
  }
  AhpResult r;
  const Eigen::Vector3d av = a * v;
  r.lambda_max = (av.array() / v.array()).mean();
  r.consistency_ratio = std::max(0.0, (r.lambda_max - 3.0) / 2.0 / kRandomIndex3);
  r.consistent = r.consistency_ratio <= 0.1;
  for (int i = 0; i < 3; ++i) r.weights[static_cast<std::size_t>(i)] = v[i];
  return r;
}

AhpMatrix default_ahp_judgments() {
  return {{{1.0, 0.25, 0.25}, {4.0, 1.0, 1.0}, {4.0, 1.0, 1.0}}};
}

Weights normalize_weights(const Weights& w) {
  double sum = 0.0;
  for (double v : w) {
    if (!std::isfinite(v) || v < 0.0) throw Error(Errc::InvalidWeights, "weights must be finite and non-negative");
    sum += v;
  }
  if (sum <= 0.0) throw Error(Errc::InvalidWeights, "weights must not all be zero");
  return {w[0] / sum, w[1] / sum, w[2] / sum};
}

Weights resolve_weights(const RunSettings& settings, std::optional<AhpResult>* ahp) {
  if (settings.weights) {
    if (ahp) ahp->reset();
    return normalize_weights(*settings.weights);
  }
  const AhpResult r = ahp_weights(settings.ahp ? *settings.ahp : default_ahp_judgments());
  if (!r.consistent) spdlog::warn("AHP consistency ratio {:.3f} exceeds 0.1", r.consistency_ratio);
  if (ahp) *ahp = r;
  return r.weights;
}

double NormalizationContext::normalized(Objective o, double value) const {
  const std::size_t i = idx(o);
  if (degenerate[i]) return 0.0;
  return (value - utopia[i]) / (nadir[i] - utopia[i]);
}

NormalizationContext nadir_utopia(const PayoffMatrix& f) {
  NormalizationContext ctx;
  ctx.payoff = f;
  bool all = true;
  for (std::size_t i = 0; i < 3; ++i) {
    ctx.utopia[i] = f[i][i];
    ctx.nadir[i] = std::max({f[0][i], f[1][i], f[2][i]});
    const double scale = std::max({1.0, std::abs(ctx.utopia[i]), std::abs(ctx.nadir[i])});
    ctx.degenerate[i] = ctx.nadir[i] - ctx.utopia[i] < kDegenerateTol * scale;
    all = all && ctx.degenerate[i];
  }
  if (all) throw Error(Errc::DegenerateSpan, "nadir and utopia coincide for every objective");
  return ctx;
}

NormalizationContext global_context(const std::vector<PayoffMatrix>& per_location) {
  if (per_location.empty()) throw Error(Errc::InvalidParameter, "no payoff tables to combine");
  PayoffMatrix f{};
  for (std::size_t k = 0; k < 3; ++k) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < per_location.size(); ++j) {
      if (per_location[j][k][k] < per_location[best][k][k]) best = j;
    }
    f[k] = per_location[best][k];
  }
  return nadir_utopia(f);
}

Weights effective_weights(const NormalizationContext& ctx, const Weights& weights) {
  Weights w{};
  double kept = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    if (!ctx.degenerate[i]) {
      w[i] = weights[i];
      kept += weights[i];
    }
  }
  if (kept <= 0.0) return Weights{};
  for (double& v : w) v /= kept;
  return w;
}

SolveReport solve_single_objective(const ModelInstance& model, const Scenario& scenario, Objective which,
                                   const SolverSettings& settings) {
  Weights coef{};
  coef[idx(which)] = 1.0;
  SolveReport first = solve_combination(model, scenario, coef, settings);
  if (first.status != QpStatus::Optimal) return first;

  const double own = std::max(1.0, std::abs(first.values[which]));
  for (Objective i : kObjectives) {
    if (i != which) coef[idx(i)] = kTieBreakWeight * own / std::max(1.0, std::abs(first.values[i]));
  }
  SolveReport second = solve_combination(model, scenario, coef, settings);
  second.iterations += first.iterations;
  if (second.status != QpStatus::Optimal) {
    spdlog::debug("tie-break solve for {} failed ({}); keeping the plain minimizer", to_string(which),
                  to_string(second.status));
    first.iterations = second.iterations;
    return first;
  }
  return second;
}

SolveReport solve_weighted(const ModelInstance& model, const Scenario& scenario, const NormalizationContext& ctx,
                           const Weights& weights, const SolverSettings& settings) {
  const Weights w = effective_weights(ctx, normalize_weights(weights));
  Weights coef{};
  for (std::size_t i = 0; i < 3; ++i) {
    if (w[i] > 0.0) coef[i] = w[i] / (ctx.nadir[i] - ctx.utopia[i]);
  }
  return solve_combination(model, scenario, coef, settings);
}

std::string_view to_string(LocationStatus s) {
  switch (s) {
    case LocationStatus::Optimal: return "optimal";
    case LocationStatus::Infeasible: return "infeasible";
    case LocationStatus::SolverFailure: return "solver_failure";
  }
  return "unknown";
}

PlanOptions PlanOptions::from_settings(const RunSettings& settings) {
  PlanOptions o;
  o.weights = resolve_weights(settings, &o.ahp);
  o.normalization = settings.normalization;
  o.solver = settings.solver;
  o.threads = settings.threads;
  return o;
}

LocationResult evaluate_location(const Scenario& scenario, NodeId location, const PlanOptions& options,
                                 const std::optional<NormalizationContext>& shared_context) {
  PlanOptions opts = options;
  opts.weights = normalize_weights(options.weights);
  Prepared p = prepare(scenario, location, opts);
  finish(p, scenario, opts, shared_context);
  return std::move(p.result);
}

PlanResult plan(const Scenario& scenario, const PlanOptions& options) {
  options.solver.validate();
  PlanOptions opts = options;
  opts.weights = normalize_weights(options.weights);

  std::vector<NodeId> candidates = opts.candidates;
  if (candidates.empty()) {
    for (NodeId j = 1; j <= scenario.network.node_count(); ++j) candidates.push_back(j);
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  if (opts.fixed_location) {
    const NodeId fixed = *opts.fixed_location;
    if (fixed < 1 || fixed > scenario.network.node_count()) {
      throw Error(fixed == kSlack ? Errc::SlackLocation : Errc::UnknownNode,
                  "fixed location " + std::to_string(fixed) + " is not a non-slack node");
    }
    if (opts.normalization == NormalizationMode::PerLocation) candidates = {fixed};
    if (std::find(candidates.begin(), candidates.end(), fixed) == candidates.end()) {
      candidates.insert(std::upper_bound(candidates.begin(), candidates.end(), fixed), fixed);
    }
  }

  PlanResult out;
  out.weights = opts.weights;
  out.ahp = opts.ahp;
  out.normalization = opts.normalization;
  out.baseline = baseline_no_ces(scenario);
  if (opts.ahp && !opts.ahp->consistent) {
    out.warnings.push_back("AHP consistency ratio " + std::to_string(opts.ahp->consistency_ratio) + " exceeds 0.1");
  }

  std::vector<Prepared> prepared(candidates.size());
  parallel_for(candidates.size(), opts.threads, [&](std::size_t i) {
    prepared[i] = prepare(scenario, candidates[i], opts);
    spdlog::debug("location {}: payoff table {}", candidates[i], prepared[i].ready ? "ready" : "unavailable");
  });

  std::optional<NormalizationContext> shared;
  if (opts.normalization == NormalizationMode::Global) {
    std::vector<PayoffMatrix> tables;
    for (const auto& p : prepared) {
      if (p.ready) tables.push_back(p.result.context.payoff);
    }
    if (!tables.empty()) {
      try {
        shared = global_context(tables);
      } catch (const Error& e) {
        if (e.code() != Errc::DegenerateSpan) throw;
        out.warnings.push_back("global normalization degenerate; falling back to per-location");
      }
    }
  }
  out.global_context = shared;

  if (opts.fixed_location) {
    std::vector<Prepared> kept;
    for (auto& p : prepared) {
      if (p.result.location == *opts.fixed_location) kept.push_back(std::move(p));
    }
    prepared = std::move(kept);
  }
  parallel_for(prepared.size(), opts.threads, [&](std::size_t i) { finish(prepared[i], scenario, opts, shared); });

  bool found = false;
  double best = 0.0;
  for (std::size_t i = 0; i < prepared.size(); ++i) {
    const LocationResult& r = prepared[i].result;
    spdlog::debug("location {}: {} weighted {:.6g} loss {:.6g} kWh trade {:.6g} AUD invest {:.6g} AUD", r.location,
                 to_string(r.status), r.weighted_objective, r.values.loss_kwh, r.values.trade_aud,
                 r.values.invest_aud);
    if (r.status != LocationStatus::Optimal) continue;
    // Ascending node order: a later location must be strictly better.
    if (!found || r.weighted_objective < best - kTieTol * std::max(1.0, std::abs(best))) {
      found = true;
      best = r.weighted_objective;
      out.selected = i;
    }
  }
  for (auto& p : prepared) out.leaderboard.push_back(std::move(p.result));
  if (!found) throw Error(Errc::AllLocationsInfeasible, "no candidate location admits a feasible CES plan");
  return out;
}

ObjectiveValues baseline_no_ces(const Scenario& scenario) {
  const NodalSeries p = scenario.nodal_net_load_kw();
  const NodalSeries q = scenario.nodal_reactive_kvar();
  const double dt = scenario.horizon.dt_hours;
  ObjectiveValues v;
  v.loss_kwh = direct_loss_w(scenario.network, p, q) * dt / kWattsPerKw;
  for (int t = 0; t < scenario.steps(); ++t) {
    v.trade_aud += tou_price(scenario.tariff, t) * dt * p.col(t).sum();
  }
  return v;
}

}  // namespace cesplan
