#include "psps/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <thread>

#include "psps/error.hpp"

namespace psps {

namespace {

constexpr double kBindingTol = 1e-7;
constexpr double kGenerationTol = 1e-6;

void check_grid(const std::vector<double>& grid, const char* name) {
  if (grid.empty()) throw InputError(std::string(name) + " grid is empty");
  for (double v : grid) {
    if (!(v >= 0.0 && v <= 1.0)) throw InputError(std::string(name) + " grid value outside [0, 1]");
  }
}

std::string format_pair(double alpha, double beta) {
  return "(alpha=" + std::to_string(alpha) + ", beta=" + std::to_string(beta) + ")";
}

}  // namespace

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(count, threads < 1 ? 1 : static_cast<std::size_t>(threads));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count && !failed; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          failed = true;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

const char* to_string(Problem problem) { return problem == Problem::Ops ? "ops" : "scops"; }

EvaluationReport evaluate_plan(const Network& network, const ShutoffPlan& plan, const ContingencySet& contingencies,
                               std::optional<double> flex, const SolverOptions& options, int threads) {
  check_plan(network, plan);
  const BigMBounds bigm = compute_big_m(network);
  std::vector<ContingencyOutcome> outcomes(contingencies.scenarios.size());
  parallel_for(outcomes.size(), threads, [&](std::size_t k) {
    const auto& c = contingencies.scenarios[k];
    auto [model, map] = build_ce(network, plan, c, flex, bigm);
    const SolveResult r = solve(model, options);
    ContingencyOutcome& out = outcomes[k];
    out.id = c.id;
    out.outaged_lines = c.outaged_lines;
    out.status = r.status;
    // an unfinished solve reports the trivial bound
    out.gamma = r.objective ? std::clamp(*r.objective, 0.0, 1.0) : 1.0;
    if (out.gamma < 1e-9) out.gamma = 0.0;
    out.binding = out.gamma > kBindingTol;
  });
  EvaluationReport report;
  report.flex_used = flex;
  for (auto& o : outcomes) {
    if (!report.worst_contingency || o.gamma > report.worst_gamma) {
      report.worst_contingency = o.id;
      report.worst_gamma = o.gamma;
    }
    report.per_contingency.emplace(o.id, std::move(o));
  }
  return report;
}

namespace {

void generate_scenarios(PlanRun& run, const Network& network, const ContingencySet& contingencies,
                        const SolverOptions& options, int threads, const BigMBounds& bigm) {
  std::map<int, const Contingency*> by_id;
  for (const auto& c : contingencies.scenarios) by_id[c.id] = &c;
  ContingencySet active;
  std::set<int> active_ids;
  long nodes = 0;
  for (;;) {
    ++run.generation_rounds;
    auto [model, map] = build_scops(network, run.params, active, bigm);
    run.result = solve(model, options);
    nodes += run.result.nodes_explored;
    run.result.nodes_explored = nodes;
    run.plan.reset();
    run.evaluation.reset();
    if (!run.result.has_solution()) break;
    run.plan = extract_plan(model, map, run.result.assignment, network);
    run.evaluation = evaluate_plan(network, *run.plan, contingencies, run.params.flex_override, options, threads);
    std::vector<int> violated;
    for (const auto& [id, outcome] : run.evaluation->per_contingency) {
      if (outcome.gamma > run.params.beta + kGenerationTol) violated.push_back(id);
    }
    if (violated.empty()) break;
    for (int id : violated) {
      if (!active_ids.insert(id).second) {
        throw InternalError("scenario generation stalled on contingency " + std::to_string(id));
      }
      active.scenarios.push_back(*by_id.at(id));
    }
  }
  run.generated_scenarios = std::vector<int>(active_ids.begin(), active_ids.end());
}

}  // namespace

PlanRun run_plan(const Network& network, Problem problem, const PlanningParams& params,
                 const ContingencySet& contingencies, const SolverOptions& options, int threads) {
  params.check();
  PlanRun run;
  run.problem = problem;
  run.params = params;
  const BigMBounds bigm = compute_big_m(network);
  if (problem == Problem::Scops && options.scenario_generation) {
    generate_scenarios(run, network, contingencies, options, threads, bigm);
    return run;
  }
  auto [model, map] = problem == Problem::Ops ? build_ops(network, params, bigm)
                                              : build_scops(network, params, contingencies, bigm);
  run.result = solve(model, options);
  if (run.result.has_solution()) {
    run.plan = extract_plan(model, map, run.result.assignment, network);
    run.evaluation = evaluate_plan(network, *run.plan, contingencies, params.flex_override, options, threads);
  }
  return run;
}

SweepResult sweep(const Network& network, const std::vector<double>& alpha_grid,
                  const std::vector<double>& beta_grid, const ContingencySet& contingencies,
                  std::optional<double> flex, const SolverOptions& options, int threads, const ProgressFn& progress) {
  check_grid(alpha_grid, "alpha");
  check_grid(beta_grid, "beta");
  SweepResult out;
  out.alpha_axis = alpha_grid;
  out.beta_axis = beta_grid;
  out.flex = flex;
  out.cells.assign(alpha_grid.size(), std::vector<SweepCell>(beta_grid.size()));
  const std::size_t total = alpha_grid.size() * beta_grid.size();
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;
  parallel_for(total, threads, [&](std::size_t k) {
    const std::size_t ia = k / beta_grid.size();
    const std::size_t ib = k % beta_grid.size();
    PlanningParams params;
    params.alpha = alpha_grid[ia];
    params.beta = beta_grid[ib];
    params.flex_override = flex;
    const auto start = std::chrono::steady_clock::now();
    const PlanRun run = run_plan(network, Problem::Scops, params, contingencies, options);
    SweepCell& cell = out.cells[ia][ib];
    cell.alpha = params.alpha;
    cell.beta = params.beta;
    cell.status = run.result.status;
    cell.objective = run.result.objective;
    if (run.plan) cell.active_risk = run.plan->summary.active_risk;
    if (run.evaluation) cell.worst_gamma = run.evaluation->worst_gamma;
    cell.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (progress) {
      std::lock_guard lock(progress_mutex);
      progress(++done, total);
    }
  });

  std::vector<const SweepCell*> decided;
  for (const auto& row : out.cells) {
    for (const auto& c : row) {
      if (c.status == SolveStatus::Optimal || c.status == SolveStatus::Infeasible) decided.push_back(&c);
    }
  }
  for (const SweepCell* a : decided) {
    if (!a->feasible()) continue;
    for (const SweepCell* b : decided) {
      if (b->alpha <= a->alpha && b->beta >= a->beta && !b->feasible()) {
        throw InternalError("sweep feasibility is not monotone: " + format_pair(a->alpha, a->beta) +
                            " is feasible but " + format_pair(b->alpha, b->beta) + " is not");
      }
    }
  }
  return out;
}

TradeoffCurves tradeoff_curves(const Network& network, const std::vector<double>& alpha_grid, double beta,
                               const ContingencySet& contingencies, std::optional<double> flex,
                               const SolverOptions& options, int threads, const ProgressFn& progress) {
  check_grid(alpha_grid, "alpha");
  if (!(beta >= 0.0 && beta <= 1.0)) throw InputError("beta outside [0, 1]");
  TradeoffCurves out;
  out.beta = beta;
  out.flex = flex;
  out.ops.resize(alpha_grid.size());
  out.scops.resize(alpha_grid.size());
  const std::size_t total = 2 * alpha_grid.size();
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;
  parallel_for(total, threads, [&](std::size_t k) {
    const std::size_t ia = k / 2;
    const Problem problem = k % 2 == 0 ? Problem::Ops : Problem::Scops;
    PlanningParams params;
    params.alpha = alpha_grid[ia];
    params.beta = problem == Problem::Ops ? 0.0 : beta;
    params.flex_override = flex;
    const PlanRun run = run_plan(network, problem, params, contingencies, options);
    CurvePoint& point = problem == Problem::Ops ? out.ops[ia] : out.scops[ia];
    point.alpha = params.alpha;
    point.status = run.result.status;
    if (run.plan) point.active_risk = run.plan->summary.active_risk;
    if (run.evaluation) point.worst_gamma = run.evaluation->worst_gamma;
    if (progress) {
      std::lock_guard lock(progress_mutex);
      progress(++done, total);
    }
  });
  return out;
}

TopologyMetrics topology_metrics(const Network& network, const ShutoffPlan& plan) {
  check_plan(network, plan);
  TopologyMetrics m;
  m.energized_line_count = static_cast<int>(plan.energized_lines.size());
  m.de_energized_line_count = static_cast<int>(network.lines.size()) - m.energized_line_count;
  int tree_lines = 0;
  for (const auto& component : connected_components(network, plan.energized_lines)) {
    const bool energized = std::any_of(component.begin(), component.end(),
                                       [&](int bus) { return plan.energized_buses.count(bus) > 0; });
    if (!energized) continue;
    ++m.island_count;
    tree_lines += static_cast<int>(component.size()) - 1;
  }
  m.radial = m.energized_line_count == tree_lines;
  return m;
}

}  // namespace psps
