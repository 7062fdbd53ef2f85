#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "psps/formulations.hpp"
#include "psps/network.hpp"
#include "psps/solver.hpp"

namespace psps {

struct ContingencyOutcome {
  int id = 0;
  std::set<int> outaged_lines;
  SolveStatus status = SolveStatus::Optimal;
  double gamma = 0.0;    // additional shed as a fraction of total demand
  bool binding = false;  // the outage forces extra shedding
};

struct EvaluationReport {
  std::map<int, ContingencyOutcome> per_contingency;
  std::optional<int> worst_contingency;  // empty when there are no scenarios
  double worst_gamma = 0.0;
  std::optional<double> flex_used;  // empty: per-generator values
};

/// Runs one CE per scenario; `threads` > 1 evaluates scenarios in parallel
/// with identical results.
EvaluationReport evaluate_plan(const Network& network, const ShutoffPlan& plan, const ContingencySet& contingencies,
                               std::optional<double> flex, const SolverOptions& options, int threads = 1);

enum class Problem { Ops, Scops };

const char* to_string(Problem problem);

/// Solve, extract and evaluate: the unit of work behind `psps solve`.
struct PlanRun {
  Problem problem = Problem::Ops;
  PlanningParams params;
  SolveResult result;
  std::optional<ShutoffPlan> plan;
  std::optional<EvaluationReport> evaluation;
  /// Set under scenario generation: contingency ids in the final model.
  std::optional<std::vector<int>> generated_scenarios;
  int generation_rounds = 0;
};

/// `contingencies` constrain SC-OPS and are the evaluation set for both
/// problems.
PlanRun run_plan(const Network& network, Problem problem, const PlanningParams& params,
                 const ContingencySet& contingencies, const SolverOptions& options, int threads = 1);

struct SweepCell {
  double alpha = 0.0;
  double beta = 0.0;
  SolveStatus status = SolveStatus::Infeasible;
  std::optional<double> objective;
  std::optional<double> active_risk;
  std::optional<double> worst_gamma;
  double wall_time = 0.0;

  bool feasible() const { return objective.has_value() && status == SolveStatus::Optimal; }
};

struct SweepResult {
  std::vector<double> alpha_axis;
  std::vector<double> beta_axis;
  std::optional<double> flex;
  std::vector<std::vector<SweepCell>> cells;  // [alpha index][beta index]
};

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

/// One SC-OPS per cell. Throws InputError on empty or out-of-range grids and
/// InternalError when feasibility is not monotone across cells whose status
/// is decided (optimal or infeasible).
SweepResult sweep(const Network& network, const std::vector<double>& alpha_grid,
                  const std::vector<double>& beta_grid, const ContingencySet& contingencies,
                  std::optional<double> flex, const SolverOptions& options, int threads = 1,
                  const ProgressFn& progress = {});

struct CurvePoint {
  double alpha = 0.0;
  SolveStatus status = SolveStatus::Infeasible;
  std::optional<double> active_risk;
  std::optional<double> worst_gamma;
};

struct TradeoffCurves {
  double beta = 0.0;
  std::optional<double> flex;
  std::vector<CurvePoint> ops;
  std::vector<CurvePoint> scops;
};

TradeoffCurves tradeoff_curves(const Network& network, const std::vector<double>& alpha_grid, double beta,
                               const ContingencySet& contingencies, std::optional<double> flex,
                               const SolverOptions& options, int threads = 1, const ProgressFn& progress = {});

struct TopologyMetrics {
  int island_count = 0;
  bool radial = true;
  int energized_line_count = 0;
  int de_energized_line_count = 0;
};

TopologyMetrics topology_metrics(const Network& network, const ShutoffPlan& plan);

/// Runs body(0..count-1) on up to `threads` workers; rethrows the first
/// exception after every worker stopped.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body);

}  // namespace psps
