#pragma once

#include <string>

#include "psps/analysis.hpp"
#include "psps/formulations.hpp"
#include "psps/json_fwd.hpp"
#include "psps/network.hpp"
#include "psps/solver.hpp"

namespace psps {

/// "feasible" for optimal cells, "infeasible", or the solver status name.
std::string cell_status(SolveStatus status);

Json plan_to_json(const Network& network, const ShutoffPlan& plan);
/// Accepts a plan object or a solve document holding one under "plan".
/// The summary is recomputed from the network.
ShutoffPlan plan_from_json(const Json& doc, const Network& network);

Json contingencies_to_json(const ContingencySet& set);
/// {"scenarios": [{"id": 1, "outaged_lines": [3]}, ...]} or a bare list of
/// line-id lists, numbered from 1.
ContingencySet contingencies_from_json(const Json& doc);

Json evaluation_to_json(const EvaluationReport& report);
Json topology_to_json(const TopologyMetrics& metrics);

struct RunContext {
  std::string contingency_policy;  // "non-bridge" or "explicit"
  ContingencySet contingencies;
  SolverOptions options;
};

/// Solve document. Holds no wall-clock values.
Json run_to_json(const Network& network, const PlanRun& run, const RunContext& context);

Json sweep_to_json(const SweepResult& result);
std::string sweep_to_csv(const SweepResult& result);

Json tradeoff_to_json(const TradeoffCurves& curves);
std::string tradeoff_to_csv(const TradeoffCurves& curves);

}  // namespace psps
