#pragma once

#include <string>
#include <vector>

#include "psps/analysis.hpp"
#include "psps/json_fwd.hpp"
#include "psps/network.hpp"
#include "psps/solver.hpp"

namespace psps {

/// "non-bridge" or an explicit scenario list.
struct ContingencyChoice {
  std::string policy = "non-bridge";
  ContingencySet scenarios;  // used when policy == "explicit"

  ContingencySet resolve(const Network& network) const;
};

struct SolveSpec {
  Problem problem = Problem::Ops;
  PlanningParams params;
  ContingencyChoice contingencies;
  SolverOptions options;
  int threads = 1;
};

/// Solve document shared by `psps solve` and the service.
Json solve_document(const Network& network, const SolveSpec& spec, PlanRun* run = nullptr);

struct EvaluateSpec {
  ContingencyChoice contingencies;
  std::optional<double> flex;
  SolverOptions options;
  int threads = 1;
};

Json evaluate_document(const Network& network, const ShutoffPlan& plan, const EvaluateSpec& spec);

struct SweepSpec {
  std::vector<double> alpha_grid;
  std::vector<double> beta_grid;
  std::optional<double> flex;
  ContingencyChoice contingencies;
  SolverOptions options;
  int threads = 1;
};

Json sweep_document(const Network& network, const SweepSpec& spec, const ProgressFn& progress = {});

/// "start:stop:step" with both ends included (tolerance 1e-9), a comma
/// separated list, or a single number. Throws InputError.
std::vector<double> parse_range(const std::string& text);

/// "internal" or "external:<command with {mps} and {sol}>".
void apply_solver_choice(SolverOptions& options, const std::string& choice);

/// Exit code contract: 0 success, 1 input or data error, 2 infeasible,
/// 3 solver limit, 4 internal error.
int exit_code_for(SolveStatus status);

}  // namespace psps
