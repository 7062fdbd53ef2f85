#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>

#include "psps/milp.hpp"

namespace psps {

struct SolverOptions {
  enum class Backend { Internal, External };

  Backend backend = Backend::Internal;
  /// Shell command with `{mps}` and `{sol}` placeholders.
  std::string external_command;
  double mip_rel_gap = 1e-6;
  double integrality_tol = 1e-6;
  double feasibility_tol = 1e-7;
  std::optional<double> time_limit;  // seconds
  std::optional<long> node_limit;
  std::uint64_t seed = 0;
  /// SC-OPS only: start without contingencies and add every scenario the
  /// current plan violates until none is left. Same optimum, smaller models.
  bool scenario_generation = false;

  /// Throws InputError on nonpositive tolerances or a malformed template.
  void check() const;
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, TimeLimit, NodeLimit, NumericalError };

const char* to_string(SolveStatus status);

struct SolveResult {
  SolveStatus status = SolveStatus::NumericalError;
  std::optional<double> objective;
  Assignment assignment;  // empty when no solution is available
  double best_bound = -kInf;
  double gap = kInf;
  long nodes_explored = 0;
  double wall_time = 0.0;
  std::string diagnostic;

  bool has_solution() const { return !assignment.empty(); }
};

/// Primal/dual bounded simplex on a model with no binary domains.
SolveResult solve_lp(const MilpModel& model, const SolverOptions& options = {});

/// Branch-and-bound over LP relaxations with dual-simplex warm starts.
SolveResult solve_milp(const MilpModel& model, const SolverOptions& options = {});

/// Writes MPS, runs the external command and reads back its solution file
/// (HiGHS raw solution or CBC solution format). The solution is re-audited
/// before it is accepted.
SolveResult solve_external(const MilpModel& model, const SolverOptions& options);

/// Dispatches on options.backend.
SolveResult solve(const MilpModel& model, const SolverOptions& options = {});

/// Parses an external solution file into a result over `model`'s variables.
/// Exposed for tests of the two accepted grammars.
SolveResult parse_solution_file(const MilpModel& model, const std::string& text);

}  // namespace psps
