#pragma once

#include <optional>
#include <set>

#include "psps/formulations.hpp"
#include "psps/network.hpp"

namespace psps {

struct OracleResult {
  bool feasible = false;
  double objective = 0.0;
  std::set<int> energized_lines;
  long patterns_checked = 0;
};

/// Ground truth by exhaustion: line patterns are tried in ascending risk
/// order and each is checked with exact DC power flow LPs (no big-M, free
/// angles), all buses energized. Generator trips after a contingency are
/// resolved by branching on each unit's off/on disjunction. Refuses
/// networks with more than 12 lines (InputError).
OracleResult enumerate_oracle(const Network& network, const PlanningParams& params,
                              const ContingencySet& contingencies);

}  // namespace psps
