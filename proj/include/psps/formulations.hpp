#pragma once

#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "psps/milp.hpp"
#include "psps/network.hpp"

namespace psps {

struct Contingency {
  int id = 0;
  std::set<int> outaged_lines;

  friend bool operator==(const Contingency&, const Contingency&) = default;
};

/// Post-contingency scenarios; the pre-contingency scenario 0 is implicit.
struct ContingencySet {
  std::vector<Contingency> scenarios;

  friend bool operator==(const ContingencySet&, const ContingencySet&) = default;
};

struct ContingencyPolicy {
  enum class Kind { AllNonBridge, Explicit };
  Kind kind = Kind::AllNonBridge;
  std::vector<Contingency> scenarios;  // used by Explicit

  static ContingencyPolicy all_non_bridge() { return {}; }
  static ContingencyPolicy explicit_list(std::vector<Contingency> list) {
    return {Kind::Explicit, std::move(list)};
  }
};

/// AllNonBridge: one single-line scenario per non-bridge line, ids 1..n in
/// line id order. Explicit: validated pass-through (InputError on unknown
/// lines, duplicate ids, ids < 1 or empty outage sets).
ContingencySet build_contingency_set(const Network& network, const ContingencyPolicy& policy);

struct BigMBounds {
  std::map<int, double> theta_delta_max;  // line id -> radians
  double global_angle_bound = 0.0;
};

BigMBounds compute_big_m(const Network& network);

/// Largest energized angle difference a line can carry: min(cap, T/b).
double angle_reach(const Line& line);
/// Flow limit with the angle cap folded in: min(T, b * cap).
double effective_thermal_limit(const Line& line);

/// Keys are (component id, scenario id); scenario 0 is pre-contingency.
struct VariableMap {
  using Key = std::pair<int, int>;

  std::map<Key, Var> line_on;    // z^L, scenario 0 only
  std::map<Key, Var> bus_on;     // z^B, scenario 0 only
  std::map<Key, Var> gen_on;     // z^G
  std::map<Key, Var> load_served;  // x
  std::map<Key, Var> gen_output;   // P^G
  std::map<Key, Var> line_flow;    // P^L
  std::map<Key, Var> angle;        // theta
  std::map<int, Var> gamma;        // CE only

  std::vector<int> scenario_ids;  // in model order, 0 first when present
  ContingencySet contingencies;
};

struct ScenarioState {
  int contingency_id = 0;
  std::set<int> outaged_lines;
  std::set<int> committed_generators;
  std::map<int, double> load_fraction;
  std::map<int, double> dispatch;
  std::map<int, double> flows;
  std::map<int, double> angles;
  double additional_shed = 0.0;  // fraction of total demand
};

struct PlanSummary {
  double load_served_fraction = 0.0;
  double active_risk = 0.0;  // energized risk / total risk
  double risk = 0.0;         // energized risk
  double total_risk = 0.0;
  std::optional<double> worst_additional_shed;
};

struct ShutoffPlan {
  std::set<int> energized_lines;
  std::set<int> energized_buses;
  std::set<int> committed_generators;
  std::map<int, double> load_fraction;
  std::map<int, double> dispatch;
  std::map<int, double> flows;
  std::map<int, double> angles;
  PlanSummary summary;
  std::vector<ScenarioState> scenarios;  // SC-OPS only
};

double generator_flex(const Generator& gen, std::optional<double> flex_override);

std::pair<MilpModel, VariableMap> build_ops(const Network& network, const PlanningParams& params,
                                            const BigMBounds& bigm);

std::pair<MilpModel, VariableMap> build_scops(const Network& network, const PlanningParams& params,
                                              const ContingencySet& contingencies, const BigMBounds& bigm);

/// Throws InputError describing the first inconsistency: unknown ids, an
/// energized line or committed generator on a de-energized bus, load served
/// on a de-energized bus, fractions outside [0, 1] or dispatch outside the
/// commitment's limits.
void check_plan(const Network& network, const ShutoffPlan& plan);

/// `flex_override` replaces every generator's flexibility when present.
std::pair<MilpModel, VariableMap> build_ce(const Network& network, const ShutoffPlan& plan,
                                           const Contingency& contingency,
                                           std::optional<double> flex_override, const BigMBounds& bigm);

/// Rounds binaries and fills the summary. Throws IntegrityError when the
/// assignment is not audit-clean at 1e-6.
ShutoffPlan extract_plan(const MilpModel& model, const VariableMap& map, const Assignment& assignment,
                         const Network& network);

/// Fills load served, active risk and risk totals from the plan's sets.
PlanSummary summarize(const Network& network, const ShutoffPlan& plan);

}  // namespace psps
