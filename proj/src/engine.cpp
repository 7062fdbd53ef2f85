#include "psps/engine.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>

#include "psps/error.hpp"
#include "psps/reports.hpp"

namespace psps {

ContingencySet ContingencyChoice::resolve(const Network& network) const {
  if (policy == "non-bridge") return build_contingency_set(network, ContingencyPolicy::all_non_bridge());
  if (policy == "explicit") {
    return build_contingency_set(network, ContingencyPolicy::explicit_list(scenarios.scenarios));
  }
  throw InputError("unknown contingency policy '" + policy + "'");
}

Json solve_document(const Network& network, const SolveSpec& spec, PlanRun* out) {
  const ContingencySet set = spec.contingencies.resolve(network);
  PlanRun run = run_plan(network, spec.problem, spec.params, set, spec.options, spec.threads);
  RunContext context{spec.contingencies.policy, set, spec.options};
  Json doc = run_to_json(network, run, context);
  if (out) *out = std::move(run);
  return doc;
}

Json evaluate_document(const Network& network, const ShutoffPlan& plan, const EvaluateSpec& spec) {
  const ContingencySet set = spec.contingencies.resolve(network);
  const EvaluationReport report = evaluate_plan(network, plan, set, spec.flex, spec.options, spec.threads);
  Json summary = {{"load_served_fraction", plan.summary.load_served_fraction},
                  {"active_risk", plan.summary.active_risk},
                  {"risk", plan.summary.risk},
                  {"total_risk", plan.summary.total_risk},
                  {"worst_contingency_gamma", report.worst_gamma}};
  return {{"format_version", 1},
          {"contingency_policy", spec.contingencies.policy},
          {"summary", summary},
          {"evaluation", evaluation_to_json(report)},
          {"topology", topology_to_json(topology_metrics(network, plan))}};
}

Json sweep_document(const Network& network, const SweepSpec& spec, const ProgressFn& progress) {
  const ContingencySet set = spec.contingencies.resolve(network);
  const SweepResult result =
      sweep(network, spec.alpha_grid, spec.beta_grid, set, spec.flex, spec.options, spec.threads, progress);
  Json doc = sweep_to_json(result);
  doc["contingency_policy"] = spec.contingencies.policy;
  return doc;
}

namespace {

double parse_number(const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw InputError("not a number: '" + text + "'");
  }
  if (used != text.size() || !std::isfinite(v)) throw InputError("not a number: '" + text + "'");
  return v;
}

}  // namespace

std::vector<double> parse_range(const std::string& text) {
  if (text.empty()) throw InputError("empty range");
  std::vector<std::string> parts;
  if (text.find(':') != std::string::npos) {
    std::stringstream in(text);
    for (std::string p; std::getline(in, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw InputError("range must be start:stop:step, got '" + text + "'");
    const double start = parse_number(parts[0]);
    const double stop = parse_number(parts[1]);
    const double step = parse_number(parts[2]);
    if (!(step > 0.0)) throw InputError("range step must be positive");
    if (stop < start - 1e-9) throw InputError("range stop lies below its start");
    std::vector<double> out;
    for (long k = 0;; ++k) {
      const double v = start + static_cast<double>(k) * step;
      if (v > stop + 1e-9) break;
      out.push_back(std::round(v * 1e12) / 1e12);  // drop binary representation noise
      if (out.size() > 100000) throw InputError("range has too many points");
    }
    return out;
  }
  std::vector<double> out;
  std::stringstream in(text);
  for (std::string p; std::getline(in, p, ',');) out.push_back(parse_number(p));
  return out;
}

void apply_solver_choice(SolverOptions& options, const std::string& choice) {
  if (choice == "internal") {
    options.backend = SolverOptions::Backend::Internal;
    options.external_command.clear();
    return;
  }
  const std::string prefix = "external:";
  if (choice.rfind(prefix, 0) == 0) {
    options.backend = SolverOptions::Backend::External;
    options.external_command = choice.substr(prefix.size());
    options.check();
    return;
  }
  throw InputError("solver must be 'internal' or 'external:<command {mps} {sol}>'");
}

int exit_code_for(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal: return 0;
    case SolveStatus::Infeasible: return 2;
    case SolveStatus::TimeLimit:
    case SolveStatus::NodeLimit: return 3;
    case SolveStatus::Unbounded:
    case SolveStatus::NumericalError: return 4;
  }
  return 4;
}

}  // namespace psps
