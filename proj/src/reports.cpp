#include "psps/reports.hpp"

#include <cmath>
#include <charconv>
#include <sstream>

#include "psps/error.hpp"

namespace psps {

namespace {

Json number_or_null(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json id_list(const std::set<int>& ids) { return Json(std::vector<int>(ids.begin(), ids.end())); }

double lookup(const std::map<int, double>& m, int id) {
  const auto it = m.find(id);
  return it == m.end() ? 0.0 : it->second;
}

template <typename T>
T field(const Json& obj, const char* key, const char* where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw SchemaError(std::string(where) + ": missing \"" + key + "\"");
  }
  try {
    return obj.at(key).get<T>();
  } catch (const Json::exception&) {
    throw SchemaError(std::string(where) + ": \"" + key + "\" has the wrong type");
  }
}

std::string csv_number(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, *v);
  return std::string(buf, r.ptr);
}

Json scenario_to_json(const Network& network, const ScenarioState& s) {
  Json loads = Json::array(), gens = Json::array(), lines = Json::array(), buses = Json::array();
  for (const auto& d : network.loads) loads.push_back({{"id", d.id}, {"served_fraction", lookup(s.load_fraction, d.id)}});
  for (const auto& g : network.generators) {
    gens.push_back({{"id", g.id}, {"committed", s.committed_generators.count(g.id) > 0},
                    {"dispatch", lookup(s.dispatch, g.id)}});
  }
  for (const auto& l : network.lines) lines.push_back({{"id", l.id}, {"flow", lookup(s.flows, l.id)}});
  for (const auto& b : network.buses) buses.push_back({{"id", b.id}, {"angle", lookup(s.angles, b.id)}});
  return {{"contingency_id", s.contingency_id},
          {"outaged_lines", id_list(s.outaged_lines)},
          {"additional_shed", s.additional_shed},
          {"loads", loads},
          {"generators", gens},
          {"lines", lines},
          {"buses", buses}};
}

Json summary_to_json(const PlanSummary& s) {
  return {{"load_served_fraction", s.load_served_fraction},
          {"active_risk", s.active_risk},
          {"risk", s.risk},
          {"total_risk", s.total_risk},
          {"worst_additional_shed", number_or_null(s.worst_additional_shed)}};
}

}  // namespace

std::string cell_status(SolveStatus status) {
  if (status == SolveStatus::Optimal) return "feasible";
  return to_string(status);
}

Json plan_to_json(const Network& network, const ShutoffPlan& plan) {
  std::set<int> off;
  for (const auto& l : network.lines) {
    if (!plan.energized_lines.count(l.id)) off.insert(l.id);
  }
  Json loads = Json::array(), gens = Json::array(), lines = Json::array(), buses = Json::array();
  for (const auto& d : network.loads) {
    loads.push_back({{"id", d.id}, {"bus", d.bus}, {"demand", d.demand},
                     {"served_fraction", lookup(plan.load_fraction, d.id)}});
  }
  for (const auto& g : network.generators) {
    gens.push_back({{"id", g.id}, {"bus", g.bus}, {"committed", plan.committed_generators.count(g.id) > 0},
                    {"dispatch", lookup(plan.dispatch, g.id)}});
  }
  for (const auto& l : network.lines) {
    lines.push_back({{"id", l.id}, {"from_bus", l.from_bus}, {"to_bus", l.to_bus},
                     {"energized", plan.energized_lines.count(l.id) > 0}, {"risk", l.risk},
                     {"flow", lookup(plan.flows, l.id)}});
  }
  for (const auto& b : network.buses) {
    buses.push_back({{"id", b.id}, {"energized", plan.energized_buses.count(b.id) > 0},
                     {"angle", lookup(plan.angles, b.id)}});
  }
  Json scenarios = Json::array();
  for (const auto& s : plan.scenarios) scenarios.push_back(scenario_to_json(network, s));
  return {{"energized_lines", id_list(plan.energized_lines)},
          {"de_energized_lines", id_list(off)},
          {"energized_buses", id_list(plan.energized_buses)},
          {"committed_generators", id_list(plan.committed_generators)},
          {"loads", loads},
          {"generators", gens},
          {"lines", lines},
          {"buses", buses},
          {"scenarios", scenarios},
          {"summary", summary_to_json(plan.summary)}};
}

ShutoffPlan plan_from_json(const Json& doc, const Network& network) {
  const Json* obj = &doc;
  if (doc.is_object() && doc.contains("plan")) {
    if (doc.at("plan").is_null()) throw SchemaError("document holds no plan (status " + doc.value("status", std::string("unknown")) + ")");
    obj = &doc.at("plan");
  }
  const char* where = "plan";
  ShutoffPlan plan;
  for (int id : field<std::vector<int>>(*obj, "energized_lines", where)) plan.energized_lines.insert(id);
  for (int id : field<std::vector<int>>(*obj, "energized_buses", where)) plan.energized_buses.insert(id);
  for (int id : field<std::vector<int>>(*obj, "committed_generators", where)) plan.committed_generators.insert(id);
  if (obj->contains("loads")) {
    for (const auto& d : obj->at("loads")) {
      plan.load_fraction[field<int>(d, "id", "plan load")] = field<double>(d, "served_fraction", "plan load");
    }
  }
  if (obj->contains("generators")) {
    for (const auto& g : obj->at("generators")) {
      plan.dispatch[field<int>(g, "id", "plan generator")] = field<double>(g, "dispatch", "plan generator");
    }
  }
  if (obj->contains("lines")) {
    for (const auto& l : obj->at("lines")) {
      if (l.contains("flow")) plan.flows[field<int>(l, "id", "plan line")] = field<double>(l, "flow", "plan line");
    }
  }
  if (obj->contains("buses")) {
    for (const auto& b : obj->at("buses")) {
      if (b.contains("angle")) plan.angles[field<int>(b, "id", "plan bus")] = field<double>(b, "angle", "plan bus");
    }
  }
  check_plan(network, plan);
  plan.summary = summarize(network, plan);
  return plan;
}

Json contingencies_to_json(const ContingencySet& set) {
  Json list = Json::array();
  for (const auto& c : set.scenarios) list.push_back({{"id", c.id}, {"outaged_lines", id_list(c.outaged_lines)}});
  return {{"scenarios", list}};
}

ContingencySet contingencies_from_json(const Json& doc) {
  ContingencySet set;
  if (doc.is_array()) {
    int next = 1;
    for (const auto& entry : doc) {
      if (!entry.is_array()) throw SchemaError("contingency list entries must be arrays of line ids");
      Contingency c{next++, {}};
      for (const auto& id : entry) {
        if (!id.is_number_integer()) throw SchemaError("line ids must be integers");
        c.outaged_lines.insert(id.get<int>());
      }
      set.scenarios.push_back(std::move(c));
    }
    return set;
  }
  if (!doc.is_object() || !doc.contains("scenarios") || !doc.at("scenarios").is_array()) {
    throw SchemaError("contingency file needs a \"scenarios\" array");
  }
  for (const auto& entry : doc.at("scenarios")) {
    Contingency c;
    c.id = field<int>(entry, "id", "contingency");
    for (int id : field<std::vector<int>>(entry, "outaged_lines", "contingency")) c.outaged_lines.insert(id);
    set.scenarios.push_back(std::move(c));
  }
  return set;
}

Json evaluation_to_json(const EvaluationReport& report) {
  Json list = Json::array();
  for (const auto& [id, o] : report.per_contingency) {
    list.push_back({{"id", id}, {"outaged_lines", id_list(o.outaged_lines)}, {"status", to_string(o.status)},
                    {"gamma", o.gamma}, {"binding", o.binding}});
  }
  Json worst = nullptr;
  if (report.worst_contingency) worst = {{"contingency_id", *report.worst_contingency}, {"gamma", report.worst_gamma}};
  return {{"flex_used", number_or_null(report.flex_used)}, {"worst_case", worst}, {"contingencies", list}};
}

Json topology_to_json(const TopologyMetrics& m) {
  return {{"island_count", m.island_count},
          {"radial", m.radial},
          {"energized_line_count", m.energized_line_count},
          {"de_energized_line_count", m.de_energized_line_count}};
}

Json run_to_json(const Network& network, const PlanRun& run, const RunContext& context) {
  const auto& o = context.options;
  Json solver = {{"backend", o.backend == SolverOptions::Backend::Internal ? "internal" : "external"},
                 {"mip_rel_gap", o.mip_rel_gap},
                 {"time_limit", number_or_null(o.time_limit)},
                 {"seed", o.seed},
                 {"scenario_generation", o.scenario_generation}};
  Json doc = {{"format_version", 1},
              {"problem", to_string(run.problem)},
              {"params",
               {{"alpha", run.params.alpha}, {"beta", run.params.beta}, {"pflex", number_or_null(run.params.flex_override)}}},
              {"contingencies",
               {{"policy", context.contingency_policy},
                {"scenarios", contingencies_to_json(context.contingencies).at("scenarios")}}},
              {"solver", solver},
              {"status", to_string(run.result.status)},
              {"objective", number_or_null(run.result.objective)},
              {"best_bound", finite_or_null(run.result.best_bound)},
              {"gap", finite_or_null(run.result.gap)},
              {"nodes_explored", run.result.nodes_explored}};
  if (run.generated_scenarios) {
    doc["scenario_generation"] = {{"rounds", run.generation_rounds}, {"active_scenarios", *run.generated_scenarios}};
  }
  if (run.plan) {
    doc["summary"] = summary_to_json(run.plan->summary);
    doc["summary"]["worst_contingency_gamma"] = run.evaluation ? Json(run.evaluation->worst_gamma) : Json(nullptr);
    doc["plan"] = plan_to_json(network, *run.plan);
    doc["evaluation"] = run.evaluation ? evaluation_to_json(*run.evaluation) : Json(nullptr);
    doc["topology"] = topology_to_json(topology_metrics(network, *run.plan));
  } else {
    doc["summary"] = nullptr;
    doc["plan"] = nullptr;
    doc["evaluation"] = nullptr;
    doc["topology"] = nullptr;
    if (run.result.status == SolveStatus::Infeasible) {
      doc["message"] = run.problem == Problem::Ops
                           ? "no shutoff plan serves the required load fraction"
                           : "no shutoff plan serves the required load fraction within the contingency shed limit";
    } else {
      doc["message"] = run.result.diagnostic.empty() ? "no solution available" : run.result.diagnostic;
    }
  }
  return doc;
}

Json sweep_to_json(const SweepResult& result) {
  Json rows = Json::array();
  for (const auto& row : result.cells) {
    Json cells = Json::array();
    for (const auto& c : row) {
      cells.push_back({{"alpha", c.alpha},
                       {"beta", c.beta},
                       {"status", cell_status(c.status)},
                       {"objective", number_or_null(c.objective)},
                       {"active_risk", number_or_null(c.active_risk)},
                       {"worst_gamma", number_or_null(c.worst_gamma)},
                       {"wall_time", c.wall_time}});
    }
    rows.push_back(cells);
  }
  return {{"format_version", 1},
          {"alpha_axis", result.alpha_axis},
          {"beta_axis", result.beta_axis},
          {"flex", number_or_null(result.flex)},
          {"cells", rows}};
}

std::string sweep_to_csv(const SweepResult& result) {
  std::ostringstream out;
  out << "alpha,beta,status,objective,active_risk,worst_gamma,wall_time\n";
  for (const auto& row : result.cells) {
    for (const auto& c : row) {
      out << csv_number(c.alpha) << ',' << csv_number(c.beta) << ',' << cell_status(c.status) << ','
          << csv_number(c.objective) << ',' << csv_number(c.active_risk) << ',' << csv_number(c.worst_gamma) << ','
          << csv_number(c.wall_time) << '\n';
    }
  }
  return out.str();
}

Json tradeoff_to_json(const TradeoffCurves& curves) {
  auto series = [](const char* label, const std::vector<CurvePoint>& points) {
    Json list = Json::array();
    for (const auto& p : points) {
      list.push_back({{"alpha", p.alpha},
                      {"status", cell_status(p.status)},
                      {"active_risk", number_or_null(p.active_risk)},
                      {"worst_gamma", number_or_null(p.worst_gamma)}});
    }
    return Json{{"label", label}, {"points", list}};
  };
  return {{"format_version", 1},
          {"beta", curves.beta},
          {"flex", number_or_null(curves.flex)},
          {"series", Json::array({series("OPS", curves.ops), series("SC-OPS", curves.scops)})}};
}

std::string tradeoff_to_csv(const TradeoffCurves& curves) {
  std::ostringstream out;
  out << "series,alpha,status,active_risk,worst_gamma\n";
  for (const auto& [label, points] : {std::pair{"OPS", &curves.ops}, std::pair{"SC-OPS", &curves.scops}}) {
    for (const auto& p : *points) {
      out << label << ',' << csv_number(p.alpha) << ',' << cell_status(p.status) << ',' << csv_number(p.active_risk)
          << ',' << csv_number(p.worst_gamma) << '\n';
    }
  }
  return out.str();
}

}  // namespace psps
