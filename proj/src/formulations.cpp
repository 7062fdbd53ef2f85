#include "psps/formulations.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "psps/error.hpp"

namespace psps {

namespace {

constexpr double kMinAngle = 1e-6;

// Linear expression with a constant. Pre-contingency quantities are model
// variables in SC-OPS and fixed numbers in CE.
struct Affine {
  std::vector<Term> terms;
  double constant = 0.0;

  static Affine of(Var v, double coef = 1.0) { return {{{coef, v}}, 0.0}; }
  static Affine fixed(double value) { return {{}, value}; }

  Affine scaled(double k) const {
    Affine out = *this;
    for (auto& t : out.terms) t.coef *= k;
    out.constant *= k;
    return out;
  }
  Affine& operator+=(const Affine& other) {
    terms.insert(terms.end(), other.terms.begin(), other.terms.end());
    constant += other.constant;
    return *this;
  }
};

Affine operator+(Affine a, const Affine& b) { return a += b; }

std::string label(const char* family, std::initializer_list<std::pair<const char*, int>> keys,
                  const char* suffix = nullptr) {
  std::string out = family;
  out += '[';
  bool first = true;
  for (const auto& [k, v] : keys) {
    if (!first) out += ',';
    first = false;
    out += k;
    out += '=';
    out += std::to_string(v);
  }
  if (suffix) {
    out += ',';
    out += suffix;
  }
  return out + ']';
}

std::string var_name(const char* family, int id, int scenario) {
  return std::string(family) + "[" + std::to_string(id) + "," + std::to_string(scenario) + "]";
}

// Pre-contingency quantities one scenario refers to.
struct PreState {
  // nullopt: line carries nothing in this scenario (outaged or switched off)
  std::function<std::optional<Affine>(const Line&)> line;
  std::function<Affine(const LoadPoint&)> load;
  // nullopt: generator uncommitted before the contingency
  std::function<std::optional<Affine>(const Generator&)> gen_on;
  std::function<Affine(const Generator&)> gen_output;
};

class Builder {
 public:
  Builder(const Network& network, const BigMBounds& bigm)
      : net_(network), bigm_(bigm), demand_(total_demand(network)) {
    ref_bus_ = network.buses.empty() ? 0 : network.buses.front().id;
    for (const auto& b : network.buses) ref_bus_ = std::min(ref_bus_, b.id);
  }

  void add(const Affine& lhs, Sense sense, double rhs, std::string tag) {
    model_.add_constraint(lhs.terms, sense, rhs - lhs.constant, std::move(tag));
  }

  Var angle_var(int bus, int c) {
    const double g = bigm_.global_angle_bound;
    const Var v = bus == ref_bus_ ? model_.add_continuous(var_name("theta", bus, c), 0.0, 0.0)
                                  : model_.add_continuous(var_name("theta", bus, c), -g, g);
    map_.angle[{bus, c}] = v;
    return v;
  }

  // Pre-contingency scenario: energization binaries, Eqs. 2, 3, 7, 8, 9.
  void add_base(const PlanningParams& params) {
    for (const auto& b : net_.buses) map_.bus_on[{b.id, 0}] = model_.add_binary(var_name("zB", b.id, 0));
    for (const auto& l : net_.lines) map_.line_on[{l.id, 0}] = model_.add_binary(var_name("zL", l.id, 0));
    for (const auto& g : net_.generators) {
      map_.gen_on[{g.id, 0}] = model_.add_binary(var_name("zG", g.id, 0));
    }
    for (const auto& d : net_.loads) {
      map_.load_served[{d.id, 0}] = model_.add_continuous(var_name("x", d.id, 0), 0.0, 1.0);
    }

    Affine served;
    for (const auto& d : net_.loads) served += Affine::of(map_.load_served.at({d.id, 0}), d.demand);
    add(served, Sense::GreaterEqual, params.alpha * demand_, "eq2");

    auto bus = [&](int id) { return Affine::of(map_.bus_on.at({id, 0}), -1.0); };
    for (const auto& d : net_.loads) {
      add(Affine::of(map_.load_served.at({d.id, 0})) + bus(d.bus), Sense::LessEqual, 0.0,
          label("eq3a", {{"load", d.id}}));
    }
    for (const auto& g : net_.generators) {
      add(Affine::of(map_.gen_on.at({g.id, 0})) + bus(g.bus), Sense::LessEqual, 0.0,
          label("eq3b", {{"gen", g.id}}));
    }
    for (const auto& l : net_.lines) {
      for (int end : {l.from_bus, l.to_bus}) {
        add(Affine::of(map_.line_on.at({l.id, 0})) + bus(end), Sense::LessEqual, 0.0,
            label("eq3c", {{"line", l.id}, {"bus", end}}));
      }
    }

    std::vector<Term> objective;
    for (const auto& l : net_.lines) objective.push_back({l.risk, map_.line_on.at({l.id, 0})});
    model_.set_objective(std::move(objective));

    for (const auto& g : net_.generators) {
      const Var out = model_.add_continuous(var_name("PG", g.id, 0), 0.0, g.p_max);
      map_.gen_output[{g.id, 0}] = out;
      add_gen_limits(g, 0, Affine::of(map_.gen_on.at({g.id, 0})), out);
    }
    add_flow_and_balance(0, {}, [&](const Line& l) { return Affine::of(map_.line_on.at({l.id, 0})); });
    map_.scenario_ids.push_back(0);
  }

  // One post-contingency scenario over `pre`: Eqs. 4d, 4e, 6, 7, 8, 9.
  // Returns the additional shed expression sum (x_d0 - x_dc) D_d.
  Affine add_scenario(const Contingency& c, const PreState& pre, std::optional<double> flex_override) {
    const int id = c.id;
    Affine shed;
    for (const auto& d : net_.loads) {
      const Var x = model_.add_continuous(var_name("x", d.id, id), 0.0, 1.0);
      map_.load_served[{d.id, id}] = x;
      add(Affine::of(x) + pre.load(d).scaled(-1.0), Sense::LessEqual, 0.0,
          label("eq4e", {{"load", d.id}, {"c", id}}));
      shed += pre.load(d).scaled(d.demand) + Affine::of(x, -d.demand);
    }
    for (const auto& g : net_.generators) {
      const auto was_on = pre.gen_on(g);
      if (!was_on) continue;
      const Var z = model_.add_binary(var_name("zG", g.id, id));
      const Var out = model_.add_continuous(var_name("PG", g.id, id), 0.0, g.p_max);
      map_.gen_on[{g.id, id}] = z;
      map_.gen_output[{g.id, id}] = out;
      add(Affine::of(z) + was_on->scaled(-1.0), Sense::LessEqual, 0.0, label("eq4d", {{"gen", g.id}, {"c", id}}));
      // |P_gc - P_g0| <= P^max flex, relaxed by P^max when the unit trips
      const double ramp = g.p_max * generator_flex(g, flex_override);
      const Affine base = pre.gen_output(g);
      add(Affine::of(out) + base.scaled(-1.0) + Affine::of(z, g.p_max), Sense::LessEqual, ramp + g.p_max,
          label("eq6", {{"gen", g.id}, {"c", id}}, "up"));
      add(base + Affine::of(out, -1.0) + Affine::of(z, g.p_max), Sense::LessEqual, ramp + g.p_max,
          label("eq6", {{"gen", g.id}, {"c", id}}, "down"));
      add_gen_limits(g, id, Affine::of(z), out);
    }
    add_flow_and_balance(id, c.outaged_lines, [&](const Line& l) { return pre.line(l); });
    map_.scenario_ids.push_back(id);
    return shed;
  }

  const Network& network() const { return net_; }
  double demand() const { return demand_; }
  MilpModel& model() { return model_; }
  VariableMap& map() { return map_; }

  std::pair<MilpModel, VariableMap> finish() { return {std::move(model_), std::move(map_)}; }

 private:
  void add_gen_limits(const Generator& g, int c, const Affine& on, Var out) {
    add(on.scaled(g.p_min) + Affine::of(out, -1.0), Sense::LessEqual, 0.0,
        label("eq7", {{"gen", g.id}, {"c", c}}, "min"));
    add(Affine::of(out) + on.scaled(-g.p_max), Sense::LessEqual, 0.0, label("eq7", {{"gen", g.id}, {"c", c}}, "max"));
  }

  void add_flow_and_balance(int c, const std::set<int>& outaged,
                            const std::function<std::optional<Affine>(const Line&)>& line_state) {
    for (const auto& b : net_.buses) angle_var(b.id, c);
    std::map<int, Affine> balance;
    for (const auto& b : net_.buses) balance[b.id] = Affine{};
    for (const auto& g : net_.generators) {
      const auto it = map_.gen_output.find({g.id, c});
      if (it != map_.gen_output.end()) balance[g.bus] += Affine::of(it->second);
    }
    for (const auto& d : net_.loads) balance[d.bus] += Affine::of(map_.load_served.at({d.id, c}), -d.demand);

    for (const auto& l : net_.lines) {
      if (outaged.count(l.id)) continue;
      const auto z = line_state(l);
      if (!z) continue;
      const double limit = effective_thermal_limit(l);
      const Var p = model_.add_continuous(var_name("PL", l.id, c), -limit, limit);
      map_.line_flow[{l.id, c}] = p;
      const double b = l.susceptance_b;
      const double big = b * bigm_.theta_delta_max.at(l.id);
      // P - b (theta_i - theta_j) within +-bM (1 - z)
      const Affine ohm = Affine::of(p) + Affine::of(map_.angle.at({l.from_bus, c}), -b) +
                         Affine::of(map_.angle.at({l.to_bus, c}), b);
      add(ohm + z->scaled(big), Sense::LessEqual, big, label("eq8a", {{"line", l.id}, {"c", c}}));
      add(ohm + z->scaled(-big), Sense::GreaterEqual, -big, label("eq8b", {{"line", l.id}, {"c", c}}));
      add(Affine::of(p) + z->scaled(-limit), Sense::LessEqual, 0.0, label("eq8c", {{"line", l.id}, {"c", c}}, "max"));
      add(Affine::of(p) + z->scaled(limit), Sense::GreaterEqual, 0.0, label("eq8c", {{"line", l.id}, {"c", c}}, "min"));
      balance[l.from_bus] += Affine::of(p, -1.0);
      balance[l.to_bus] += Affine::of(p, 1.0);
    }
    for (const auto& [bus, expr] : balance) {
      add(expr, Sense::Equal, 0.0, label("eq9", {{"bus", bus}, {"c", c}}));
    }
  }

  const Network& net_;
  const BigMBounds& bigm_;
  double demand_;
  int ref_bus_ = 0;
  MilpModel model_;
  VariableMap map_;
};

double snap(double v) { return std::abs(v) < 1e-9 ? 0.0 : v; }
double fraction(double v) { return std::clamp(snap(v), 0.0, 1.0); }

void check_contingency(const Network& network, const NetworkIndex& index, const Contingency& c) {
  if (c.id < 1) throw InputError("contingency ids must be positive, got " + std::to_string(c.id));
  if (c.outaged_lines.empty()) throw InputError("contingency " + std::to_string(c.id) + " outages no line");
  for (int line : c.outaged_lines) {
    if (!index.line.count(line)) {
      throw InputError("contingency " + std::to_string(c.id) + " references unknown line " + std::to_string(line));
    }
  }
  (void)network;
}

}  // namespace

double angle_reach(const Line& line) {
  return std::min(line.angle_diff_cap, line.thermal_limit / line.susceptance_b);
}

double effective_thermal_limit(const Line& line) {
  return std::min(line.thermal_limit, line.susceptance_b * line.angle_diff_cap);
}

double generator_flex(const Generator& gen, std::optional<double> flex_override) {
  return flex_override.value_or(gen.flex);
}

ContingencySet build_contingency_set(const Network& network, const ContingencyPolicy& policy) {
  ContingencySet set;
  if (policy.kind == ContingencyPolicy::Kind::AllNonBridge) {
    const auto bridges = find_bridges(network);
    std::vector<int> ids;
    for (const auto& l : network.lines) {
      if (!bridges.count(l.id)) ids.push_back(l.id);
    }
    std::sort(ids.begin(), ids.end());
    int next = 1;
    for (int id : ids) set.scenarios.push_back({next++, {id}});
    return set;
  }
  const NetworkIndex index(network);
  std::set<int> seen;
  for (const auto& c : policy.scenarios) {
    check_contingency(network, index, c);
    if (!seen.insert(c.id).second) throw InputError("duplicate contingency id " + std::to_string(c.id));
  }
  set.scenarios = policy.scenarios;
  return set;
}

BigMBounds compute_big_m(const Network& network) {
  BigMBounds out;
  double total = 0.0;
  for (const auto& l : network.lines) total += angle_reach(l);
  out.global_angle_bound = std::max(total, kMinAngle);
  const auto bridges = find_bridges(network);
  for (const auto& l : network.lines) {
    const double own = angle_reach(l);
    // any energized path avoiding this line, or two islands aligned at a
    // common angle, spans at most the reach of every other line
    const double value = bridges.count(l.id) ? 2.0 * out.global_angle_bound : std::max(own, total - own);
    out.theta_delta_max[l.id] = std::max(value, kMinAngle);
  }
  return out;
}

std::pair<MilpModel, VariableMap> build_ops(const Network& network, const PlanningParams& params,
                                            const BigMBounds& bigm) {
  return build_scops(network, params, ContingencySet{}, bigm);
}

std::pair<MilpModel, VariableMap> build_scops(const Network& network, const PlanningParams& params,
                                              const ContingencySet& contingencies, const BigMBounds& bigm) {
  params.check();
  const NetworkIndex index(network);
  std::set<int> ids;
  for (const auto& c : contingencies.scenarios) {
    check_contingency(network, index, c);
    if (!ids.insert(c.id).second) throw InputError("duplicate contingency id " + std::to_string(c.id));
  }
  Builder builder(network, bigm);
  builder.add_base(params);
  auto& map = builder.map();
  PreState pre;
  pre.line = [&](const Line& l) -> std::optional<Affine> { return Affine::of(map.line_on.at({l.id, 0})); };
  pre.load = [&](const LoadPoint& d) { return Affine::of(map.load_served.at({d.id, 0})); };
  pre.gen_on = [&](const Generator& g) -> std::optional<Affine> { return Affine::of(map.gen_on.at({g.id, 0})); };
  pre.gen_output = [&](const Generator& g) { return Affine::of(map.gen_output.at({g.id, 0})); };
  for (const auto& c : contingencies.scenarios) {
    const Affine shed = builder.add_scenario(c, pre, params.flex_override);
    builder.add(shed, Sense::LessEqual, params.beta * builder.demand(), label("eq5", {{"c", c.id}}));
  }
  map.contingencies = contingencies;
  return builder.finish();
}

void check_plan(const Network& network, const ShutoffPlan& plan) {
  const NetworkIndex index(network);
  auto fail = [](const std::string& what) { throw InputError("inconsistent plan: " + what); };
  for (int b : plan.energized_buses) {
    if (!index.bus.count(b)) fail("unknown bus " + std::to_string(b));
  }
  auto bus_on = [&](int b) { return plan.energized_buses.count(b) > 0; };
  for (int id : plan.energized_lines) {
    const auto it = index.line.find(id);
    if (it == index.line.end()) fail("unknown line " + std::to_string(id));
    const auto& l = network.lines[it->second];
    if (!bus_on(l.from_bus) || !bus_on(l.to_bus)) {
      fail("line " + std::to_string(id) + " energized with a de-energized end");
    }
  }
  for (int id : plan.committed_generators) {
    const auto it = index.generator.find(id);
    if (it == index.generator.end()) fail("unknown generator " + std::to_string(id));
    if (!bus_on(network.generators[it->second].bus)) {
      fail("generator " + std::to_string(id) + " committed on a de-energized bus");
    }
  }
  for (const auto& [id, x] : plan.load_fraction) {
    const auto it = index.load.find(id);
    if (it == index.load.end()) fail("unknown load " + std::to_string(id));
    if (!(x >= 0.0 && x <= 1.0)) fail("load " + std::to_string(id) + " fraction outside [0, 1]");
    if (x > 0.0 && !bus_on(network.loads[it->second].bus)) {
      fail("load " + std::to_string(id) + " served on a de-energized bus");
    }
  }
  constexpr double tol = 1e-6;
  for (const auto& [id, p] : plan.dispatch) {
    const auto it = index.generator.find(id);
    if (it == index.generator.end()) fail("unknown generator " + std::to_string(id));
    const auto& g = network.generators[it->second];
    const bool on = plan.committed_generators.count(id) > 0;
    const double lo = on ? g.p_min : 0.0;
    const double hi = on ? g.p_max : 0.0;
    if (!(p >= lo - tol && p <= hi + tol)) fail("generator " + std::to_string(id) + " dispatch outside its limits");
  }
}

std::pair<MilpModel, VariableMap> build_ce(const Network& network, const ShutoffPlan& plan,
                                           const Contingency& contingency,
                                           std::optional<double> flex_override, const BigMBounds& bigm) {
  check_plan(network, plan);
  if (flex_override && !(*flex_override >= 0.0 && *flex_override <= 1.0)) {
    throw InputError("flexibility must lie in [0, 1]");
  }
  const NetworkIndex index(network);
  check_contingency(network, index, contingency);

  auto value_or_zero = [](const std::map<int, double>& m, int id) {
    const auto it = m.find(id);
    return it == m.end() ? 0.0 : it->second;
  };
  PreState pre;
  pre.line = [&](const Line& l) -> std::optional<Affine> {
    if (!plan.energized_lines.count(l.id)) return std::nullopt;
    return Affine::fixed(1.0);
  };
  pre.load = [&](const LoadPoint& d) { return Affine::fixed(value_or_zero(plan.load_fraction, d.id)); };
  pre.gen_on = [&](const Generator& g) -> std::optional<Affine> {
    if (!plan.committed_generators.count(g.id)) return std::nullopt;
    return Affine::fixed(1.0);
  };
  pre.gen_output = [&](const Generator& g) { return Affine::fixed(value_or_zero(plan.dispatch, g.id)); };

  Builder builder(network, bigm);
  const Affine shed = builder.add_scenario(contingency, pre, flex_override);
  const Var gamma = builder.model().add_continuous("gamma[" + std::to_string(contingency.id) + "]", 0.0, 1.0);
  builder.map().gamma[contingency.id] = gamma;
  builder.add(shed + Affine::of(gamma, -builder.demand()), Sense::LessEqual, 0.0,
              label("eq13", {{"c", contingency.id}}));
  builder.model().set_objective({{1.0, gamma}});
  builder.map().contingencies.scenarios = {contingency};
  return builder.finish();
}

PlanSummary summarize(const Network& network, const ShutoffPlan& plan) {
  PlanSummary s;
  const double demand = total_demand(network);
  double served = 0.0;
  for (const auto& d : network.loads) {
    const auto it = plan.load_fraction.find(d.id);
    if (it != plan.load_fraction.end()) served += it->second * d.demand;
  }
  s.load_served_fraction = demand > 0.0 ? served / demand : 1.0;
  for (const auto& l : network.lines) {
    s.total_risk += l.risk;
    if (plan.energized_lines.count(l.id)) s.risk += l.risk;
  }
  s.active_risk = s.total_risk > 0.0 ? s.risk / s.total_risk : 0.0;
  if (!plan.scenarios.empty()) {
    double worst = 0.0;
    for (const auto& sc : plan.scenarios) worst = std::max(worst, sc.additional_shed);
    s.worst_additional_shed = worst;
  }
  return s;
}

ShutoffPlan extract_plan(const MilpModel& model, const VariableMap& map, const Assignment& assignment,
                         const Network& network) {
  if (assignment.size() != model.num_variables()) {
    throw InputError("assignment length does not match the model");
  }
  const AuditReport report = audit(model, assignment, 1e-6);
  if (!report.clean()) {
    const auto& v = report.violations.front();
    throw IntegrityError("refusing to extract a plan: " + v.label + " violated by " + std::to_string(v.magnitude));
  }
  auto value = [&](Var v) { return assignment[static_cast<std::size_t>(v.index)]; };
  auto on = [&](Var v) { return value(v) > 0.5; };

  ShutoffPlan plan;
  for (const auto& [key, v] : map.line_on) {
    if (key.second == 0 && on(v)) plan.energized_lines.insert(key.first);
  }
  auto fill = [&](int c, std::set<int>& committed, std::map<int, double>& loads, std::map<int, double>& dispatch,
                  std::map<int, double>& flows, std::map<int, double>& angles) {
    for (const auto& g : network.generators) {
      const auto z = map.gen_on.find({g.id, c});
      const bool running = z != map.gen_on.end() && on(z->second);
      if (running) committed.insert(g.id);
      const auto p = map.gen_output.find({g.id, c});
      dispatch[g.id] = running && p != map.gen_output.end() ? snap(value(p->second)) : 0.0;
    }
    for (const auto& d : network.loads) {
      const auto x = map.load_served.find({d.id, c});
      loads[d.id] = x == map.load_served.end() ? 0.0 : fraction(value(x->second));
    }
    for (const auto& l : network.lines) {
      const auto p = map.line_flow.find({l.id, c});
      flows[l.id] = p == map.line_flow.end() ? 0.0 : snap(value(p->second));
    }
    for (const auto& b : network.buses) {
      const auto t = map.angle.find({b.id, c});
      angles[b.id] = t == map.angle.end() ? 0.0 : snap(value(t->second));
    }
  };
  fill(0, plan.committed_generators, plan.load_fraction, plan.dispatch, plan.flows, plan.angles);
  // a bus binary with nothing energized behind it is arbitrary; report the
  // bus as energized only when a line, unit or served load needs it
  for (const auto& l : network.lines) {
    if (plan.energized_lines.count(l.id)) plan.energized_buses.insert({l.from_bus, l.to_bus});
  }
  for (const auto& g : network.generators) {
    if (plan.committed_generators.count(g.id)) plan.energized_buses.insert(g.bus);
  }
  for (const auto& d : network.loads) {
    if (plan.load_fraction[d.id] > 0.0) plan.energized_buses.insert(d.bus);
  }
  for (const auto& l : network.lines) {
    if (!plan.energized_lines.count(l.id)) plan.flows[l.id] = 0.0;
  }

  const double demand = total_demand(network);
  for (const auto& c : map.contingencies.scenarios) {
    ScenarioState s;
    s.contingency_id = c.id;
    s.outaged_lines = c.outaged_lines;
    fill(c.id, s.committed_generators, s.load_fraction, s.dispatch, s.flows, s.angles);
    double shed = 0.0;
    for (const auto& d : network.loads) shed += (plan.load_fraction[d.id] - s.load_fraction[d.id]) * d.demand;
    s.additional_shed = demand > 0.0 ? std::max(0.0, snap(shed / demand)) : 0.0;
    plan.scenarios.push_back(std::move(s));
  }
  plan.summary = summarize(network, plan);
  return plan;
}

}  // namespace psps
