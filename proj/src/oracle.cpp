#include "psps/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "psps/error.hpp"
#include "psps/solver.hpp"

namespace psps {

namespace {

constexpr double kTol = 1e-7;

struct Scenario {
  int id = 0;  // 0 = pre-contingency
  std::set<int> outaged;
};

// LP over every scenario for one line pattern and pre-commitment.
class PatternLp {
 public:
  PatternLp(const Network& net, const PlanningParams& params, const std::vector<Scenario>& scenarios,
            unsigned pattern, unsigned committed)
      : net_(net), params_(params), scenarios_(scenarios), pattern_(pattern), committed_(committed) {}

  // Post-contingency generator restrictions: -1 free (relaxed hull),
  // 0 tripped, 1 running.
  using Trips = std::map<std::pair<int, std::size_t>, int>;

  bool feasible() {
    Trips trips;
    return search(trips);
  }

 private:
  bool line_on(std::size_t k) const { return (pattern_ >> k) & 1U; }
  bool gen_on(std::size_t k) const { return (committed_ >> k) & 1U; }

  bool search(Trips& trips) {
    MilpModel lp;
    std::map<std::pair<int, std::size_t>, Var> gen_out;
    build(lp, trips, gen_out);
    const SolveResult r = solve_lp(lp);
    if (r.status != SolveStatus::Optimal) return false;
    // find a unit whose relaxed output sits in the gap between off and on
    for (const auto& [key, v] : gen_out) {
      if (key.first == 0 || trips.count(key)) continue;
      const auto& g = net_.generators[key.second];
      const double pre = r.assignment[static_cast<std::size_t>(gen_out.at({0, key.second}).index)];
      const double on_floor = std::max(g.p_min, pre - g.p_max * generator_flex(g, params_.flex_override));
      const double p = r.assignment[static_cast<std::size_t>(v.index)];
      if (p <= kTol || p >= on_floor - kTol) continue;
      for (int choice : {1, 0}) {
        trips[key] = choice;
        if (search(trips)) return true;
      }
      trips.erase(key);
      return false;
    }
    return true;
  }

  void build(MilpModel& lp, const Trips& trips, std::map<std::pair<int, std::size_t>, Var>& gen_out) const {
    const double demand = total_demand(net_);
    std::map<std::pair<int, std::size_t>, Var> served;
    for (const auto& sc : scenarios_) {
      const std::string tag = "[c=" + std::to_string(sc.id) + "]";
      std::map<int, std::vector<Term>> balance;
      std::map<int, Var> angle;
      for (const auto& b : net_.buses) {
        angle[b.id] = lp.add_continuous("t" + std::to_string(b.id) + tag, -kInf, kInf);
        balance[b.id];
      }
      for (std::size_t k = 0; k < net_.loads.size(); ++k) {
        const auto& d = net_.loads[k];
        const Var x = lp.add_continuous("x" + std::to_string(d.id) + tag, 0.0, 1.0);
        served[{sc.id, k}] = x;
        balance[d.bus].push_back({-d.demand, x});
        if (sc.id != 0) lp.add_constraint({{1.0, x}, {-1.0, served.at({0, k})}}, Sense::LessEqual, 0.0, "keep" + tag);
      }
      for (std::size_t k = 0; k < net_.generators.size(); ++k) {
        if (!gen_on(k)) continue;
        const auto& g = net_.generators[k];
        const std::pair<int, std::size_t> key{sc.id, k};
        double lo = g.p_min, hi = g.p_max;
        const auto trip = trips.find(key);
        const int state = sc.id == 0 ? 1 : (trip == trips.end() ? -1 : trip->second);
        if (state == 0) continue;  // tripped unit produces nothing
        if (state == -1) lo = 0.0;
        const Var p = lp.add_continuous("p" + std::to_string(g.id) + tag, lo, hi);
        gen_out[key] = p;
        balance[g.bus].push_back({1.0, p});
        if (sc.id != 0) {
          const double ramp = g.p_max * generator_flex(g, params_.flex_override);
          const Var base = gen_out.at({0, k});
          lp.add_constraint({{1.0, p}, {-1.0, base}}, Sense::LessEqual, ramp, "ramp up" + tag);
          if (state == 1) lp.add_constraint({{1.0, p}, {-1.0, base}}, Sense::GreaterEqual, -ramp, "ramp down" + tag);
        }
      }
      for (std::size_t k = 0; k < net_.lines.size(); ++k) {
        const auto& l = net_.lines[k];
        if (!line_on(k) || sc.outaged.count(l.id)) continue;
        const double limit = std::min(l.thermal_limit, l.susceptance_b * l.angle_diff_cap);
        const Var f = lp.add_continuous("f" + std::to_string(l.id) + tag, -limit, limit);
        lp.add_constraint({{1.0, f}, {-l.susceptance_b, angle.at(l.from_bus)}, {l.susceptance_b, angle.at(l.to_bus)}},
                          Sense::Equal, 0.0, "dc" + tag);
        balance[l.from_bus].push_back({-1.0, f});
        balance[l.to_bus].push_back({1.0, f});
      }
      for (auto& [bus, terms] : balance) lp.add_constraint(std::move(terms), Sense::Equal, 0.0, "bal" + tag);
      std::vector<Term> total;
      for (std::size_t k = 0; k < net_.loads.size(); ++k) {
        total.push_back({net_.loads[k].demand, served.at({0, k})});
        if (sc.id != 0) total.push_back({-net_.loads[k].demand, served.at({sc.id, k})});
      }
      if (sc.id == 0) {
        lp.add_constraint(std::move(total), Sense::GreaterEqual, params_.alpha * demand, "alpha");
      } else {
        lp.add_constraint(std::move(total), Sense::LessEqual, params_.beta * demand, "beta" + tag);
      }
    }
    lp.set_objective({});
  }

  const Network& net_;
  const PlanningParams& params_;
  const std::vector<Scenario>& scenarios_;
  unsigned pattern_;
  unsigned committed_;
};

}  // namespace

OracleResult enumerate_oracle(const Network& network, const PlanningParams& params,
                              const ContingencySet& contingencies) {
  params.check();
  if (network.lines.size() > 12) {
    throw InputError("enumeration oracle refuses " + std::to_string(network.lines.size()) + " lines (limit 12)");
  }
  if (network.generators.size() > 12) throw InputError("enumeration oracle refuses more than 12 generators");
  const NetworkIndex index(network);
  std::vector<Scenario> scenarios{{0, {}}};
  for (const auto& c : contingencies.scenarios) {
    for (int l : c.outaged_lines) {
      if (!index.line.count(l)) throw InputError("contingency references unknown line " + std::to_string(l));
    }
    scenarios.push_back({c.id, c.outaged_lines});
  }

  const unsigned count = 1U << network.lines.size();
  std::vector<std::pair<double, unsigned>> order;
  for (unsigned mask = 0; mask < count; ++mask) {
    double risk = 0.0;
    for (std::size_t k = 0; k < network.lines.size(); ++k) {
      if ((mask >> k) & 1U) risk += network.lines[k].risk;
    }
    order.push_back({risk, mask});
  }
  std::sort(order.begin(), order.end());

  // units without a minimum output are always worth committing
  unsigned forced = 0;
  std::vector<std::size_t> optional_units;
  for (std::size_t k = 0; k < network.generators.size(); ++k) {
    if (network.generators[k].p_min > 0.0) {
      optional_units.push_back(k);
    } else {
      forced |= 1U << k;
    }
  }

  OracleResult result;
  for (const auto& [risk, mask] : order) {
    ++result.patterns_checked;
    for (unsigned sub = 0; sub < (1U << optional_units.size()); ++sub) {
      unsigned committed = forced;
      for (std::size_t i = 0; i < optional_units.size(); ++i) {
        if ((sub >> i) & 1U) committed |= 1U << optional_units[i];
      }
      PatternLp lp(network, params, scenarios, mask, committed);
      if (!lp.feasible()) continue;
      result.feasible = true;
      result.objective = risk;
      for (std::size_t k = 0; k < network.lines.size(); ++k) {
        if ((mask >> k) & 1U) result.energized_lines.insert(network.lines[k].id);
      }
      return result;
    }
  }
  return result;
}

}  // namespace psps
