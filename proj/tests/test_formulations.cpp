#include "doctest.h"

#include "psps/error.hpp"
#include "psps/formulations.hpp"
#include "psps/oracle.hpp"
#include "psps/solver.hpp"
#include "support.hpp"

using namespace psps;
using psps::testing::tri3;

namespace {

struct Solved {
  SolveResult result;
  MilpModel model;
  VariableMap map;
};

Solved solve_ops(const Network& n, double alpha) {
  PlanningParams p;
  p.alpha = alpha;
  auto [model, map] = build_ops(n, p, compute_big_m(n));
  auto r = solve_milp(model);
  return {r, std::move(model), std::move(map)};
}

Solved solve_scops(const Network& n, double alpha, double beta, std::optional<double> flex = std::nullopt) {
  PlanningParams p;
  p.alpha = alpha;
  p.beta = beta;
  p.flex_override = flex;
  const auto set = build_contingency_set(n, ContingencyPolicy::all_non_bridge());
  auto [model, map] = build_scops(n, p, set, compute_big_m(n));
  auto r = solve_milp(model);
  return {r, std::move(model), std::move(map)};
}

Network path3() {
  Network n = tri3();
  n.lines.pop_back();
  n.lines[1] = {2, 2, 3, 10.0, 1.5, 0.2};
  return n;
}

}  // namespace

TEST_CASE("contingency sets") {
  const auto all = build_contingency_set(tri3(), ContingencyPolicy::all_non_bridge());
  REQUIRE(all.scenarios.size() == 3);
  CHECK(all.scenarios[0] == Contingency{1, {1}});
  CHECK(all.scenarios[2] == Contingency{3, {3}});
  CHECK(build_contingency_set(path3(), ContingencyPolicy::all_non_bridge()).scenarios.empty());

  const auto list = ContingencyPolicy::explicit_list({{7, {1, 2}}});
  CHECK(build_contingency_set(tri3(), list).scenarios.size() == 1);
  CHECK_THROWS_AS(build_contingency_set(tri3(), ContingencyPolicy::explicit_list({{1, {9}}})), InputError);
  CHECK_THROWS_AS(build_contingency_set(tri3(), ContingencyPolicy::explicit_list({{1, {1}}, {1, {2}}})), InputError);
}

TEST_CASE("big-M values") {
  const auto m = compute_big_m(tri3());
  for (const auto& [id, v] : m.theta_delta_max) CHECK(v == doctest::Approx(0.30));
  CHECK(m.global_angle_bound == doctest::Approx(0.45));

  Network two;
  two.buses = {{1, ""}, {2, ""}};
  two.lines = {{1, 1, 2, 10.0, 1.0, 0.1}};  // d = min(0.15, 0.1)
  const auto m2 = compute_big_m(two);
  CHECK(m2.theta_delta_max.at(1) == doctest::Approx(0.2));
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto n = psps::testing::random_network(seed);
    const auto b = compute_big_m(n);
    for (const auto& l : n.lines) CHECK(b.theta_delta_max.at(l.id) >= angle_reach(l) - 1e-15);
  }
}

TEST_CASE("OPS on TRI3") {
  auto s = solve_ops(tri3(), 1.0);
  REQUIRE(s.result.status == SolveStatus::Optimal);
  CHECK(*s.result.objective == doctest::Approx(0.3).epsilon(1e-9));
  const auto plan = extract_plan(s.model, s.map, s.result.assignment, tri3());
  CHECK(plan.energized_lines == std::set<int>{2, 3});
  CHECK(plan.summary.active_risk == doctest::Approx(0.25));
  CHECK(plan.summary.load_served_fraction == doctest::Approx(1.0));
  CHECK_FALSE(plan.summary.worst_additional_shed.has_value());

  auto none = solve_ops(tri3(), 0.0);
  REQUIRE(none.result.status == SolveStatus::Optimal);
  CHECK(*none.result.objective == doctest::Approx(0.0));
  const auto off = extract_plan(none.model, none.map, none.result.assignment, tri3());
  CHECK(off.energized_lines.empty());
  CHECK(off.summary.active_risk == 0.0);

  CHECK(solve_ops(tri3(1.0), 1.0).result.status == SolveStatus::Infeasible);
}

TEST_CASE("OPS relaxation bounds the MILP") {
  PlanningParams p;
  auto [model, map] = build_ops(tri3(), p, compute_big_m(tri3()));
  auto r = solve_lp(relax_integrality(model));
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(*r.objective <= 0.3 + 1e-9);
}

TEST_CASE("SC-OPS ladder on TRI3") {
  auto strict = solve_scops(tri3(), 1.0, 0.0, 1.0);
  REQUIRE(strict.result.status == SolveStatus::Optimal);
  CHECK(*strict.result.objective == doctest::Approx(1.2));
  const auto plan = extract_plan(strict.model, strict.map, strict.result.assignment, tri3());
  CHECK(plan.summary.active_risk == doctest::Approx(1.0));
  REQUIRE(plan.summary.worst_additional_shed.has_value());
  CHECK(*plan.summary.worst_additional_shed == doctest::Approx(0.0));
  CHECK(plan.scenarios.size() == 3);

  auto mid = solve_scops(tri3(), 1.0, 0.7, 1.0);
  REQUIRE(mid.result.status == SolveStatus::Optimal);
  CHECK(*mid.result.objective == doctest::Approx(1.1));
  const auto mid_plan = extract_plan(mid.model, mid.map, mid.result.assignment, tri3());
  CHECK(mid_plan.energized_lines == std::set<int>{1, 2});
  CHECK(*mid_plan.summary.worst_additional_shed <= 0.7 + 1e-9);

  auto loose = solve_scops(tri3(), 1.0, 1.0, 1.0);
  REQUIRE(loose.result.status == SolveStatus::Optimal);
  CHECK(*loose.result.objective == doctest::Approx(0.3));
}

TEST_CASE("CE on fixed TRI3 plans") {
  const auto net = tri3();
  const auto bigm = compute_big_m(net);
  auto plan_with = [&](std::set<int> lines) {
    ShutoffPlan plan;
    plan.energized_lines = std::move(lines);
    plan.energized_buses = {1, 2, 3};
    plan.committed_generators = {1};
    plan.load_fraction = {{1, 1.0}, {2, 1.0}};
    plan.dispatch = {{1, 1.5}};
    return plan;
  };
  auto gamma = [&](const ShutoffPlan& plan, int outaged) {
    auto [model, map] = build_ce(net, plan, {1, {outaged}}, 1.0, bigm);
    auto r = solve_milp(model);
    REQUIRE(r.status == SolveStatus::Optimal);
    CHECK(audit(model, r.assignment, 1e-6).clean());
    return *r.objective;
  };
  CHECK(gamma(plan_with({1, 2, 3}), 2) == doctest::Approx(0.0));
  CHECK(gamma(plan_with({2, 3}), 2) == doctest::Approx(1.0));
  CHECK(gamma(plan_with({1, 2}), 1) == doctest::Approx(2.0 / 3.0));

  auto broken = plan_with({1, 2, 3});
  broken.energized_buses = {1, 2};
  CHECK_THROWS_AS(build_ce(net, broken, {1, {1}}, 1.0, bigm), InputError);
  CHECK_THROWS_AS(build_ce(net, plan_with({1}), {1, {42}}, 1.0, bigm), InputError);
}

TEST_CASE("CE is feasible for any consistent plan") {
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    const auto net = psps::testing::random_network(seed);
    ShutoffPlan plan;
    for (const auto& b : net.buses) plan.energized_buses.insert(b.id);
    for (const auto& l : net.lines) plan.energized_lines.insert(l.id);
    for (const auto& d : net.loads) plan.load_fraction[d.id] = 1.0;
    for (const auto& g : net.generators) {
      plan.committed_generators.insert(g.id);
      plan.dispatch[g.id] = g.p_max;
    }
    auto [model, map] = build_ce(net, plan, {1, {net.lines.front().id}}, 0.05, compute_big_m(net));
    auto r = solve_milp(model);
    CHECK(r.status == SolveStatus::Optimal);
  }
}

TEST_CASE("extract_plan refuses a dirty assignment") {
  PlanningParams p;
  auto [model, map] = build_ops(tri3(), p, compute_big_m(tri3()));
  Assignment zeros(model.num_variables(), 0.0);
  CHECK_THROWS_AS(extract_plan(model, map, zeros, tri3()), IntegrityError);
}

TEST_CASE("constraint tags cover the model families") {
  PlanningParams p;
  const auto set = build_contingency_set(tri3(), ContingencyPolicy::all_non_bridge());
  auto [model, map] = build_scops(tri3(), p, set, compute_big_m(tri3()));
  std::set<std::string> families;
  for (const auto& c : model.constraints()) families.insert(c.tag.substr(0, c.tag.find('[')));
  for (const char* f : {"eq2", "eq3a", "eq3b", "eq3c", "eq4d", "eq4e", "eq5", "eq6", "eq7", "eq8a", "eq8b", "eq8c", "eq9"}) {
    CHECK_MESSAGE(families.count(f), f);
  }
  // scenario variables exist for every scenario and none for outaged lines
  CHECK(map.line_flow.count({1, 1}) == 0);
  CHECK(map.line_flow.count({2, 1}) == 1);
  CHECK(map.line_on.size() == 3);
}

TEST_CASE("oracle on TRI3") {
  PlanningParams p;
  const auto none = ContingencySet{};
  auto r = enumerate_oracle(tri3(), p, none);
  CHECK(r.feasible);
  CHECK(r.objective == doctest::Approx(0.3));
  CHECK(r.energized_lines == std::set<int>{2, 3});
  p.alpha = 0.0;
  CHECK(enumerate_oracle(tri3(), p, none).objective == 0.0);
  p.alpha = 1.0;
  CHECK_FALSE(enumerate_oracle(tri3(1.0), p, none).feasible);

  const auto all = build_contingency_set(tri3(), ContingencyPolicy::all_non_bridge());
  p.beta = 0.7;
  auto mid = enumerate_oracle(tri3(), p, all);
  CHECK(mid.objective == doctest::Approx(1.1));
  CHECK(mid.energized_lines == std::set<int>{1, 2});
  p.beta = 0.0;
  CHECK(enumerate_oracle(tri3(), p, all).objective == doctest::Approx(1.2));

  Network big = tri3();
  for (int k = 4; k <= 13; ++k) big.lines.push_back({k, 1, 2, 10.0, 1.0, 0.1});
  CHECK_THROWS_AS(enumerate_oracle(big, p, none), InputError);
}

TEST_CASE("MILP matches the oracle on small random networks") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const auto net = psps::testing::random_network(seed);
    const auto set = build_contingency_set(net, ContingencyPolicy::all_non_bridge());
    for (double beta : {0.0, 0.5}) {
      PlanningParams p;
      p.alpha = 0.9;
      p.beta = beta;
      const auto oracle = enumerate_oracle(net, p, set);
      auto [model, map] = build_scops(net, p, set, compute_big_m(net));
      SolverOptions o;
      o.mip_rel_gap = 1e-9;
      auto r = solve_milp(model, o);
      CAPTURE(seed);
      CAPTURE(beta);
      if (!oracle.feasible) {
        CHECK(r.status == SolveStatus::Infeasible);
      } else {
        REQUIRE(r.status == SolveStatus::Optimal);
        CHECK(*r.objective == doctest::Approx(oracle.objective).epsilon(1e-7));
      }
    }
  }
}
