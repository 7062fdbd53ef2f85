#include "doctest.h"

#include "psps/analysis.hpp"
#include "psps/engine.hpp"
#include "psps/error.hpp"
#include "psps/reports.hpp"
#include "support.hpp"

using namespace psps;
using psps::testing::tri3;

namespace {

ContingencySet non_bridge(const Network& n) {
  return build_contingency_set(n, ContingencyPolicy::all_non_bridge());
}

PlanRun run(const Network& n, Problem problem, double alpha, double beta, std::optional<double> flex) {
  PlanningParams p;
  p.alpha = alpha;
  p.beta = beta;
  p.flex_override = flex;
  return run_plan(n, problem, p, non_bridge(n), SolverOptions{});
}

}  // namespace

TEST_CASE("evaluate the TRI3 OPS plan") {
  const Network n = tri3();
  const PlanRun ops = run(n, Problem::Ops, 1.0, 0.0, std::nullopt);
  REQUIRE(ops.plan);
  CHECK(ops.plan->energized_lines == std::set<int>{2, 3});
  const EvaluationReport r = evaluate_plan(n, *ops.plan, non_bridge(n), 1.0, SolverOptions{});
  REQUIRE(r.per_contingency.size() == 3);
  CHECK(r.per_contingency.at(1).gamma == doctest::Approx(0.0).epsilon(1e-9));
  CHECK_FALSE(r.per_contingency.at(1).binding);
  CHECK(r.per_contingency.at(2).gamma == doctest::Approx(1.0));
  CHECK(r.per_contingency.at(3).gamma == doctest::Approx(2.0 / 3.0));
  CHECK(r.per_contingency.at(3).binding);
  CHECK(r.worst_contingency == 2);
  CHECK(r.worst_gamma == doctest::Approx(1.0));

  // parallel evaluation gives the same report
  const EvaluationReport p = evaluate_plan(n, *ops.plan, non_bridge(n), 1.0, SolverOptions{}, 3);
  CHECK(evaluation_to_json(p) == evaluation_to_json(r));
}

TEST_CASE("TRI3 sweep row at alpha = 1") {
  const Network n = tri3();
  const SweepResult s = sweep(n, {1.0}, {0.0, 0.7, 1.0}, non_bridge(n), 1.0, SolverOptions{});
  REQUIRE(s.cells.size() == 1);
  const auto& row = s.cells[0];
  CHECK(*row[0].active_risk == doctest::Approx(1.0));
  CHECK(*row[1].active_risk == doctest::Approx(1.1 / 1.2));
  CHECK(*row[2].active_risk == doctest::Approx(0.25));
  for (const auto& c : row) CHECK(*c.worst_gamma <= c.beta + 1e-6);

  CHECK_THROWS_AS(sweep(n, {}, {0.0}, non_bridge(n), 1.0, SolverOptions{}), InputError);
  CHECK_THROWS_AS(sweep(n, {1.0}, {1.5}, non_bridge(n), 1.0, SolverOptions{}), InputError);
}

TEST_CASE("sweep marks infeasible cells") {
  const Network n = tri3(1.0);
  const SweepResult s = sweep(n, {0.5, 1.0}, {0.0, 1.0}, non_bridge(n), 1.0, SolverOptions{}, 2);
  CHECK(s.cells[0][1].feasible());
  CHECK(s.cells[1][0].status == SolveStatus::Infeasible);
  CHECK(s.cells[1][1].status == SolveStatus::Infeasible);
  const Json doc = sweep_to_json(s);
  CHECK(doc.dump().find("\"infeasible\"") != std::string::npos);
  const std::string csv = sweep_to_csv(s);
  CHECK(csv.rfind("alpha,beta,status,objective,active_risk,worst_gamma,wall_time\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}

TEST_CASE("sweep feasibility is monotone on random networks") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const Network n = testing::random_network(seed);
    CAPTURE(seed);
    const SweepResult s = sweep(n, {0.6, 0.8, 1.0}, {0.0, 0.5, 1.0}, non_bridge(n), 0.5, SolverOptions{});
    for (std::size_t a = 0; a < 3; ++a) {
      for (std::size_t b = 0; b + 1 < 3; ++b) {
        const auto& lo = s.cells[a][b];
        const auto& hi = s.cells[a][b + 1];
        if (lo.feasible()) {
          REQUIRE(hi.feasible());
          CHECK(*hi.objective <= *lo.objective + 1e-6);
        }
      }
    }
  }
}

TEST_CASE("topology metrics") {
  const Network n = tri3();
  const PlanRun ops = run(n, Problem::Ops, 1.0, 0.0, std::nullopt);
  const TopologyMetrics m = topology_metrics(n, *ops.plan);
  CHECK(m.energized_line_count == 2);
  CHECK(m.de_energized_line_count == 1);
  CHECK(m.island_count == 1);
  CHECK(m.radial);

  const PlanRun scops = run(n, Problem::Scops, 1.0, 0.0, 1.0);
  const TopologyMetrics full = topology_metrics(n, *scops.plan);
  CHECK(full.island_count == 1);
  CHECK_FALSE(full.radial);

  const PlanRun dark = run(n, Problem::Ops, 0.0, 0.0, std::nullopt);
  const TopologyMetrics none = topology_metrics(n, *dark.plan);
  CHECK(none.energized_line_count == 0);
  CHECK(none.island_count == 0);
  CHECK(none.radial);
}

TEST_CASE("tradeoff curves put OPS at or below SC-OPS") {
  const Network n = tri3();
  const TradeoffCurves c = tradeoff_curves(n, {0.5, 0.9, 1.0}, 0.5, non_bridge(n), 1.0, SolverOptions{});
  for (std::size_t k = 0; k < 3; ++k) {
    REQUIRE(c.ops[k].active_risk);
    REQUIRE(c.scops[k].active_risk);
    CHECK(*c.ops[k].active_risk <= *c.scops[k].active_risk + 1e-9);
    CHECK(*c.scops[k].worst_gamma <= 0.5 + 1e-6);
  }
  const Json doc = tradeoff_to_json(c);
  CHECK(doc["series"].size() == 2);
}

TEST_CASE("range parsing") {
  const auto r = parse_range("0.8:1:0.05");
  REQUIRE(r.size() == 5);
  CHECK(r.front() == 0.8);
  CHECK(r[1] == 0.85);
  CHECK(r.back() == 1.0);
  CHECK(parse_range("0:0.3:0.1") == std::vector<double>{0.0, 0.1, 0.2, 0.3});
  CHECK(parse_range("0.1,0.25") == std::vector<double>{0.1, 0.25});
  CHECK(parse_range("0.7") == std::vector<double>{0.7});
  CHECK_THROWS_AS(parse_range(""), InputError);
  CHECK_THROWS_AS(parse_range("0:1"), InputError);
  CHECK_THROWS_AS(parse_range("0:1:0"), InputError);
  CHECK_THROWS_AS(parse_range("1:0:0.1"), InputError);
  CHECK_THROWS_AS(parse_range("0.1,x"), InputError);
}

TEST_CASE("solver choice") {
  SolverOptions o;
  apply_solver_choice(o, "external:highs {mps} {sol}");
  CHECK(o.backend == SolverOptions::Backend::External);
  CHECK(o.external_command == "highs {mps} {sol}");
  CHECK_THROWS_AS(apply_solver_choice(o, "external:highs {mps}"), InputError);
  CHECK_THROWS_AS(apply_solver_choice(o, "gurobi"), InputError);
  apply_solver_choice(o, "internal");
  CHECK(o.backend == SolverOptions::Backend::Internal);
}

TEST_CASE("exit codes") {
  CHECK(exit_code_for(SolveStatus::Optimal) == 0);
  CHECK(exit_code_for(SolveStatus::Infeasible) == 2);
  CHECK(exit_code_for(SolveStatus::TimeLimit) == 3);
  CHECK(exit_code_for(SolveStatus::NodeLimit) == 3);
  CHECK(exit_code_for(SolveStatus::NumericalError) == 4);
}

TEST_CASE("plan JSON round trip") {
  const Network n = tri3();
  const PlanRun scops = run(n, Problem::Scops, 1.0, 0.7, 1.0);
  const Json doc = plan_to_json(n, *scops.plan);
  const ShutoffPlan back = plan_from_json(doc, n);
  CHECK(back.energized_lines == scops.plan->energized_lines);
  CHECK(back.committed_generators == scops.plan->committed_generators);
  CHECK(back.summary.active_risk == doctest::Approx(scops.plan->summary.active_risk));

  Json bad = doc;
  bad["energized_lines"].push_back(42);
  CHECK_THROWS_AS(plan_from_json(bad, n), InputError);
}

TEST_CASE("contingency JSON forms") {
  const ContingencySet a = contingencies_from_json(Json::parse(R"([[1], [2, 3]])"));
  REQUIRE(a.scenarios.size() == 2);
  CHECK(a.scenarios[1].id == 2);
  CHECK(a.scenarios[1].outaged_lines == std::set<int>{2, 3});
  CHECK(contingencies_from_json(contingencies_to_json(a)) == a);
  CHECK_THROWS_AS(contingencies_from_json(Json::parse(R"({"x": 1})")), InputError);
  ContingencyChoice choice;
  choice.policy = "explicit";
  choice.scenarios.scenarios = {{1, {7}}};
  CHECK_THROWS_AS(choice.resolve(tri3()), InputError);
}

TEST_CASE("solve document reports infeasibility without a plan") {
  SolveSpec spec;
  spec.problem = Problem::Ops;
  const Json doc = solve_document(tri3(1.0), spec);
  CHECK(doc["status"] == "infeasible");
  CHECK(doc["plan"].is_null());
  CHECK(doc.contains("message"));
}

TEST_CASE("scenario generation reaches the full SC-OPS optimum") {
  SolverOptions lazy;
  lazy.scenario_generation = true;
  lazy.mip_rel_gap = 1e-9;
  SolverOptions eager;
  eager.mip_rel_gap = 1e-9;
  int compared = 0;
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const Network n = seed == 1 ? tri3() : testing::random_network(seed);
    for (double beta : {0.0, 0.3}) {
      PlanningParams p;
      p.alpha = 0.8;
      p.beta = beta;
      p.flex_override = 0.5;
      const PlanRun a = run_plan(n, Problem::Scops, p, non_bridge(n), eager);
      const PlanRun b = run_plan(n, Problem::Scops, p, non_bridge(n), lazy);
      CAPTURE(seed);
      CAPTURE(beta);
      REQUIRE(a.result.status == b.result.status);
      CHECK(b.generated_scenarios);
      if (!a.plan) continue;
      ++compared;
      CHECK(*b.result.objective == doctest::Approx(*a.result.objective).epsilon(1e-9));
      CHECK(b.evaluation->worst_gamma <= beta + 1e-6);
      CHECK(b.generated_scenarios->size() <= non_bridge(n).scenarios.size());
    }
  }
  CHECK(compared >= 8);
}
