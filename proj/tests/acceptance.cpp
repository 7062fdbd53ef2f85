// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "psps/analysis.hpp"
#include "psps/case_io.hpp"
#include "psps/cli.hpp"
#include "psps/error.hpp"
#include "psps/formulations.hpp"
#include "psps/oracle.hpp"
#include "psps/solver.hpp"
#include "support.hpp"

using namespace psps;
using psps::testing::random_network;
using psps::testing::tri3;
namespace fs = std::filesystem;

namespace {

const std::string kData = std::string(PSPS_SOURCE_DIR) + "/data/";

// Tallies shared by the audit and shed-bound criteria.
struct Ledger {
  long optimal = 0;
  long audit_failures = 0;
  long scops_checked = 0;
  long shed_violations = 0;
  double worst_excess = -1.0;
  std::string first_problem;

  void note(const std::string& what) {
    if (first_problem.empty()) first_problem = what;
  }
} ledger;

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
  std::cout << (ok ? "PASS" : "FAIL") << "  " << name << ": " << detail << std::endl;
  if (!ok) ++failures;
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

SolverOptions exact() {
  SolverOptions o;
  o.mip_rel_gap = 1e-9;
  return o;
}

ContingencySet non_bridge(const Network& n) {
  return build_contingency_set(n, ContingencyPolicy::all_non_bridge());
}

// Bookkeeping for a finished run: audit-clean extraction and the shed bound.
void record(const PlanRun& run, const std::string& label) {
  if (run.result.status == SolveStatus::Optimal) ++ledger.optimal;
  if (run.problem != Problem::Scops || !run.evaluation) return;
  ++ledger.scops_checked;
  const double excess = run.evaluation->worst_gamma - run.params.beta;
  ledger.worst_excess = std::max(ledger.worst_excess, excess);
  if (excess > 1e-6) {
    ++ledger.shed_violations;
    ledger.note(label + ": worst gamma " + fmt(run.evaluation->worst_gamma) + " above beta");
  }
}

// Solves, audits explicitly at 1e-6, extracts and evaluates with CE.
PlanRun solve_checked(const Network& n, Problem problem, const PlanningParams& params, const ContingencySet& set,
                      const SolverOptions& options, const std::string& label) {
  if (options.scenario_generation) {
    PlanRun run;
    try {
      run = run_plan(n, problem, params, set, options);
    } catch (const IntegrityError& e) {
      ++ledger.audit_failures;
      ledger.note(label + ": " + e.what());
      return run;
    }
    record(run, label);
    return run;
  }
  PlanRun run;
  run.problem = problem;
  run.params = params;
  const BigMBounds bigm = compute_big_m(n);
  auto [model, map] = problem == Problem::Ops ? build_ops(n, params, bigm) : build_scops(n, params, set, bigm);
  run.result = solve(model, options);
  if (run.result.status == SolveStatus::Optimal) {
    const AuditReport a = audit(model, run.result.assignment, 1e-6);
    if (!a.clean()) {
      ++ledger.audit_failures;
      ledger.note(label + ": audit found " + std::to_string(a.violations.size()) + " violations");
      return run;
    }
  }
  if (run.result.has_solution()) {
    run.plan = extract_plan(model, map, run.result.assignment, n);
    run.evaluation = evaluate_plan(n, *run.plan, set, params.flex_override, options);
  }
  record(run, label);
  return run;
}

bool same_outcome(const PlanRun& run, const OracleResult& oracle, double tol, std::string& why) {
  if (run.result.status == SolveStatus::Infeasible && !oracle.feasible) return true;
  if (run.result.status == SolveStatus::Optimal && oracle.feasible) {
    if (std::abs(*run.result.objective - oracle.objective) <= tol) return true;
    why = "objective " + fmt(*run.result.objective, 10) + " vs oracle " + fmt(oracle.objective, 10);
    return false;
  }
  why = std::string("status ") + to_string(run.result.status) + " vs oracle " +
        (oracle.feasible ? "feasible" : "infeasible");
  return false;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  int cases = 0, mismatches = 0, feasible = 0;
  std::string first;
  for (int k = 0; k <= 50; ++k) {
    const Network n = k == 0 ? tri3() : random_network(static_cast<std::uint64_t>(k));
    const ContingencySet set = non_bridge(n);
    const std::string name = k == 0 ? "TRI3" : "seed " + std::to_string(k);
    auto check = [&](Problem problem, const PlanningParams& p, const ContingencySet& s, const std::string& label) {
      const PlanRun run = solve_checked(n, problem, p, s, exact(), name + " " + label);
      const OracleResult oracle = enumerate_oracle(n, p, s);
      ++cases;
      if (oracle.feasible) ++feasible;
      std::string why;
      if (!same_outcome(run, oracle, 1e-6, why)) {
        ++mismatches;
        if (first.empty()) first = name + " " + label + ": " + why;
      }
    };
    PlanningParams ops;
    ops.alpha = 0.8;
    check(Problem::Ops, ops, {}, "OPS");
    for (double beta : {0.0, 0.25, 0.5, 1.0}) {
      for (double flex : {0.05, 1.0}) {
        PlanningParams p;
        p.alpha = 0.8;
        p.beta = beta;
        p.flex_override = flex;
        check(Problem::Scops, p, set, "SC-OPS beta=" + fmt(beta) + " flex=" + fmt(flex));
      }
    }
  }
  report(mismatches == 0, "oracle equivalence",
         std::to_string(cases) + " OPS/SC-OPS instances on TRI3 + 50 random networks at alpha=0.8 (" +
             std::to_string(feasible) + " feasible), " + std::to_string(mismatches) + " mismatches, " +
             fmt(seconds_since(t0), 3) + " s" + (first.empty() ? "" : "; first: " + first));
}

void tri3_ladder() {
  const Network n = tri3();
  const ContingencySet set = non_bridge(n);
  struct Rung {
    Problem problem;
    double beta;
    double expected;
  };
  const Rung rungs[] = {{Problem::Ops, 0.0, 0.3}, {Problem::Scops, 0.0, 1.2}, {Problem::Scops, 0.7, 1.1},
                        {Problem::Scops, 1.0, 0.3}};
  bool ok = true;
  std::string detail;
  for (const auto& r : rungs) {
    PlanningParams p;
    p.alpha = 1.0;
    p.beta = r.beta;
    if (r.problem == Problem::Scops) p.flex_override = 1.0;
    const ContingencySet s = r.problem == Problem::Scops ? set : ContingencySet{};
    const PlanRun run = solve_checked(n, r.problem, p, s, exact(), "TRI3 ladder");
    const OracleResult oracle = enumerate_oracle(n, p, s);
    const double got = run.result.objective.value_or(NAN);
    const bool rung_ok = std::abs(got - r.expected) <= 1e-6 && oracle.feasible &&
                         std::abs(oracle.objective - r.expected) <= 1e-6;
    ok = ok && rung_ok;
    detail += std::string(detail.empty() ? "" : ", ") + (r.problem == Problem::Ops ? "OPS" : "SC-OPS beta=" + fmt(r.beta)) +
              " " + fmt(got) + " (oracle " + fmt(oracle.objective) + ")";
  }
  report(ok, "TRI3 ladder", detail);
}

void collapse() {
  int cases = 0, mismatches = 0;
  std::string first;
  for (int k = 0; k <= 10; ++k) {
    const Network n = k == 0 ? tri3() : random_network(static_cast<std::uint64_t>(100 + k));
    PlanningParams ops;
    ops.alpha = k == 0 ? 1.0 : 0.8;
    PlanningParams sc = ops;
    sc.beta = 1.0;
    sc.flex_override = 1.0;
    const PlanRun a = solve_checked(n, Problem::Ops, ops, {}, exact(), "collapse OPS");
    const PlanRun b = solve_checked(n, Problem::Scops, sc, non_bridge(n), exact(), "collapse SC-OPS");
    ++cases;
    const bool same = a.result.status == b.result.status &&
                      (!a.result.objective || std::abs(*a.result.objective - *b.result.objective) <= 1e-6);
    if (!same) {
      ++mismatches;
      if (first.empty()) first = k == 0 ? "TRI3" : "seed " + std::to_string(100 + k);
    }
  }
  report(mismatches == 0, "collapse at beta=1, flex=1",
         std::to_string(cases) + " networks (TRI3 + seeds 101-110), " + std::to_string(mismatches) + " mismatches" +
             (first.empty() ? "" : "; first: " + first));
}

struct Case39Runs {
  bool available = false;
  std::string mode;
  std::optional<PlanRun> scops_095_010;
};

Case39Runs case39_monotonicity() {
  Case39Runs out;
  const auto t0 = std::chrono::steady_clock::now();
  Network n = load_network_file(kData + "case39.m");
  n = apply_risk(n, generate_risk(n, 42));
  ContingencySet set = non_bridge(n);
  SolverOptions options;
  if (testing::highs_available()) {
    options.backend = SolverOptions::Backend::External;
    options.external_command = testing::highs_command();
  }
  options.scenario_generation = true;
  set.scenarios.resize(10);
  out.mode = std::string(options.backend == SolverOptions::Backend::External ? "HiGHS" : "internal") +
             ", first 10 of 35 scenarios, scenario generation";

  const std::vector<double> alphas{0.80, 0.85, 0.90, 0.95};
  const std::vector<double> betas{0.00, 0.05, 0.10};
  std::map<std::pair<int, int>, PlanRun> cells;
  int undecided = 0;
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    for (std::size_t b = 0; b < betas.size(); ++b) {
      PlanningParams p;
      p.alpha = alphas[a];
      p.beta = betas[b];
      p.flex_override = 0.05;
      PlanRun run = solve_checked(n, Problem::Scops, p, set, options,
                                  "case39 alpha=" + fmt(p.alpha) + " beta=" + fmt(p.beta));
      if (run.result.status != SolveStatus::Optimal && run.result.status != SolveStatus::Infeasible) ++undecided;
      cells.emplace(std::pair{static_cast<int>(a), static_cast<int>(b)}, std::move(run));
    }
  }
  int violations = 0;
  std::string first;
  auto objective = [&](int a, int b) -> std::optional<double> {
    const PlanRun& r = cells.at({a, b});
    if (r.result.status != SolveStatus::Optimal) return std::nullopt;
    return r.result.objective;
  };
  auto infeasible = [&](int a, int b) { return cells.at({a, b}).result.status == SolveStatus::Infeasible; };
  std::ostringstream grid;
  for (int a = 0; a < 4; ++a) {
    grid << (a ? " | " : "") << "a=" << alphas[static_cast<std::size_t>(a)] << ":";
    for (int b = 0; b < 3; ++b) {
      const auto o = objective(a, b);
      grid << " " << (o ? fmt(*o, 5) : infeasible(a, b) ? "inf" : "?");
      if (b + 1 < 3) {
        const auto hi = objective(a, b + 1);
        if (o && (!hi || *hi > *o + 1e-6)) {
          ++violations;
          if (first.empty()) first = "beta step at alpha=" + fmt(alphas[static_cast<std::size_t>(a)]);
        }
      }
      if (a > 0) {
        const auto lo_alpha = objective(a - 1, b);
        if (o && (!lo_alpha || *lo_alpha > *o + 1e-6)) {
          ++violations;
          if (first.empty()) first = "alpha step at beta=" + fmt(betas[static_cast<std::size_t>(b)]);
        }
      }
    }
  }
  report(violations == 0 && undecided == 0, "case39 monotonicity",
         out.mode + "; risk by cell [" + grid.str() + "]; " + std::to_string(violations) + " violations, " +
             std::to_string(undecided) + " undecided, " + fmt(seconds_since(t0), 4) + " s" +
             (first.empty() ? "" : "; first: " + first));
  out.available = true;
  return out;
}

void case39_ops_gap() {
  const auto t0 = std::chrono::steady_clock::now();
  Network n = load_network_file(kData + "case39.m");
  n = apply_risk(n, generate_risk(n, 42));
  const ContingencySet set = non_bridge(n);
  SolverOptions options;
  if (testing::highs_available()) {
    options.backend = SolverOptions::Backend::External;
    options.external_command = testing::highs_command();
  }
  options.scenario_generation = true;
  PlanningParams ops;
  ops.alpha = 0.95;
  ops.flex_override = 0.05;
  PlanningParams sc = ops;
  sc.beta = 0.10;
  const PlanRun a = solve_checked(n, Problem::Ops, ops, set, options, "case39 OPS 0.95");
  const PlanRun b = solve_checked(n, Problem::Scops, sc, set, options, "case39 SC-OPS 0.95/0.10");
  if (!a.evaluation || !b.evaluation || b.result.status != SolveStatus::Optimal) {
    report(false, "case39 OPS vulnerability gap",
           std::string("no plan (OPS ") + to_string(a.result.status) + ", SC-OPS " + to_string(b.result.status) + ")");
    return;
  }
  const double ga = a.evaluation->worst_gamma;
  const double gb = b.evaluation->worst_gamma;
  report(ga > gb && gb <= 0.10 + 1e-6, "case39 OPS vulnerability gap",
         "all 35 scenarios, flex 0.05: OPS(0.95) worst gamma " + fmt(ga, 4) + " (risk " +
             fmt(*a.result.objective, 6) + ") vs SC-OPS(0.95, 0.10) worst gamma " + fmt(gb, 4) + " (risk " +
             fmt(*b.result.objective, 6) + "), " + fmt(seconds_since(t0), 4) + " s");
}

bool connected_without(const Network& n, std::size_t skip) {
  std::map<int, std::vector<int>> adj;
  for (std::size_t k = 0; k < n.lines.size(); ++k) {
    if (k == skip) continue;
    adj[n.lines[k].from_bus].push_back(n.lines[k].to_bus);
    adj[n.lines[k].to_bus].push_back(n.lines[k].from_bus);
  }
  std::set<int> seen{n.lines[skip].from_bus};
  std::vector<int> stack{n.lines[skip].from_bus};
  while (!stack.empty()) {
    const int b = stack.back();
    stack.pop_back();
    for (int o : adj[b]) {
      if (seen.insert(o).second) stack.push_back(o);
    }
  }
  return seen.count(n.lines[skip].to_bus) > 0;
}

void bridge_count() {
  Network n = load_network_file(kData + "case39.m");
  const std::size_t scenarios = non_bridge(n).scenarios.size();
  int mismatches = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    Rng rng(seed * 104729);
    Network g;
    const int buses = rng.uniform_int(2, 12);
    for (int i = 1; i <= buses; ++i) g.buses.push_back({i, ""});
    const int lines = rng.uniform_int(1, 16);
    for (int k = 1; k <= lines; ++k) {
      const int a = rng.uniform_int(1, buses);
      int b = rng.uniform_int(1, buses - 1);
      if (b >= a) ++b;
      g.lines.push_back({k, a, b, 1.0, 1.0, 0.0});
    }
    std::set<int> brute;
    for (std::size_t k = 0; k < g.lines.size(); ++k) {
      if (!connected_without(g, k)) brute.insert(g.lines[k].id);
    }
    if (find_bridges(g) != brute) ++mismatches;
  }
  report(scenarios == 35 && mismatches == 0, "bridge count",
         "case39 has " + std::to_string(scenarios) + " non-bridge scenarios; bridges differ from brute force on " +
             std::to_string(mismatches) + " of 100 random graphs");
}

void audit_integrity() {
  std::string roundtrip = "external solver not present, round trip skipped";
  bool round_ok = true;
  if (testing::highs_available()) {
    SolverOptions ext;
    ext.backend = SolverOptions::Backend::External;
    ext.external_command = testing::highs_command();
    ext.mip_rel_gap = 1e-9;
    int compared = 0, off = 0;
    double worst = 0.0;
    for (int k = 0; k <= 5; ++k) {
      const Network n = k == 0 ? tri3() : random_network(static_cast<std::uint64_t>(200 + k));
      for (Problem problem : {Problem::Ops, Problem::Scops}) {
        PlanningParams p;
        p.alpha = k == 0 ? 1.0 : 0.7;
        p.beta = problem == Problem::Scops ? 0.5 : 0.0;
        p.flex_override = 1.0;
        const ContingencySet set = problem == Problem::Scops ? non_bridge(n) : ContingencySet{};
        const PlanRun a = solve_checked(n, problem, p, set, exact(), "round trip internal");
        const PlanRun b = solve_checked(n, problem, p, set, ext, "round trip external");
        ++compared;
        if (a.result.status != b.result.status) {
          ++off;
          continue;
        }
        if (a.result.objective) {
          const double rel = std::abs(*a.result.objective - *b.result.objective) /
                             std::max(1.0, std::abs(*a.result.objective));
          worst = std::max(worst, rel);
          if (rel > 1e-5) ++off;
        }
      }
    }
    round_ok = off == 0;
    roundtrip = "MPS round trip through HiGHS on TRI3 + 5 random networks: " + std::to_string(compared) +
                " models, " + std::to_string(off) + " disagreements, worst relative difference " + fmt(worst, 3);
  }
  report(ledger.audit_failures == 0 && ledger.optimal > 0 && round_ok, "audit integrity",
         std::to_string(ledger.optimal) + " optimal results audited at 1e-6, " +
             std::to_string(ledger.audit_failures) + " failures; " + roundtrip +
             (ledger.first_problem.empty() ? "" : "; first: " + ledger.first_problem));
}

void shed_bound() {
  report(ledger.shed_violations == 0 && ledger.scops_checked > 0, "SC-OPS plans respect beta under CE",
         std::to_string(ledger.scops_checked) + " SC-OPS plans re-evaluated with CE, " +
             std::to_string(ledger.shed_violations) + " with max gamma > beta + 1e-6 (largest gamma - beta " +
             fmt(ledger.worst_excess, 3) + ")");
}

void determinism() {
  const fs::path dir = fs::temp_directory_path() / ("psps-acceptance-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::vector<std::string> cases{kData + "tri3.json", kData + "tri3-smallgen.json"};
  for (std::uint64_t seed : {301, 302, 303}) {
    const std::string path = (dir / ("net" + std::to_string(seed) + ".json")).string();
    write_file_atomic(path, network_to_json(random_network(seed)).dump(2));
    cases.push_back(path);
  }
  int runs = 0, differ = 0;
  for (const auto& c : cases) {
    for (const char* problem : {"ops", "scops"}) {
      std::vector<std::string> outputs;
      for (int rep = 0; rep < 2; ++rep) {
        const std::string out = (dir / ("out" + std::to_string(rep) + ".json")).string();
        std::ostringstream sink, err;
        std::vector<std::string> args{"solve", "--problem", problem, "--case", c, "--alpha", "0.8", "--threads", "1",
                                      "--out", out};
        if (std::string(problem) == "scops") args.insert(args.end(), {"--beta", "0.25"});
        run_cli(args, sink, err);
        outputs.push_back(fs::exists(out) ? read_text_file(out) : "");
        fs::remove(out);
      }
      ++runs;
      if (outputs[0].empty() || outputs[0] != outputs[1]) ++differ;
    }
  }
  fs::remove_all(dir);
  report(differ == 0, "CLI determinism",
         std::to_string(runs) + " repeated solve invocations, " + std::to_string(differ) + " differing outputs");
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    oracle_equivalence();
    tri3_ladder();
    collapse();
    case39_monotonicity();
    case39_ops_gap();
    bridge_count();
    determinism();
    audit_integrity();
    shed_bound();
  } catch (const std::exception& e) {
    std::cout << "FAIL  acceptance run aborted: " << e.what() << std::endl;
    return 1;
  }
  std::cout << (failures == 0 ? "all criteria met" : std::to_string(failures) + " criteria failed") << " in "
            << fmt(seconds_since(t0), 4) << " s" << std::endl;
  return failures == 0 ? 0 : 1;
}
