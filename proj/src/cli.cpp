#include "psps/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "psps/case_io.hpp"
#include "psps/engine.hpp"
#include "psps/error.hpp"
#include "psps/reports.hpp"
#include "psps/service.hpp"

namespace psps {

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

struct CaseFlags {
  std::string path;
  std::string risk;
  std::uint64_t risk_seed = 0;
  CLI::Option* risk_seed_opt = nullptr;

  void add(CLI::App* app) {
    app->add_option("--case", path, "network JSON or Matpower .m file")->required();
    auto* risk_opt = app->add_option("--risk", risk, "risk CSV (line_id,risk)");
    risk_seed_opt = app->add_option("--risk-seed", risk_seed, "draw uniform line risks from this seed");
    risk_opt->excludes(risk_seed_opt);
  }

  Network load() const {
    Network net = load_network_file(path);
    if (!risk.empty()) return apply_risk(std::move(net), parse_risk_csv(read_text_file(risk), net));
    if (risk_seed_opt->count()) return apply_risk(std::move(net), generate_risk(net, risk_seed));
    if (path.size() >= 2 && path.compare(path.size() - 2, 2, ".m") == 0) {
      throw InputError("a Matpower case carries no risks; pass --risk or --risk-seed");
    }
    return net;
  }
};

struct SolverFlags {
  std::string solver = "internal";
  double time_limit = 0.0;
  long node_limit = 0;
  std::uint64_t seed = 0;
  double mip_gap = 1e-6;
  int threads = 1;
  bool scenario_generation = false;
  CLI::Option* time_opt = nullptr;
  CLI::Option* node_opt = nullptr;

  void add(CLI::App* app) {
    app->add_option("--solver", solver, "internal or external:\"cmd {mps} {sol}\"");
    time_opt = app->add_option("--time-limit", time_limit, "seconds per MILP")->check(CLI::PositiveNumber);
    node_opt = app->add_option("--node-limit", node_limit, "branch-and-bound nodes per MILP")
                   ->check(CLI::PositiveNumber);
    app->add_option("--seed", seed, "solver seed");
    app->add_option("--mip-gap", mip_gap, "relative optimality gap")->check(CLI::PositiveNumber);
    app->add_option("--threads", threads, "parallel workers")->check(CLI::Range(1, 256));
    app->add_flag("--scenario-generation", scenario_generation,
                  "SC-OPS: add violated contingencies lazily instead of all up front");
  }

  SolverOptions options() const {
    SolverOptions o;
    apply_solver_choice(o, solver);
    o.mip_rel_gap = mip_gap;
    o.seed = seed;
    o.scenario_generation = scenario_generation;
    if (time_opt->count()) o.time_limit = time_limit;
    if (node_opt->count()) o.node_limit = node_limit;
    o.check();
    return o;
  }
};

struct ContingencyFlag {
  std::string value = "non-bridge";

  void add(CLI::App* app) {
    app->add_option("--contingencies", value, "non-bridge or a contingency JSON file");
  }

  ContingencyChoice choice() const;
};

Json read_json_file(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

ContingencyChoice ContingencyFlag::choice() const {
  ContingencyChoice c;
  if (value == "non-bridge") return c;
  c.policy = "explicit";
  c.scenarios = contingencies_from_json(read_json_file(value));
  return c;
}

std::optional<double> optional_value(const CLI::Option* opt, double value) {
  if (opt->count()) return value;
  return std::nullopt;
}

std::string percent(double fraction) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << 100.0 * fraction << "%";
  return s.str();
}

std::string seconds(std::chrono::steady_clock::time_point start) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(3)
    << std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() << " s";
  return s.str();
}

std::string dump(const Json& doc) { return doc.dump(2) + "\n"; }

// Writes to `path`, or to `out` when no path was given.
void emit(const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty()) {
    out << content;
  } else {
    write_file_atomic(path, content);
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Power shutoff planning toolkit", "psps"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  // convert
  CaseFlags convert_case;
  std::string convert_out;
  auto* convert = app.add_subcommand("convert", "fuse a case and risks into network JSON");
  convert_case.add(convert);
  convert->add_option("--out", convert_out, "network JSON to write");

  // riskgen
  std::string riskgen_case, riskgen_out;
  std::uint64_t riskgen_seed = 0;
  auto* riskgen = app.add_subcommand("riskgen", "write a seeded uniform risk CSV");
  riskgen->add_option("--case", riskgen_case, "network JSON or Matpower .m file")->required();
  riskgen->add_option("--seed", riskgen_seed, "random seed")->required();
  riskgen->add_option("--out", riskgen_out, "CSV to write");

  // solve
  CaseFlags solve_case;
  SolverFlags solve_solver;
  ContingencyFlag solve_cont;
  std::string problem, solve_out;
  double alpha = 1.0, beta = 0.0, solve_flex = 0.0;
  auto* solve_cmd = app.add_subcommand("solve", "solve OPS or SC-OPS");
  solve_cmd->add_option("--problem", problem, "ops or scops")->required()->check(CLI::IsMember({"ops", "scops"}));
  solve_case.add(solve_cmd);
  solve_cmd->add_option("--alpha", alpha, "minimum served fraction")->check(CLI::Range(0.0, 1.0));
  auto* beta_opt = solve_cmd->add_option("--beta", beta, "maximum additional shed per contingency")
                       ->check(CLI::Range(0.0, 1.0));
  auto* solve_flex_opt = solve_cmd->add_option("--pflex", solve_flex, "generator flexibility for every unit")
                             ->check(CLI::Range(0.0, 1.0));
  solve_cont.add(solve_cmd);
  solve_solver.add(solve_cmd);
  solve_cmd->add_option("--out", solve_out, "result JSON to write");

  // evaluate
  CaseFlags eval_case;
  SolverFlags eval_solver;
  ContingencyFlag eval_cont;
  std::string plan_path, eval_out;
  double eval_flex = 0.0;
  auto* evaluate = app.add_subcommand("evaluate", "evaluate a plan against contingencies");
  eval_case.add(evaluate);
  evaluate->add_option("--plan", plan_path, "plan JSON or solve result")->required();
  auto* eval_flex_opt = evaluate->add_option("--pflex", eval_flex, "generator flexibility for every unit")
                            ->check(CLI::Range(0.0, 1.0));
  eval_cont.add(evaluate);
  eval_solver.add(evaluate);
  evaluate->add_option("--out", eval_out, "evaluation JSON to write");

  // sweep
  CaseFlags sweep_case;
  SolverFlags sweep_solver;
  ContingencyFlag sweep_cont;
  std::string sweep_alpha, sweep_beta, sweep_out, sweep_csv;
  double sweep_flex = 0.0;
  auto* sweep_cmd = app.add_subcommand("sweep", "SC-OPS over an alpha x beta grid");
  sweep_case.add(sweep_cmd);
  sweep_cmd->add_option("--alpha", sweep_alpha, "start:stop:step, a comma list or one value")->required();
  sweep_cmd->add_option("--beta", sweep_beta, "start:stop:step, a comma list or one value")->required();
  auto* sweep_flex_opt = sweep_cmd->add_option("--pflex", sweep_flex, "generator flexibility for every unit")
                             ->check(CLI::Range(0.0, 1.0));
  sweep_cont.add(sweep_cmd);
  sweep_solver.add(sweep_cmd);
  sweep_cmd->add_option("--out", sweep_out, "sweep JSON to write");
  sweep_cmd->add_option("--csv", sweep_csv, "sweep CSV to write");

  // tradeoff
  CaseFlags trade_case;
  SolverFlags trade_solver;
  ContingencyFlag trade_cont;
  std::string trade_alpha, trade_out, trade_csv;
  double trade_beta = 0.0, trade_flex = 0.0;
  auto* tradeoff = app.add_subcommand("tradeoff", "OPS and SC-OPS risk over alpha");
  trade_case.add(tradeoff);
  tradeoff->add_option("--alpha", trade_alpha, "start:stop:step, a comma list or one value")->required();
  tradeoff->add_option("--beta", trade_beta, "SC-OPS shed bound")->check(CLI::Range(0.0, 1.0));
  auto* trade_flex_opt = tradeoff->add_option("--pflex", trade_flex, "generator flexibility for every unit")
                             ->check(CLI::Range(0.0, 1.0));
  trade_cont.add(tradeoff);
  trade_solver.add(tradeoff);
  tradeoff->add_option("--out", trade_out, "curves JSON to write");
  tradeoff->add_option("--csv", trade_csv, "curves CSV to write");

  // serve
  ServiceConfig serve_config = ServiceConfig::from_env();
  std::string serve_solver = "internal";
  auto* serve = app.add_subcommand("serve", "start the HTTP job service");
  serve->add_option("--data-dir", serve_config.data_dir, "case and result store");
  serve->add_option("--host", serve_config.host, "listen address");
  serve->add_option("--port", serve_config.port, "listen port")->check(CLI::Range(0, 65535));
  serve->add_option("--workers", serve_config.workers, "concurrent jobs")->check(CLI::Range(1, 256));
  serve->add_option("--threads", serve_config.threads, "workers inside one job")->check(CLI::Range(1, 256));
  serve->add_option("--static", serve_config.static_dir, "directory of web UI assets");
  serve->add_option("--solver", serve_solver, "internal or external:\"cmd {mps} {sol}\"");
  serve->add_flag("--scenario-generation", serve_config.options.scenario_generation,
                  "SC-OPS: add violated contingencies lazily instead of all up front");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "psps: " << e.what() << "\n";
    return 1;
  }

  const auto start = std::chrono::steady_clock::now();
  try {
    if (*convert) {
      emit(convert_out, dump(network_to_json(convert_case.load())), out);
      return 0;
    }

    if (*riskgen) {
      const Network net = load_network_file(riskgen_case);
      emit(riskgen_out, write_risk_csv(generate_risk(net, riskgen_seed)), out);
      return 0;
    }

    if (*solve_cmd) {
      SolveSpec spec;
      spec.problem = problem == "ops" ? Problem::Ops : Problem::Scops;
      if (spec.problem == Problem::Ops && beta_opt->count()) throw InputError("--beta applies to scops only");
      spec.params.alpha = alpha;
      spec.params.beta = beta;
      spec.params.flex_override = optional_value(solve_flex_opt, solve_flex);
      spec.contingencies = solve_cont.choice();
      spec.options = solve_solver.options();
      spec.threads = solve_solver.threads;
      const Network net = solve_case.load();
      PlanRun run;
      const Json doc = solve_document(net, spec, &run);
      std::ostream& summary = solve_out.empty() ? err : out;
      emit(solve_out, dump(doc), out);
      summary << "status: " << to_string(run.result.status) << "\n";
      if (run.plan) {
        summary << "objective (energized risk): " << *run.result.objective << "\n"
                << "load served: " << percent(run.plan->summary.load_served_fraction) << "\n"
                << "active risk: " << percent(run.plan->summary.active_risk) << "\n";
        if (run.evaluation && run.evaluation->worst_contingency) {
          summary << "worst-case additional shed: " << percent(run.evaluation->worst_gamma) << " (contingency "
                  << *run.evaluation->worst_contingency << ")\n";
        }
      } else if (!run.result.diagnostic.empty()) {
        summary << "note: " << run.result.diagnostic << "\n";
      }
      summary << "wall time: " << seconds(start) << "\n";
      return exit_code_for(run.result.status);
    }

    if (*evaluate) {
      EvaluateSpec spec;
      spec.contingencies = eval_cont.choice();
      spec.flex = optional_value(eval_flex_opt, eval_flex);
      spec.options = eval_solver.options();
      spec.threads = eval_solver.threads;
      const Network net = eval_case.load();
      const ShutoffPlan plan = plan_from_json(read_json_file(plan_path), net);
      const Json doc = evaluate_document(net, plan, spec);
      std::ostream& summary = eval_out.empty() ? err : out;
      emit(eval_out, dump(doc), out);
      summary << "load served: " << percent(plan.summary.load_served_fraction) << "\n"
              << "active risk: " << percent(plan.summary.active_risk) << "\n";
      const Json& worst = doc["evaluation"]["worst_case"];
      if (!worst.is_null()) {
        summary << "worst-case additional shed: " << percent(worst["gamma"].get<double>()) << " (contingency "
                << worst["contingency_id"].get<int>() << ")\n";
      }
      summary << "wall time: " << seconds(start) << "\n";
      return 0;
    }

    if (*sweep_cmd) {
      SweepSpec spec;
      spec.alpha_grid = parse_range(sweep_alpha);
      spec.beta_grid = parse_range(sweep_beta);
      spec.flex = optional_value(sweep_flex_opt, sweep_flex);
      spec.contingencies = sweep_cont.choice();
      spec.options = sweep_solver.options();
      spec.threads = sweep_solver.threads;
      const Network net = sweep_case.load();
      const ContingencySet set = spec.contingencies.resolve(net);
      const SweepResult result = sweep(net, spec.alpha_grid, spec.beta_grid, set, spec.flex, spec.options,
                                       spec.threads);
      Json doc = sweep_to_json(result);
      doc["contingency_policy"] = spec.contingencies.policy;
      if (!sweep_csv.empty()) write_file_atomic(sweep_csv, sweep_to_csv(result));
      std::ostream& summary = sweep_out.empty() ? err : out;
      emit(sweep_out, dump(doc), out);
      summary << "active risk (rows alpha, columns beta; x = infeasible)\n" << std::setw(8) << "";
      for (double b : result.beta_axis) summary << std::setw(9) << b;
      summary << "\n";
      for (const auto& row : result.cells) {
        summary << std::setw(8) << row.front().alpha;
        for (const auto& cell : row) {
          if (cell.active_risk) {
            summary << std::setw(9) << percent(*cell.active_risk);
          } else {
            summary << std::setw(9) << (cell.status == SolveStatus::Infeasible ? "x" : "?");
          }
        }
        summary << "\n";
      }
      summary << "wall time: " << seconds(start) << "\n";
      return 0;
    }

    if (*tradeoff) {
      const std::vector<double> grid = parse_range(trade_alpha);
      const ContingencyChoice choice = trade_cont.choice();
      const SolverOptions options = trade_solver.options();
      const Network net = trade_case.load();
      const TradeoffCurves curves = tradeoff_curves(net, grid, trade_beta, choice.resolve(net),
                                                    optional_value(trade_flex_opt, trade_flex), options,
                                                    trade_solver.threads);
      if (!trade_csv.empty()) write_file_atomic(trade_csv, tradeoff_to_csv(curves));
      std::ostream& summary = trade_out.empty() ? err : out;
      emit(trade_out, dump(tradeoff_to_json(curves)), out);
      summary << "wall time: " << seconds(start) << "\n";
      return 0;
    }

    if (*serve) {
      apply_solver_choice(serve_config.options, serve_solver);
      Service service(serve_config);
      const int port = service.start();
      out << "serving on http://" << serve_config.host << ":" << port << " (data in " << serve_config.data_dir
          << ")" << std::endl;
      g_stop = false;
      auto previous_int = std::signal(SIGINT, on_signal);
      auto previous_term = std::signal(SIGTERM, on_signal);
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(200));
      service.stop();
      std::signal(SIGINT, previous_int);
      std::signal(SIGTERM, previous_term);
      return 0;
    }
  } catch (const InputError& e) {
    err << "psps: " << e.what() << "\n";
    return 1;
  } catch (const EnvironmentError& e) {
    err << "psps: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "psps: internal error: " << e.what() << "\n";
    return 4;
  }
  return 4;
}

}  // namespace psps
