#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <unistd.h>
#include <unordered_map>

#include "psps/case_io.hpp"
#include "psps/error.hpp"
#include "psps/solver.hpp"

namespace psps {

namespace {

namespace fs = std::filesystem;

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
  return s;
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

SolveStatus status_from_text(const std::string& raw) {
  const std::string s = lower(raw);
  if (s.starts_with("optimal")) return SolveStatus::Optimal;
  if (s.find("infeasible or unbounded") != std::string::npos) return SolveStatus::Infeasible;
  if (s.find("infeasible") != std::string::npos) return SolveStatus::Infeasible;
  if (s.find("unbounded") != std::string::npos) return SolveStatus::Unbounded;
  if (s.find("time") != std::string::npos) return SolveStatus::TimeLimit;
  if (s.find("node") != std::string::npos) return SolveStatus::NodeLimit;
  return SolveStatus::NumericalError;
}

class TempDir {
 public:
  TempDir() {
    static std::atomic<unsigned> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = fs::temp_directory_path() /
            ("psps-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + "-" +
             std::to_string(stamp));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

}  // namespace

SolveResult parse_solution_file(const MilpModel& model, const std::string& text) {
  std::unordered_map<std::string, std::size_t> by_name;
  for (std::size_t j = 0; j < model.num_variables(); ++j) {
    by_name.emplace(mangle_name(model.variables()[j].name), j);
  }
  std::istringstream in(text);
  std::string line;
  SolveResult result;
  Assignment values(model.num_variables(), 0.0);
  std::vector<bool> seen(model.num_variables(), false);

  auto record = [&](const std::string& name, const std::string& value) {
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw ExternalSolverError("solution names unknown column '" + name + "'");
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (end == value.c_str()) throw ExternalSolverError("unparsable value '" + value + "' for " + name);
    values[it->second] = v;
    seen[it->second] = true;
  };

  std::getline(in, line);
  if (line.starts_with("Model status")) {
    // HiGHS raw solution format
    std::getline(in, line);
    result.status = status_from_text(line);
    bool have_values = false;
    while (std::getline(in, line)) {
      if (line.starts_with("# Primal solution values")) {
        std::getline(in, line);
        have_values = lower(line).starts_with("feasible") || lower(line).starts_with("infeasible");
        if (!have_values) break;
        continue;
      }
      if (line.starts_with("# Columns")) {
        const long count = std::strtol(line.c_str() + 9, nullptr, 10);
        for (long k = 0; k < count; ++k) {
          if (!std::getline(in, line)) throw ExternalSolverError("truncated HiGHS solution file");
          std::istringstream row(line);
          std::string name, value;
          if (!(row >> name >> value)) throw ExternalSolverError("bad HiGHS column line: " + line);
          record(name, value);
        }
        break;
      }
    }
    if (!have_values) values.clear();
  } else {
    // CBC: "<status> - objective value <v>" then "<index> <name> <value> <reduced cost>"
    const auto dash = line.find(" - ");
    if (dash == std::string::npos && lower(line).find("objective value") == std::string::npos) {
      throw ExternalSolverError("unrecognized solution file header: " + line);
    }
    result.status = status_from_text(line.substr(0, dash));
    while (std::getline(in, line)) {
      std::istringstream row(line);
      std::string first;
      if (!(row >> first)) continue;
      if (first == "**") row >> first;
      std::string name, value;
      if (!(row >> name >> value)) throw ExternalSolverError("bad CBC solution line: " + line);
      record(name, value);
    }
    if (result.status == SolveStatus::Infeasible || result.status == SolveStatus::Unbounded) {
      values.clear();
    }
  }
  if (!values.empty()) {
    for (std::size_t j = 0; j < seen.size(); ++j) {
      // solvers may omit columns at zero; only bounds that exclude zero matter
      const auto& v = model.variables()[j];
      if (!seen[j] && (v.lower > 0.0 || v.upper < 0.0)) {
        throw ExternalSolverError("solution omits column " + v.name);
      }
    }
    result.assignment = std::move(values);
    result.objective = objective_value(model, result.assignment);
  }
  return result;
}

SolveResult solve_external(const MilpModel& model, const SolverOptions& options) {
  options.check();
  if (options.external_command.empty()) {
    throw InputError("external backend needs a command template");
  }
  const auto start = std::chrono::steady_clock::now();
  TempDir dir;
  const fs::path mps = dir.path() / "model.mps";
  const fs::path sol = dir.path() / "model.sol";
  write_file_atomic(mps.string(), write_mps(model));

  std::string command = replace_all(options.external_command, "{mps}", shell_quote(mps.string()));
  command = replace_all(command, "{sol}", shell_quote(sol.string()));
  command += " > " + shell_quote((dir.path() / "solver.log").string()) + " 2>&1";
  const int raw = std::system(command.c_str());
  if (raw == -1) throw EnvironmentError("cannot start a shell for the external solver");
  const int code = WIFEXITED(raw) ? WEXITSTATUS(raw) : 128;
  if (code == 127 || code == 126) {
    throw EnvironmentError("external solver command not found or not executable: " + options.external_command);
  }
  if (code != 0) {
    std::string log;
    try {
      log = read_text_file((dir.path() / "solver.log").string());
    } catch (const Error&) {
    }
    if (log.size() > 400) log = log.substr(log.size() - 400);
    throw ExternalSolverError("external solver exited with status " + std::to_string(code) + ": " + log);
  }
  if (!fs::exists(sol)) throw ExternalSolverError("external solver wrote no solution file");

  SolveResult result = parse_solution_file(model, read_text_file(sol.string()));
  result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  result.nodes_explored = 0;
  if (result.has_solution()) {
    const double tol = std::max(options.feasibility_tol, 1e-6);
    const AuditReport report = audit(model, result.assignment, tol);
    if (!report.clean()) {
      const auto& v = report.violations.front();
      throw IntegrityError("external solution fails audit at " + std::to_string(tol) + ": " + v.label +
                           " violated by " + std::to_string(v.magnitude));
    }
    result.objective = report.objective;
    if (result.status == SolveStatus::Optimal) {
      result.best_bound = report.objective;
      result.gap = 0.0;
    }
  } else if (result.status == SolveStatus::Optimal) {
    throw ExternalSolverError("external solver reported optimal without a solution");
  }
  return result;
}

}  // namespace psps
