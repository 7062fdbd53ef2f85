#include "psps/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include "psps/error.hpp"
#include "simplex.hpp"

namespace psps {

namespace {

using Clock = std::chrono::steady_clock;
using detail::BoundedSimplex;
using detail::LpData;
using detail::LpStatus;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::optional<Clock::time_point> deadline_from(const SolverOptions& options, Clock::time_point start) {
  if (!options.time_limit) return std::nullopt;
  return start + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(*options.time_limit));
}

detail::SimplexTolerances tolerances_for(const SolverOptions& options) {
  detail::SimplexTolerances tol;
  tol.primal = std::min(1e-9, options.feasibility_tol * 0.01);
  return tol;
}

/// z_a <= z_b rows between two binaries, used to propagate rounded values.
struct Implication {
  int implied;   // z_a
  int premise;   // z_b
};

std::vector<Implication> binary_implications(const MilpModel& model) {
  std::vector<Implication> out;
  for (const auto& row : model.constraints()) {
    if (row.terms.size() != 2 || row.rhs != 0.0 || row.sense == Sense::Equal) continue;
    const auto& a = row.terms[0];
    const auto& b = row.terms[1];
    if (!model.variable(a.var).binary || !model.variable(b.var).binary) continue;
    if (a.coef != -b.coef) continue;
    // a.coef * z_a - a.coef * z_b (sense) 0
    const bool a_le_b = (row.sense == Sense::LessEqual) == (a.coef > 0);
    if (a_le_b) {
      out.push_back({a.var.index, b.var.index});
    } else {
      out.push_back({b.var.index, a.var.index});
    }
  }
  return out;
}

struct Node {
  std::vector<std::int8_t> fixed;  // per binary: -1 free, 0, 1
  double bound = -kInf;
  long id = 0;
};

class BranchAndBound {
 public:
  BranchAndBound(const MilpModel& model, const SolverOptions& options)
      : model_(model), options_(options), lp_(LpData::from_model(model)), tol_(tolerances_for(options)) {
    for (std::size_t j = 0; j < model.num_variables(); ++j) {
      if (model.variables()[j].binary) binaries_.push_back(static_cast<int>(j));
    }
    implications_ = binary_implications(model);
  }

  SolveResult run() {
    const auto start = Clock::now();
    deadline_ = deadline_from(options_, start);
    SolveResult result;

    BoundedSimplex work(lp_, tol_);
    work.set_deadline(deadline_);
    const LpStatus root = work.solve_primal();
    if (root != LpStatus::Optimal) {
      result.status = map_status(root);
      result.diagnostic = "root relaxation: " + describe(root);
      result.nodes_explored = 1;
      result.wall_time = seconds_since(start);
      return result;
    }

    std::vector<Node> open;
    Node current{std::vector<std::int8_t>(binaries_.size(), -1), -kInf, next_id_++};
    bool have_current = true;
    bool numerical_trouble = false;
    bool stopped = false;
    SolveStatus stop_status = SolveStatus::Optimal;
    LpStatus status = root;

    while (true) {
      if (!have_current) {
        if (open.empty()) break;
        const std::size_t pick = select(open);
        current = std::move(open[pick]);
        open.erase(open.begin() + static_cast<std::ptrdiff_t>(pick));
        if (pruned(current.bound)) continue;
        apply_fixings(work, current.fixed);
        status = work.solve_dual();
        have_current = true;
      }
      if (options_.node_limit && nodes_ >= *options_.node_limit) {
        stopped = true;
        stop_status = SolveStatus::NodeLimit;
        open.push_back(std::move(current));
        break;
      }
      if (deadline_ && Clock::now() > *deadline_) {
        stopped = true;
        stop_status = SolveStatus::TimeLimit;
        open.push_back(std::move(current));
        break;
      }
      ++nodes_;
      have_current = false;

      if (status == LpStatus::TimeLimit) {
        stopped = true;
        stop_status = SolveStatus::TimeLimit;
        open.push_back(std::move(current));
        break;
      }
      if (status != LpStatus::Optimal && status != LpStatus::Infeasible) {
        // retry from a clean slack basis before giving up on the node
        BoundedSimplex fresh(lp_, tol_);
        fresh.set_deadline(deadline_);
        apply_fixings(fresh, current.fixed);
        status = fresh.solve_primal();
        if (status == LpStatus::Optimal) {
          work = std::move(fresh);
        } else if (status != LpStatus::Infeasible) {
          numerical_trouble = true;
          continue;
        }
      }
      if (status == LpStatus::Infeasible) continue;

      const double bound = work.objective();
      if (pruned(bound)) continue;
      const std::vector<double> x = work.primal();

      int branch = -1;
      double most = options_.integrality_tol;
      for (std::size_t k = 0; k < binaries_.size(); ++k) {
        if (current.fixed[k] >= 0) continue;
        const double v = x[static_cast<std::size_t>(binaries_[k])];
        const double frac = std::abs(v - std::round(v));
        if (frac > most) {
          most = frac;
          branch = static_cast<int>(k);
        }
      }
      if (branch < 0) {
        offer_integral(work, current.fixed, x);
        continue;
      }
      try_rounding(work, x);
      if (pruned(bound)) continue;

      const double v = x[static_cast<std::size_t>(binaries_[branch])];
      const std::int8_t first = v >= 0.5 ? 1 : 0;
      Node other{current.fixed, bound, next_id_++};
      other.fixed[branch] = static_cast<std::int8_t>(1 - first);
      open.push_back(std::move(other));

      current.fixed[branch] = first;
      current.bound = bound;
      current.id = next_id_++;
      const int col = binaries_[branch];
      work.set_bounds(col, first, first);
      status = work.solve_dual();
      have_current = true;
    }

    result.nodes_explored = nodes_;
    result.wall_time = seconds_since(start);
    double open_bound = kInf;
    for (const auto& node : open) open_bound = std::min(open_bound, node.bound);

    if (incumbent_.empty()) {
      if (stopped) {
        result.status = stop_status;
        result.best_bound = open_bound;
      } else {
        result.status = numerical_trouble ? SolveStatus::NumericalError : SolveStatus::Infeasible;
        if (numerical_trouble) result.diagnostic = "node relaxations failed numerically";
      }
      return result;
    }
    result.assignment = incumbent_;
    result.objective = incumbent_value_;
    result.best_bound = std::min({open_bound, pruned_floor_, incumbent_value_});
    result.gap = relative_gap(incumbent_value_, result.best_bound);
    if (stopped) {
      result.status = stop_status;
    } else if (numerical_trouble) {
      result.status = SolveStatus::NumericalError;
      result.diagnostic = "some node relaxations failed numerically; incumbent may be suboptimal";
    } else {
      result.status = SolveStatus::Optimal;
    }
    return result;
  }

 private:
  static SolveStatus map_status(LpStatus s) {
    switch (s) {
      case LpStatus::Optimal: return SolveStatus::Optimal;
      case LpStatus::Infeasible: return SolveStatus::Infeasible;
      case LpStatus::Unbounded: return SolveStatus::Unbounded;
      case LpStatus::TimeLimit: return SolveStatus::TimeLimit;
      case LpStatus::IterationLimit:
      case LpStatus::Singular: return SolveStatus::NumericalError;
    }
    return SolveStatus::NumericalError;
  }

  static std::string describe(LpStatus s) {
    switch (s) {
      case LpStatus::Optimal: return "optimal";
      case LpStatus::Infeasible: return "infeasible";
      case LpStatus::Unbounded: return "unbounded";
      case LpStatus::TimeLimit: return "time limit";
      case LpStatus::IterationLimit: return "iteration limit reached";
      case LpStatus::Singular: return "singular basis";
    }
    return "unknown";
  }

  static double relative_gap(double incumbent, double bound) {
    const double diff = incumbent - bound;
    if (diff <= 1e-9) return 0.0;
    return diff / std::max(std::abs(incumbent), 1e-9);
  }

  bool pruned(double bound) {
    if (bound < prune_threshold()) return false;
    pruned_floor_ = std::min(pruned_floor_, bound);
    return true;
  }

  double prune_threshold() const {
    if (incumbent_.empty()) return kInf;
    return incumbent_value_ - std::max(options_.mip_rel_gap * std::abs(incumbent_value_), 1e-9);
  }

  std::size_t select(const std::vector<Node>& open) const {
    if (incumbent_.empty()) return open.size() - 1;  // depth-first dive
    std::size_t best = 0;
    for (std::size_t k = 1; k < open.size(); ++k) {
      if (open[k].bound < open[best].bound ||
          (open[k].bound == open[best].bound && open[k].id > open[best].id)) {
        best = k;
      }
    }
    return best;
  }

  void apply_fixings(BoundedSimplex& simplex, const std::vector<std::int8_t>& fixed) const {
    for (std::size_t k = 0; k < binaries_.size(); ++k) {
      const int col = binaries_[k];
      if (fixed[k] < 0) {
        simplex.set_bounds(col, 0.0, 1.0);
      } else {
        simplex.set_bounds(col, fixed[k], fixed[k]);
      }
    }
  }

  /// Accepts an integral LP point as incumbent when it audits clean; otherwise
  /// re-solves with binaries pinned to their rounded values.
  void offer_integral(const BoundedSimplex& simplex, const std::vector<std::int8_t>& fixed,
                      std::vector<double> x) {
    for (int col : binaries_) x[static_cast<std::size_t>(col)] = std::round(x[static_cast<std::size_t>(col)]);
    if (consider(x)) return;
    std::vector<std::int8_t> pinned = fixed;
    for (std::size_t k = 0; k < binaries_.size(); ++k) {
      pinned[k] = static_cast<std::int8_t>(x[static_cast<std::size_t>(binaries_[k])]);
    }
    BoundedSimplex fresh(lp_, tol_);
    fresh.set_deadline(deadline_);
    apply_fixings(fresh, pinned);
    (void)simplex;
    if (fresh.solve_primal() == LpStatus::Optimal) {
      auto y = fresh.primal();
      for (int col : binaries_) y[static_cast<std::size_t>(col)] = std::round(y[static_cast<std::size_t>(col)]);
      consider(y);
    }
  }

  bool consider(const std::vector<double>& x) {
    const AuditReport report = audit(model_, x, options_.feasibility_tol);
    if (!report.clean()) return false;
    if (incumbent_.empty() || report.objective < incumbent_value_) {
      incumbent_ = x;
      incumbent_value_ = report.objective;
    }
    return true;
  }

  void try_rounding(const BoundedSimplex& simplex, const std::vector<double>& x) {
    std::vector<std::int8_t> rounded(binaries_.size());
    std::vector<int> position(model_.num_variables(), -1);
    for (std::size_t k = 0; k < binaries_.size(); ++k) {
      position[static_cast<std::size_t>(binaries_[k])] = static_cast<int>(k);
      rounded[k] = x[static_cast<std::size_t>(binaries_[k])] >= 0.5 ? 1 : 0;
    }
    for (bool changed = true; changed;) {
      changed = false;
      for (const auto& imp : implications_) {
        const int a = position[static_cast<std::size_t>(imp.implied)];
        const int b = position[static_cast<std::size_t>(imp.premise)];
        if (rounded[b] == 0 && rounded[a] == 1) {
          rounded[a] = 0;
          changed = true;
        }
      }
    }
    if (!tried_.insert(rounded).second) return;
    BoundedSimplex trial = simplex;
    apply_fixings(trial, rounded);
    if (trial.solve_dual() != LpStatus::Optimal) return;
    if (trial.objective() >= prune_threshold()) return;
    auto y = trial.primal();
    for (int col : binaries_) y[static_cast<std::size_t>(col)] = std::round(y[static_cast<std::size_t>(col)]);
    consider(y);
  }

  const MilpModel& model_;
  const SolverOptions& options_;
  LpData lp_;
  detail::SimplexTolerances tol_;
  std::vector<int> binaries_;
  std::vector<Implication> implications_;
  std::set<std::vector<std::int8_t>> tried_;
  std::vector<double> incumbent_;
  double incumbent_value_ = kInf;
  double pruned_floor_ = kInf;
  long nodes_ = 0;
  long next_id_ = 0;
  std::optional<Clock::time_point> deadline_;
};

}  // namespace

void SolverOptions::check() const {
  if (!(mip_rel_gap > 0.0) || !(integrality_tol > 0.0) || !(feasibility_tol > 0.0)) {
    throw InputError("solver tolerances must be positive");
  }
  if (time_limit && !(*time_limit > 0.0)) throw InputError("time limit must be positive");
  if (node_limit && *node_limit <= 0) throw InputError("node limit must be positive");
  if (backend == Backend::External &&
      (external_command.find("{mps}") == std::string::npos ||
       external_command.find("{sol}") == std::string::npos)) {
    throw InputError("external solver command needs {mps} and {sol} placeholders");
  }
}

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::TimeLimit: return "time_limit";
    case SolveStatus::NodeLimit: return "node_limit";
    case SolveStatus::NumericalError: return "numerical_error";
  }
  return "numerical_error";
}

SolveResult solve_lp(const MilpModel& model, const SolverOptions& options) {
  options.check();
  if (model.num_binaries() > 0) {
    throw InputError("solve_lp needs a continuous model; relax integrality first");
  }
  const auto start = Clock::now();
  BoundedSimplex simplex(LpData::from_model(model), tolerances_for(options));
  simplex.set_deadline(deadline_from(options, start));
  const LpStatus status = simplex.solve_primal();
  SolveResult result;
  result.wall_time = seconds_since(start);
  switch (status) {
    case LpStatus::Optimal: {
      result.assignment = simplex.primal();
      const AuditReport report = audit(model, result.assignment, options.feasibility_tol);
      if (!report.clean()) {
        result.status = SolveStatus::NumericalError;
        result.diagnostic = "simplex solution fails audit (" + report.violations.front().label + ")";
        result.assignment.clear();
        return result;
      }
      result.status = SolveStatus::Optimal;
      result.objective = report.objective;
      result.best_bound = report.objective;
      result.gap = 0.0;
      return result;
    }
    case LpStatus::Infeasible: result.status = SolveStatus::Infeasible; return result;
    case LpStatus::Unbounded: result.status = SolveStatus::Unbounded; return result;
    case LpStatus::TimeLimit: result.status = SolveStatus::TimeLimit; return result;
    case LpStatus::IterationLimit:
      result.status = SolveStatus::NumericalError;
      result.diagnostic = "simplex iteration limit reached";
      return result;
    case LpStatus::Singular:
      result.status = SolveStatus::NumericalError;
      result.diagnostic = "singular basis during simplex";
      return result;
  }
  return result;
}

SolveResult solve_milp(const MilpModel& model, const SolverOptions& options) {
  options.check();
  return BranchAndBound(model, options).run();
}

SolveResult solve(const MilpModel& model, const SolverOptions& options) {
  if (options.backend == SolverOptions::Backend::External) return solve_external(model, options);
  return solve_milp(model, options);
}

}  // namespace psps
