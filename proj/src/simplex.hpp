#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <vector>

#include "psps/milp.hpp"

namespace psps::detail {

/// Dense LP in row form: min c'x  s.t.  A x (sense) rhs,  l <= x <= u.
/// Rows are scaled to max |a_ij| = 1 on construction.
struct LpData {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;  // rows x cols, row-major
  std::vector<double> rhs;
  std::vector<Sense> sense;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> cost;

  static LpData from_model(const MilpModel& model);
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit, TimeLimit, Singular };

struct SimplexTolerances {
  double primal = 1e-9;
  double dual = 1e-9;
  double pivot = 1e-9;
};

/// Column status of a nonbasic variable; basic columns are tracked separately.
enum class AtBound : std::uint8_t { Lower, Upper, Zero };

/// Snapshot sufficient to rebuild a tableau: which columns are basic and
/// where each nonbasic column sits.
struct Basis {
  std::vector<int> basic;  // one column per row
  std::vector<AtBound> nonbasic;  // per column; ignored for basic columns
};

/// Bounded-variable dense tableau simplex. Columns 0..cols-1 are the
/// structural variables, cols..cols+rows-1 the row slacks with
/// a_i x + s_i = rhs_i and s_i in [0, inf), (-inf, 0] or [0, 0] by sense.
class BoundedSimplex {
 public:
  BoundedSimplex(const LpData& data, SimplexTolerances tol);

  /// Two-phase primal simplex from the current basis.
  LpStatus solve_primal();

  /// Dual simplex from the current basis; falls back to the primal method
  /// when the basis is not dual feasible.
  LpStatus solve_dual();

  /// Changes a structural variable's bounds, keeping the basis.
  void set_bounds(int col, double lower, double upper);

  Basis basis() const;
  /// Rebuilds the tableau for `basis`; false if it is singular.
  bool load_basis(const Basis& basis);

  double objective() const;
  /// Structural variable values.
  std::vector<double> primal() const;
  double lower(int col) const { return lower_[static_cast<std::size_t>(col)]; }
  double upper(int col) const { return upper_[static_cast<std::size_t>(col)]; }

  void set_deadline(std::optional<std::chrono::steady_clock::time_point> deadline) {
    deadline_ = deadline;
  }
  long iterations() const { return iterations_; }

 private:
  double& t(int row, int col) { return tableau_[static_cast<std::size_t>(row) * (width_ + 1) + col]; }
  double t(int row, int col) const { return tableau_[static_cast<std::size_t>(row) * (width_ + 1) + col]; }

  void reset_to_slack_basis();
  bool refactor();
  double residual() const;
  bool primal_feasible() const;
  bool verified();
  void flip_boxed_to_dual_feasible();
  void recompute_basic_values();
  void pivot(int row, int col);
  double nonbasic_value(int col) const;
  double infeasibility(int row) const;
  void compute_reduced_costs(bool phase_one);
  bool out_of_time();

  LpStatus primal_loop(bool phase_one);

  LpData data_;
  SimplexTolerances tol_;
  int m_ = 0;
  int n_ = 0;
  int width_ = 0;  // n_ + m_; tableau rows carry one extra rhs column
  std::vector<double> tableau_;  // m_ x width_
  std::vector<double> lower_, upper_, cost_;
  std::vector<double> x_;  // value of every column
  std::vector<int> basic_;  // row -> column
  std::vector<int> row_of_;  // column -> row or -1
  std::vector<AtBound> at_;
  std::vector<double> reduced_;
  std::vector<int> nonzero_;  // scratch for pivot()
  long iterations_ = 0;
  int since_refactor_ = 0;
  std::optional<std::chrono::steady_clock::time_point> deadline_;
};

}  // namespace psps::detail
