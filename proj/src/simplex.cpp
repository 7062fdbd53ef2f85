#include "simplex.hpp"

#include <algorithm>
#include <cmath>

namespace psps::detail {

namespace {

constexpr int kRefactorInterval = 64;
constexpr int kDegenerateBeforeBland = 50;
constexpr double kSingularPivot = 1e-11;
constexpr double kResidualTol = 1e-9;

}  // namespace

LpData LpData::from_model(const MilpModel& model) {
  LpData lp;
  lp.rows = static_cast<int>(model.num_constraints());
  lp.cols = static_cast<int>(model.num_variables());
  lp.a.assign(static_cast<std::size_t>(lp.rows) * lp.cols, 0.0);
  lp.rhs.resize(lp.rows);
  lp.sense.resize(lp.rows);
  for (int i = 0; i < lp.rows; ++i) {
    const auto& row = model.constraints()[i];
    double scale = 0.0;
    for (const auto& t : row.terms) scale = std::max(scale, std::abs(t.coef));
    if (scale == 0.0) scale = 1.0;
    for (const auto& t : row.terms) {
      lp.a[static_cast<std::size_t>(i) * lp.cols + t.var.index] = t.coef / scale;
    }
    lp.rhs[i] = row.rhs / scale;
    lp.sense[i] = row.sense;
  }
  lp.lower.resize(lp.cols);
  lp.upper.resize(lp.cols);
  lp.cost.assign(lp.cols, 0.0);
  for (int j = 0; j < lp.cols; ++j) {
    lp.lower[j] = model.variables()[j].lower;
    lp.upper[j] = model.variables()[j].upper;
  }
  for (const auto& t : model.objective()) lp.cost[t.var.index] = t.coef;
  return lp;
}

BoundedSimplex::BoundedSimplex(const LpData& data, SimplexTolerances tol)
    : data_(data), tol_(tol), m_(data.rows), n_(data.cols), width_(data.cols + data.rows) {
  lower_.resize(width_);
  upper_.resize(width_);
  cost_.assign(width_, 0.0);
  for (int j = 0; j < n_; ++j) {
    lower_[j] = data_.lower[j];
    upper_[j] = data_.upper[j];
    cost_[j] = data_.cost[j];
  }
  for (int i = 0; i < m_; ++i) {
    const int s = n_ + i;
    switch (data_.sense[i]) {
      case Sense::LessEqual: lower_[s] = 0.0; upper_[s] = kInf; break;
      case Sense::GreaterEqual: lower_[s] = -kInf; upper_[s] = 0.0; break;
      case Sense::Equal: lower_[s] = 0.0; upper_[s] = 0.0; break;
    }
  }
  reset_to_slack_basis();
}

void BoundedSimplex::reset_to_slack_basis() {
  basic_.resize(m_);
  row_of_.assign(width_, -1);
  at_.assign(width_, AtBound::Lower);
  for (int i = 0; i < m_; ++i) {
    basic_[i] = n_ + i;
    row_of_[n_ + i] = i;
  }
  for (int j = 0; j < n_; ++j) {
    if (std::isfinite(lower_[j])) {
      at_[j] = AtBound::Lower;
    } else if (std::isfinite(upper_[j])) {
      at_[j] = AtBound::Upper;
    } else {
      at_[j] = AtBound::Zero;
    }
  }
  refactor();
}

double BoundedSimplex::nonbasic_value(int col) const {
  switch (at_[col]) {
    case AtBound::Lower: return lower_[col];
    case AtBound::Upper: return upper_[col];
    case AtBound::Zero: return 0.0;
  }
  return 0.0;
}

void BoundedSimplex::pivot(int row, int col) {
  const int w = width_ + 1;
  double* pr = &tableau_[static_cast<std::size_t>(row) * w];
  const double inv = 1.0 / pr[col];
  nonzero_.clear();
  for (int j = 0; j < w; ++j) {
    if (pr[j] != 0.0) {
      pr[j] *= inv;
      nonzero_.push_back(j);
    }
  }
  pr[col] = 1.0;
  for (int i = 0; i < m_; ++i) {
    if (i == row) continue;
    double* pi = &tableau_[static_cast<std::size_t>(i) * w];
    const double f = pi[col];
    if (f == 0.0) continue;
    for (int j : nonzero_) pi[j] -= f * pr[j];
    pi[col] = 0.0;
  }
}

bool BoundedSimplex::refactor() {
  const int w = width_ + 1;
  tableau_.assign(static_cast<std::size_t>(m_) * w, 0.0);
  for (int i = 0; i < m_; ++i) {
    double* pi = &tableau_[static_cast<std::size_t>(i) * w];
    for (int j = 0; j < n_; ++j) pi[j] = data_.a[static_cast<std::size_t>(i) * n_ + j];
    pi[n_ + i] = 1.0;
    pi[width_] = data_.rhs[i];
  }
  // Start from the slack basis. Wanted slacks stay unit columns as long as
  // structural columns only replace rows whose slack is leaving.
  std::vector<bool> keep_slack(m_, false);
  std::vector<int> structural;
  for (int c : basic_) {
    if (c >= n_) {
      keep_slack[c - n_] = true;
    } else {
      structural.push_back(c);
    }
  }
  std::vector<int> new_basic(m_);
  for (int i = 0; i < m_; ++i) new_basic[i] = n_ + i;
  std::vector<bool> open(m_);
  for (int i = 0; i < m_; ++i) open[i] = !keep_slack[i];
  for (int q : structural) {
    int best = -1;
    double best_abs = kSingularPivot;
    for (int i = 0; i < m_; ++i) {
      if (open[i] && std::abs(t(i, q)) > best_abs) {
        best = i;
        best_abs = std::abs(t(i, q));
      }
    }
    if (best < 0) return false;
    pivot(best, q);
    open[best] = false;
    new_basic[best] = q;
  }
  basic_ = new_basic;
  std::fill(row_of_.begin(), row_of_.end(), -1);
  for (int i = 0; i < m_; ++i) row_of_[basic_[i]] = i;
  for (int j = 0; j < width_; ++j) {
    if (row_of_[j] >= 0) continue;
    if (at_[j] == AtBound::Lower && !std::isfinite(lower_[j])) {
      at_[j] = std::isfinite(upper_[j]) ? AtBound::Upper : AtBound::Zero;
    }
    if (at_[j] == AtBound::Upper && !std::isfinite(upper_[j])) {
      at_[j] = std::isfinite(lower_[j]) ? AtBound::Lower : AtBound::Zero;
    }
  }
  recompute_basic_values();
  since_refactor_ = 0;
  return true;
}

double BoundedSimplex::residual() const {
  double worst = 0.0;
  for (int i = 0; i < m_; ++i) {
    double r = x_[n_ + i] - data_.rhs[i];
    const double* ai = &data_.a[static_cast<std::size_t>(i) * n_];
    for (int j = 0; j < n_; ++j) {
      if (ai[j] != 0.0) r += ai[j] * x_[j];
    }
    worst = std::max(worst, std::abs(r));
  }
  return worst;
}

bool BoundedSimplex::primal_feasible() const {
  for (int i = 0; i < m_; ++i) {
    if (infeasibility(i) != 0.0) return false;
  }
  return true;
}

// Accepts the current point when it is feasible and consistent with the
// original rows; otherwise rebuilds the tableau and reports false.
bool BoundedSimplex::verified() {
  if (primal_feasible() && residual() <= kResidualTol) return true;
  if (!refactor()) reset_to_slack_basis();
  return false;
}

void BoundedSimplex::recompute_basic_values() {
  x_.assign(width_, 0.0);
  for (int j = 0; j < width_; ++j) {
    if (row_of_[j] < 0) x_[j] = nonbasic_value(j);
  }
  for (int i = 0; i < m_; ++i) {
    double v = t(i, width_);
    for (int j = 0; j < width_; ++j) {
      if (row_of_[j] < 0 && x_[j] != 0.0) v -= t(i, j) * x_[j];
    }
    x_[basic_[i]] = v;
  }
}

double BoundedSimplex::infeasibility(int row) const {
  const int b = basic_[row];
  const double x = x_[b];
  if (x < lower_[b] - tol_.primal) return lower_[b] - x;
  if (x > upper_[b] + tol_.primal) return x - upper_[b];
  return 0.0;
}

void BoundedSimplex::compute_reduced_costs(bool phase_one) {
  std::vector<double> cb(m_, 0.0);
  for (int i = 0; i < m_; ++i) {
    const int b = basic_[i];
    if (phase_one) {
      if (x_[b] < lower_[b] - tol_.primal) cb[i] = -1.0;
      if (x_[b] > upper_[b] + tol_.primal) cb[i] = 1.0;
    } else {
      cb[i] = cost_[b];
    }
  }
  reduced_.assign(width_, 0.0);
  for (int j = 0; j < width_; ++j) {
    if (row_of_[j] >= 0) continue;
    reduced_[j] = phase_one ? 0.0 : cost_[j];
  }
  for (int i = 0; i < m_; ++i) {
    if (cb[i] == 0.0) continue;
    const double* pi = &tableau_[static_cast<std::size_t>(i) * (width_ + 1)];
    for (int j = 0; j < width_; ++j) {
      if (row_of_[j] < 0 && pi[j] != 0.0) reduced_[j] -= cb[i] * pi[j];
    }
  }
}

bool BoundedSimplex::out_of_time() {
  return deadline_ && std::chrono::steady_clock::now() > *deadline_;
}

LpStatus BoundedSimplex::primal_loop(bool phase_one) {
  const long limit = iterations_ + 20000 + 50L * (m_ + width_);
  int degenerate_run = 0;
  while (true) {
    if (iterations_++ > limit) return LpStatus::IterationLimit;
    if (out_of_time()) return LpStatus::TimeLimit;
    if (since_refactor_ >= std::max(kRefactorInterval, m_) && !refactor()) return LpStatus::Singular;

    if (phase_one) {
      bool feasible = true;
      for (int i = 0; i < m_ && feasible; ++i) feasible = infeasibility(i) == 0.0;
      if (feasible) return LpStatus::Optimal;
    }
    compute_reduced_costs(phase_one);
    const bool bland = degenerate_run > kDegenerateBeforeBland;

    int q = -1;
    int dir = 0;
    double best = 0.0;
    for (int j = 0; j < width_; ++j) {
      if (row_of_[j] >= 0 || lower_[j] == upper_[j]) continue;
      const double d = reduced_[j];
      int cand = 0;
      if (at_[j] == AtBound::Lower && d < -tol_.dual) cand = 1;
      else if (at_[j] == AtBound::Upper && d > tol_.dual) cand = -1;
      else if (at_[j] == AtBound::Zero && std::abs(d) > tol_.dual) cand = d < 0 ? 1 : -1;
      if (cand == 0) continue;
      if (bland) {
        q = j;
        dir = cand;
        break;
      }
      if (std::abs(d) > best) {
        best = std::abs(d);
        q = j;
        dir = cand;
      }
    }
    if (q < 0) return phase_one ? LpStatus::Infeasible : LpStatus::Optimal;

    // Harris two-pass ratio test.
    auto effective = [&](int b, double& lo, double& hi) {
      lo = lower_[b];
      hi = upper_[b];
      if (phase_one) {
        if (x_[b] < lower_[b] - tol_.primal) {
          lo = -kInf;
          hi = lower_[b];
        } else if (x_[b] > upper_[b] + tol_.primal) {
          lo = upper_[b];
          hi = kInf;
        }
      }
    };
    double theta_max = kInf;
    for (int i = 0; i < m_; ++i) {
      const double alpha = t(i, q) * dir;
      if (std::abs(alpha) <= tol_.pivot) continue;
      const int b = basic_[i];
      double lo, hi;
      effective(b, lo, hi);
      if (alpha > 0 && std::isfinite(lo)) {
        theta_max = std::min(theta_max, (x_[b] - lo + tol_.primal) / alpha);
      } else if (alpha < 0 && std::isfinite(hi)) {
        theta_max = std::min(theta_max, (hi - x_[b] + tol_.primal) / -alpha);
      }
    }
    const double own = upper_[q] - lower_[q];  // inf when either side is open
    if (!std::isfinite(theta_max) && !std::isfinite(own)) {
      return phase_one ? LpStatus::Infeasible : LpStatus::Unbounded;
    }

    int r = -1;
    double theta = 0.0;
    double target = 0.0;
    if (own <= theta_max) {
      theta = own;
    } else {
      double best_alpha = 0.0;
      for (int i = 0; i < m_; ++i) {
        const double alpha = t(i, q) * dir;
        if (std::abs(alpha) <= tol_.pivot) continue;
        const int b = basic_[i];
        double lo, hi;
        effective(b, lo, hi);
        double ratio = kInf, bound = 0.0;
        if (alpha > 0 && std::isfinite(lo)) {
          ratio = (x_[b] - lo) / alpha;
          bound = lo;
        } else if (alpha < 0 && std::isfinite(hi)) {
          ratio = (hi - x_[b]) / -alpha;
          bound = hi;
        } else {
          continue;
        }
        if (ratio <= theta_max && (std::abs(alpha) > best_alpha ||
                                   (bland && r >= 0 && std::abs(alpha) == best_alpha && b < basic_[r]))) {
          best_alpha = std::abs(alpha);
          r = i;
          theta = std::max(ratio, 0.0);
          target = bound;
        }
      }
      if (r < 0) return LpStatus::Singular;
    }

    degenerate_run = theta < 1e-12 ? degenerate_run + 1 : 0;
    const double step = dir * theta;
    if (step != 0.0) {
      for (int i = 0; i < m_; ++i) {
        const double a = t(i, q);
        if (a != 0.0) x_[basic_[i]] -= a * step;
      }
      x_[q] += step;
    }
    if (r < 0) {
      at_[q] = dir > 0 ? AtBound::Upper : AtBound::Lower;
      x_[q] = nonbasic_value(q);
      continue;
    }
    const int leaving = basic_[r];
    x_[leaving] = target;
    at_[leaving] = target == lower_[leaving] ? AtBound::Lower : AtBound::Upper;
    pivot(r, q);
    basic_[r] = q;
    row_of_[q] = r;
    row_of_[leaving] = -1;
    ++since_refactor_;
  }
}

LpStatus BoundedSimplex::solve_primal() {
  for (int attempt = 0; attempt < 4; ++attempt) {
    LpStatus s = primal_loop(true);
    if (s != LpStatus::Optimal) return s;
    s = primal_loop(false);
    if (s != LpStatus::Optimal) return s;
    if (verified()) return LpStatus::Optimal;
  }
  return LpStatus::Singular;
}

void BoundedSimplex::flip_boxed_to_dual_feasible() {
  compute_reduced_costs(false);
  for (int j = 0; j < width_; ++j) {
    if (row_of_[j] >= 0 || !std::isfinite(lower_[j]) || !std::isfinite(upper_[j]) || lower_[j] == upper_[j]) continue;
    const AtBound want = reduced_[j] < 0.0 ? AtBound::Upper : AtBound::Lower;
    if (at_[j] == want) continue;
    const double old = x_[j];
    at_[j] = want;
    const double delta = nonbasic_value(j) - old;
    for (int i = 0; i < m_; ++i) {
      const double a = t(i, j);
      if (a != 0.0) x_[basic_[i]] -= a * delta;
    }
    x_[j] = nonbasic_value(j);
  }
}

LpStatus BoundedSimplex::solve_dual() {
  auto dual_feasible = [&] {
    compute_reduced_costs(false);
    for (int j = 0; j < width_; ++j) {
      if (row_of_[j] >= 0 || lower_[j] == upper_[j]) continue;
      const double d = reduced_[j];
      if (at_[j] == AtBound::Lower && d < -tol_.dual) return false;
      if (at_[j] == AtBound::Upper && d > tol_.dual) return false;
      if (at_[j] == AtBound::Zero && std::abs(d) > tol_.dual) return false;
    }
    return true;
  };
  flip_boxed_to_dual_feasible();
  if (!dual_feasible()) return solve_primal();

  const long limit = iterations_ + 20000 + 50L * (m_ + width_);
  int degenerate_run = 0;
  for (int rounds = 0; rounds < 4; ++rounds) {
    while (true) {
      if (iterations_++ > limit) return LpStatus::IterationLimit;
      if (out_of_time()) return LpStatus::TimeLimit;
      if (since_refactor_ >= std::max(kRefactorInterval, m_) && !refactor()) return LpStatus::Singular;
      const bool bland = degenerate_run > kDegenerateBeforeBland;

      int r = -1;
      double worst = 0.0;
      for (int i = 0; i < m_; ++i) {
        const double inf = infeasibility(i);
        if (inf == 0.0) continue;
        if (bland) {
          if (r < 0 || basic_[i] < basic_[r]) r = i;
        } else if (inf > worst) {
          worst = inf;
          r = i;
        }
      }
      if (r < 0) break;

      compute_reduced_costs(false);
      const int leaving = basic_[r];
      const bool going_up = x_[leaving] < lower_[leaving];
      auto eligible = [&](int j, double alpha) {
        if (row_of_[j] >= 0 || lower_[j] == upper_[j]) return false;
        const bool can_up = at_[j] == AtBound::Lower || at_[j] == AtBound::Zero;
        const bool can_down = at_[j] == AtBound::Upper || at_[j] == AtBound::Zero;
        if (going_up) return (can_up && alpha < -tol_.pivot) || (can_down && alpha > tol_.pivot);
        return (can_up && alpha > tol_.pivot) || (can_down && alpha < -tol_.pivot);
      };
      double bound = kInf;
      for (int j = 0; j < width_; ++j) {
        const double alpha = t(r, j);
        if (!eligible(j, alpha)) continue;
        bound = std::min(bound, (std::abs(reduced_[j]) + tol_.dual) / std::abs(alpha));
      }
      if (!std::isfinite(bound)) return LpStatus::Infeasible;
      int q = -1;
      double best_alpha = 0.0, ratio_q = 0.0;
      for (int j = 0; j < width_; ++j) {
        const double alpha = t(r, j);
        if (!eligible(j, alpha)) continue;
        const double ratio = std::abs(reduced_[j]) / std::abs(alpha);
        if (ratio > bound) continue;
        if (std::abs(alpha) > best_alpha || (bland && std::abs(alpha) == best_alpha && j < q)) {
          best_alpha = std::abs(alpha);
          q = j;
          ratio_q = ratio;
        }
      }
      if (q < 0) return LpStatus::Singular;
      degenerate_run = ratio_q < 1e-12 ? degenerate_run + 1 : 0;

      const double target = going_up ? lower_[leaving] : upper_[leaving];
      const double delta = (x_[leaving] - target) / t(r, q);
      for (int i = 0; i < m_; ++i) {
        const double a = t(i, q);
        if (a != 0.0) x_[basic_[i]] -= a * delta;
      }
      x_[q] += delta;
      x_[leaving] = target;
      at_[leaving] = going_up ? AtBound::Lower : AtBound::Upper;
      pivot(r, q);
      basic_[r] = q;
      row_of_[q] = r;
      row_of_[leaving] = -1;
      ++since_refactor_;
    }
    if (!verified()) continue;
    if (dual_feasible()) return LpStatus::Optimal;
    return solve_primal();
  }
  return LpStatus::Singular;
}

void BoundedSimplex::set_bounds(int col, double lower, double upper) {
  lower_[col] = lower;
  upper_[col] = upper;
  if (row_of_[col] >= 0) return;
  const double old = x_[col];
  if (at_[col] == AtBound::Lower && !std::isfinite(lower)) at_[col] = AtBound::Upper;
  if (at_[col] == AtBound::Upper && !std::isfinite(upper)) at_[col] = AtBound::Lower;
  if (!std::isfinite(lower) && !std::isfinite(upper)) at_[col] = AtBound::Zero;
  const double now = nonbasic_value(col);
  const double delta = now - old;
  if (delta != 0.0) {
    for (int i = 0; i < m_; ++i) {
      const double a = t(i, col);
      if (a != 0.0) x_[basic_[i]] -= a * delta;
    }
  }
  x_[col] = now;
}

Basis BoundedSimplex::basis() const { return Basis{basic_, at_}; }

bool BoundedSimplex::load_basis(const Basis& basis) {
  if (static_cast<int>(basis.basic.size()) != m_ || static_cast<int>(basis.nonbasic.size()) != width_) {
    return false;
  }
  basic_ = basis.basic;
  at_ = basis.nonbasic;
  if (!refactor()) {
    reset_to_slack_basis();
    return false;
  }
  return true;
}

double BoundedSimplex::objective() const {
  double sum = 0.0;
  for (int j = 0; j < n_; ++j) sum += cost_[j] * x_[j];
  return sum;
}

std::vector<double> BoundedSimplex::primal() const {
  return std::vector<double>(x_.begin(), x_.begin() + n_);
}

}  // namespace psps::detail
