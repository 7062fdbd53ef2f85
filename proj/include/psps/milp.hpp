#pragma once

#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "psps/json_fwd.hpp"

namespace psps {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Dense index of a variable inside one MilpModel.
struct Var {
  int index = -1;

  friend bool operator==(Var, Var) = default;
  friend auto operator<=>(Var, Var) = default;
};

struct Term {
  double coef = 0.0;
  Var var;
};

enum class Sense { LessEqual, Equal, GreaterEqual };

struct Variable {
  std::string name;
  bool binary = false;
  double lower = 0.0;
  double upper = 0.0;

  friend bool operator==(const Variable&, const Variable&) = default;
};

struct LinearConstraint {
  std::vector<Term> terms;
  Sense sense = Sense::LessEqual;
  double rhs = 0.0;
  std::string tag;  // equation label, e.g. "eq8a[line=3,c=0]"
};

/// Minimization MILP over continuous and binary variables.
///
/// Terms are canonicalized on insertion: duplicates merged by variable,
/// zero coefficients dropped, ordered by variable index.
class MilpModel {
 public:
  Var add_continuous(std::string name, double lower, double upper);
  Var add_binary(std::string name);

  void add_constraint(std::vector<Term> terms, Sense sense, double rhs, std::string tag);
  void set_objective(std::vector<Term> terms);

  const std::vector<Variable>& variables() const { return variables_; }
  const std::vector<LinearConstraint>& constraints() const { return constraints_; }
  const std::vector<Term>& objective() const { return objective_; }

  const Variable& variable(Var v) const { return variables_.at(static_cast<std::size_t>(v.index)); }
  std::size_t num_variables() const { return variables_.size(); }
  std::size_t num_constraints() const { return constraints_.size(); }
  std::size_t num_binaries() const;

  /// Lookup by name; returns an invalid Var (index -1) when absent.
  Var find(const std::string& name) const;

  void set_bounds(Var v, double lower, double upper);
  void make_continuous(Var v);

 private:
  std::vector<Term> canonical(std::vector<Term> terms) const;

  std::vector<Variable> variables_;
  std::vector<LinearConstraint> constraints_;
  std::vector<Term> objective_;
  std::unordered_map<std::string, int> by_name_;
};

using Assignment = std::vector<double>;

double evaluate(std::span<const Term> terms, std::span<const double> values);
double objective_value(const MilpModel& model, std::span<const double> values);

/// Free-format MPS. Binaries sit inside an INTORG/INTEND marker block with
/// bounds [0, 1]. Column names are mangled with `mangle_name`; rows are
/// named R0, R1, ... in constraint order and the objective row is OBJ.
std::string write_mps(const MilpModel& model);

/// MPS-safe name: every byte outside [A-Za-z0-9_.,()=\[\]-] and every '#'
/// becomes `#hh` (two lowercase hex digits). `unmangle_name` inverts it.
std::string mangle_name(const std::string& name);
std::string unmangle_name(const std::string& mangled);

/// Same model with every binary turned into a continuous [0, 1] variable.
MilpModel relax_integrality(const MilpModel& model);

struct AuditViolation {
  enum class Kind { Constraint, Bound, Integrality };
  Kind kind = Kind::Constraint;
  std::string label;  // constraint tag or variable name
  double magnitude = 0.0;
};

struct AuditReport {
  std::vector<AuditViolation> violations;
  double objective = 0.0;

  bool clean() const { return violations.empty(); }
  /// True when any violated constraint's tag starts with `prefix`.
  bool cites(const std::string& prefix) const;
};

/// Independent feasibility check of an assignment against every constraint,
/// bound and integrality mark. A constraint's violation is its residual
/// divided by max(1, largest |coefficient| in the row).
AuditReport audit(const MilpModel& model, std::span<const double> assignment, double tol);

Json audit_to_json(const AuditReport& report);

}  // namespace psps
