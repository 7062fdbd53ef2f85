#include "psps/milp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "psps/error.hpp"

namespace psps {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool mps_safe(unsigned char c) {
  return std::isalnum(c) || c == '_' || c == '.' || c == ',' || c == '(' || c == ')' ||
         c == '=' || c == '[' || c == ']' || c == '-';
}

}  // namespace

Var MilpModel::add_continuous(std::string name, double lower, double upper) {
  if (std::isnan(lower) || std::isnan(upper) || lower > upper) {
    throw InputError("variable " + name + ": lower bound exceeds upper bound");
  }
  const int index = static_cast<int>(variables_.size());
  if (!by_name_.emplace(name, index).second) throw InputError("duplicate variable name " + name);
  variables_.push_back({std::move(name), false, lower, upper});
  return Var{index};
}

Var MilpModel::add_binary(std::string name) {
  const int index = static_cast<int>(variables_.size());
  if (!by_name_.emplace(name, index).second) throw InputError("duplicate variable name " + name);
  variables_.push_back({std::move(name), true, 0.0, 1.0});
  return Var{index};
}

std::vector<Term> MilpModel::canonical(std::vector<Term> terms) const {
  for (const auto& t : terms) {
    if (t.var.index < 0 || static_cast<std::size_t>(t.var.index) >= variables_.size()) {
      throw InputError("term references an unregistered variable");
    }
    if (!std::isfinite(t.coef)) {
      throw InputError("non-finite coefficient on " + variables_[t.var.index].name);
    }
  }
  std::sort(terms.begin(), terms.end(),
            [](const Term& a, const Term& b) { return a.var.index < b.var.index; });
  std::vector<Term> out;
  out.reserve(terms.size());
  for (const auto& t : terms) {
    if (!out.empty() && out.back().var == t.var) {
      out.back().coef += t.coef;
    } else {
      out.push_back(t);
    }
  }
  std::erase_if(out, [](const Term& t) { return t.coef == 0.0; });
  return out;
}

void MilpModel::add_constraint(std::vector<Term> terms, Sense sense, double rhs, std::string tag) {
  if (!std::isfinite(rhs)) throw InputError("non-finite right-hand side in " + tag);
  constraints_.push_back({canonical(std::move(terms)), sense, rhs, std::move(tag)});
}

void MilpModel::set_objective(std::vector<Term> terms) { objective_ = canonical(std::move(terms)); }

std::size_t MilpModel::num_binaries() const {
  return static_cast<std::size_t>(
      std::count_if(variables_.begin(), variables_.end(), [](const Variable& v) { return v.binary; }));
}

Var MilpModel::find(const std::string& name) const {
  const auto it = by_name_.find(name);
  return it == by_name_.end() ? Var{} : Var{it->second};
}

void MilpModel::set_bounds(Var v, double lower, double upper) {
  auto& var = variables_.at(static_cast<std::size_t>(v.index));
  if (lower > upper) throw InputError("variable " + var.name + ": lower bound exceeds upper bound");
  var.lower = lower;
  var.upper = upper;
}

void MilpModel::make_continuous(Var v) { variables_.at(static_cast<std::size_t>(v.index)).binary = false; }

double evaluate(std::span<const Term> terms, std::span<const double> values) {
  double sum = 0.0;
  for (const auto& t : terms) sum += t.coef * values[static_cast<std::size_t>(t.var.index)];
  return sum;
}

double objective_value(const MilpModel& model, std::span<const double> values) {
  return evaluate(model.objective(), values);
}

std::string mangle_name(const std::string& name) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(name.size());
  for (unsigned char c : name) {
    if (mps_safe(c)) {
      out += static_cast<char>(c);
    } else {
      out += '#';
      out += kHex[c >> 4];
      out += kHex[c & 0xF];
    }
  }
  if (out.empty()) out = "#";
  return out;
}

std::string unmangle_name(const std::string& mangled) {
  if (mangled == "#") return "";
  std::string out;
  for (std::size_t i = 0; i < mangled.size(); ++i) {
    if (mangled[i] == '#' && i + 2 < mangled.size()) {
      out += static_cast<char>(std::stoi(mangled.substr(i + 1, 2), nullptr, 16));
      i += 2;
    } else {
      out += mangled[i];
    }
  }
  return out;
}

std::string write_mps(const MilpModel& model) {
  const auto& vars = model.variables();
  const auto& rows = model.constraints();

  // column-major view of the constraint matrix
  std::vector<std::vector<std::pair<std::size_t, double>>> columns(vars.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (const auto& t : rows[r].terms) columns[static_cast<std::size_t>(t.var.index)].emplace_back(r, t.coef);
  }
  std::vector<double> obj(vars.size(), 0.0);
  for (const auto& t : model.objective()) obj[static_cast<std::size_t>(t.var.index)] = t.coef;

  std::ostringstream out;
  out << "NAME PSPS\n";
  out << "ROWS\n N OBJ\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const char sense = rows[r].sense == Sense::LessEqual ? 'L' : rows[r].sense == Sense::Equal ? 'E' : 'G';
    out << ' ' << sense << " R" << r << '\n';
  }
  out << "COLUMNS\n";
  bool in_int = false;
  int marker = 0;
  for (std::size_t j = 0; j < vars.size(); ++j) {
    if (vars[j].binary != in_int) {
      out << " MARKER" << marker++ << " 'MARKER' " << (vars[j].binary ? "'INTORG'" : "'INTEND'") << '\n';
      in_int = vars[j].binary;
    }
    const std::string name = mangle_name(vars[j].name);
    bool wrote = false;
    if (obj[j] != 0.0) {
      out << ' ' << name << " OBJ " << fmt(obj[j]) << '\n';
      wrote = true;
    }
    for (const auto& [r, coef] : columns[j]) {
      out << ' ' << name << " R" << r << ' ' << fmt(coef) << '\n';
      wrote = true;
    }
    // a column with no entries still has to be declared
    if (!wrote) out << ' ' << name << " OBJ 0\n";
  }
  if (in_int) out << " MARKER" << marker++ << " 'MARKER' 'INTEND'\n";
  out << "RHS\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].rhs != 0.0) out << " RHS R" << r << ' ' << fmt(rows[r].rhs) << '\n';
  }
  out << "BOUNDS\n";
  for (const auto& v : vars) {
    const std::string name = mangle_name(v.name);
    if (v.binary) {
      out << " UP BND " << name << " 1\n";
      continue;
    }
    if (v.lower == v.upper) {
      out << " FX BND " << name << ' ' << fmt(v.lower) << '\n';
      continue;
    }
    if (v.lower == -kInf && v.upper == kInf) {
      out << " FR BND " << name << '\n';
      continue;
    }
    if (v.lower == -kInf) {
      out << " MI BND " << name << '\n';
    } else if (v.lower != 0.0) {
      out << " LO BND " << name << ' ' << fmt(v.lower) << '\n';
    }
    if (v.upper != kInf) out << " UP BND " << name << ' ' << fmt(v.upper) << '\n';
  }
  out << "ENDATA\n";
  return out.str();
}

MilpModel relax_integrality(const MilpModel& model) {
  MilpModel relaxed = model;
  for (std::size_t j = 0; j < model.num_variables(); ++j) {
    if (model.variables()[j].binary) relaxed.make_continuous(Var{static_cast<int>(j)});
  }
  return relaxed;
}

bool AuditReport::cites(const std::string& prefix) const {
  return std::any_of(violations.begin(), violations.end(), [&](const AuditViolation& v) {
    return v.kind == AuditViolation::Kind::Constraint && v.label.starts_with(prefix);
  });
}

AuditReport audit(const MilpModel& model, std::span<const double> assignment, double tol) {
  if (assignment.size() != model.num_variables()) {
    throw InputError("assignment length " + std::to_string(assignment.size()) +
                     " does not match variable count " + std::to_string(model.num_variables()));
  }
  AuditReport report;
  const auto& vars = model.variables();
  for (std::size_t j = 0; j < vars.size(); ++j) {
    const double x = assignment[j];
    const auto& v = vars[j];
    if (!std::isfinite(x)) {
      report.violations.push_back({AuditViolation::Kind::Bound, v.name, kInf});
      continue;
    }
    const double below = v.lower - x;
    const double above = x - v.upper;
    if (below > tol || above > tol) {
      report.violations.push_back({AuditViolation::Kind::Bound, v.name, std::max(below, above)});
    }
    if (v.binary) {
      const double frac = std::abs(x - std::round(x));
      if (frac > tol) report.violations.push_back({AuditViolation::Kind::Integrality, v.name, frac});
    }
  }
  for (const auto& row : model.constraints()) {
    double lhs = 0.0, scale = 1.0;
    for (const auto& t : row.terms) {
      lhs += t.coef * assignment[static_cast<std::size_t>(t.var.index)];
      scale = std::max(scale, std::abs(t.coef));
    }
    double residual = 0.0;
    switch (row.sense) {
      case Sense::LessEqual: residual = lhs - row.rhs; break;
      case Sense::GreaterEqual: residual = row.rhs - lhs; break;
      case Sense::Equal: residual = std::abs(lhs - row.rhs); break;
    }
    const double violation = residual / scale;
    if (!(violation <= tol)) {
      report.violations.push_back({AuditViolation::Kind::Constraint, row.tag, violation});
    }
  }
  report.objective = objective_value(model, assignment);
  return report;
}

Json audit_to_json(const AuditReport& report) {
  Json doc;
  doc["objective"] = report.objective;
  doc["clean"] = report.clean();
  doc["violations"] = Json::array();
  for (const auto& v : report.violations) {
    const char* kind = v.kind == AuditViolation::Kind::Constraint ? "constraint"
                       : v.kind == AuditViolation::Kind::Bound   ? "bound"
                                                                 : "integrality";
    doc["violations"].push_back({{"kind", kind}, {"label", v.label}, {"magnitude", v.magnitude}});
  }
  return doc;
}

}  // namespace psps
