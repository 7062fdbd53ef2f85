#pragma once

#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace psps {

inline constexpr double kDefaultAngleDiffCap = 0.15;  // radians

struct Bus {
  int id = 0;
  std::string name;

  friend bool operator==(const Bus&, const Bus&) = default;
};

/// Switchable transmission line. Powers are per-unit on the network base.
struct Line {
  int id = 0;
  int from_bus = 0;
  int to_bus = 0;
  double susceptance_b = 0.0;  // |b|, > 0
  double thermal_limit = 0.0;
  double risk = 0.0;
  double angle_diff_cap = kDefaultAngleDiffCap;

  friend bool operator==(const Line&, const Line&) = default;
};

struct Generator {
  int id = 0;
  int bus = 0;
  double p_min = 0.0;
  double p_max = 0.0;
  double flex = 1.0;  // post-contingency ramp as a fraction of p_max

  friend bool operator==(const Generator&, const Generator&) = default;
};

struct LoadPoint {
  int id = 0;
  int bus = 0;
  double demand = 0.0;

  friend bool operator==(const LoadPoint&, const LoadPoint&) = default;
};

struct Network {
  std::vector<Bus> buses;
  std::vector<Line> lines;
  std::vector<Generator> generators;
  std::vector<LoadPoint> loads;
  double base_mva = 100.0;

  friend bool operator==(const Network&, const Network&) = default;
};

/// Load-served and shed limits of a planning run.
struct PlanningParams {
  double alpha = 1.0;  // minimum pre-contingency served fraction
  double beta = 0.0;   // maximum additional post-contingency shed fraction
  std::optional<double> flex_override;

  /// Throws InputError if alpha, beta or the override leave [0, 1].
  void check() const;
};

struct Violation {
  std::string kind;  // e.g. "dangling bus reference"
  std::string detail;
};

using ValidationReport = std::vector<Violation>;

ValidationReport validate(const Network& network);

/// Throws DataError listing every violation when the report is not empty.
void require_valid(const Network& network);

/// Partition of all bus ids into components linked by `energized_lines`.
/// Components are sorted by smallest bus id; ids inside are ascending.
std::vector<std::vector<int>> connected_components(
    const Network& network, const std::set<int>& energized_lines);

/// Lines whose removal disconnects their endpoints in the full network.
std::set<int> find_bridges(const Network& network);

double total_demand(const Network& network);
double total_risk(const Network& network);

/// Id to position lookups, built once per consumer.
struct NetworkIndex {
  explicit NetworkIndex(const Network& network);

  std::unordered_map<int, std::size_t> bus;
  std::unordered_map<int, std::size_t> line;
  std::unordered_map<int, std::size_t> generator;
  std::unordered_map<int, std::size_t> load;
};

}  // namespace psps
