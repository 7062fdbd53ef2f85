#include "psps/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "psps/error.hpp"

namespace psps {

namespace {

bool in_unit_interval(double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; }

template <class T>
void check_unique_ids(const std::vector<T>& items, const char* kind,
                      ValidationReport& report) {
  std::set<int> seen;
  for (const auto& item : items) {
    if (!seen.insert(item.id).second) {
      report.push_back({"duplicate id", std::string(kind) + " " + std::to_string(item.id)});
    }
  }
}

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace

void PlanningParams::check() const {
  if (!in_unit_interval(alpha)) throw InputError("alpha must lie in [0, 1]");
  if (!in_unit_interval(beta)) throw InputError("beta must lie in [0, 1]");
  if (flex_override && !in_unit_interval(*flex_override)) {
    throw InputError("generator flexibility must lie in [0, 1]");
  }
}

ValidationReport validate(const Network& network) {
  ValidationReport report;
  if (network.buses.empty()) report.push_back({"no buses", "network has no buses"});
  if (!(network.base_mva > 0.0) || !std::isfinite(network.base_mva)) {
    report.push_back({"invalid base", "base_mva must be positive"});
  }
  check_unique_ids(network.buses, "bus", report);
  check_unique_ids(network.lines, "line", report);
  check_unique_ids(network.generators, "generator", report);
  check_unique_ids(network.loads, "load", report);

  std::set<int> bus_ids;
  for (const auto& bus : network.buses) {
    if (bus.id < 1) report.push_back({"invalid bus id", std::to_string(bus.id)});
    bus_ids.insert(bus.id);
  }
  auto dangling = [&](int bus, const std::string& owner) {
    if (!bus_ids.contains(bus)) {
      report.push_back({"dangling bus reference",
                        owner + " references bus " + std::to_string(bus)});
    }
  };

  for (const auto& line : network.lines) {
    const std::string owner = "line " + std::to_string(line.id);
    dangling(line.from_bus, owner);
    dangling(line.to_bus, owner);
    if (line.from_bus == line.to_bus) report.push_back({"self loop", owner});
    if (!(line.susceptance_b > 0.0) || !std::isfinite(line.susceptance_b)) {
      report.push_back({"nonpositive susceptance", owner});
    }
    if (!(line.thermal_limit >= 0.0) || !std::isfinite(line.thermal_limit)) {
      report.push_back({"negative thermal limit", owner});
    }
    if (!(line.risk >= 0.0) || !std::isfinite(line.risk)) {
      report.push_back({"negative risk", owner});
    }
    if (!(line.angle_diff_cap > 0.0) || !std::isfinite(line.angle_diff_cap)) {
      report.push_back({"nonpositive angle cap", owner});
    }
  }
  for (const auto& gen : network.generators) {
    const std::string owner = "generator " + std::to_string(gen.id);
    dangling(gen.bus, owner);
    if (!(gen.p_min >= 0.0) || !(gen.p_min <= gen.p_max) || !std::isfinite(gen.p_max)) {
      report.push_back({"invalid generator limits", owner});
    }
    if (!in_unit_interval(gen.flex)) report.push_back({"invalid flexibility", owner});
  }
  for (const auto& load : network.loads) {
    const std::string owner = "load " + std::to_string(load.id);
    dangling(load.bus, owner);
    if (!(load.demand >= 0.0) || !std::isfinite(load.demand)) {
      report.push_back({"negative demand", owner});
    }
  }
  return report;
}

void require_valid(const Network& network) {
  const auto report = validate(network);
  if (report.empty()) return;
  std::ostringstream msg;
  msg << "invalid network:";
  for (const auto& v : report) msg << "\n  " << v.kind << ": " << v.detail;
  throw DataError(msg.str());
}

std::vector<std::vector<int>> connected_components(
    const Network& network, const std::set<int>& energized_lines) {
  const NetworkIndex index(network);
  for (int id : energized_lines) {
    if (!index.line.contains(id)) {
      throw InputError("unknown line id " + std::to_string(id));
    }
  }
  UnionFind uf(network.buses.size());
  for (const auto& line : network.lines) {
    if (!energized_lines.contains(line.id)) continue;
    uf.unite(index.bus.at(line.from_bus), index.bus.at(line.to_bus));
  }
  std::unordered_map<std::size_t, std::vector<int>> groups;
  for (std::size_t i = 0; i < network.buses.size(); ++i) {
    groups[uf.find(i)].push_back(network.buses[i].id);
  }
  std::vector<std::vector<int>> out;
  out.reserve(groups.size());
  for (auto& [root, ids] : groups) {
    std::sort(ids.begin(), ids.end());
    out.push_back(std::move(ids));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::set<int> find_bridges(const Network& network) {
  const NetworkIndex index(network);
  const std::size_t n = network.buses.size();
  // adjacency: (neighbor, line position)
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(n);
  for (std::size_t k = 0; k < network.lines.size(); ++k) {
    const auto& line = network.lines[k];
    const auto a = index.bus.at(line.from_bus);
    const auto b = index.bus.at(line.to_bus);
    adj[a].emplace_back(b, k);
    adj[b].emplace_back(a, k);
  }

  // Iterative Tarjan low-link; skipping the tree edge by line position keeps
  // parallel lines from being reported.
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> disc(n, kNone), low(n, 0);
  std::size_t timer = 0;
  std::set<int> bridges;
  struct Frame {
    std::size_t node;
    std::size_t via_line;
    std::size_t next = 0;
  };
  for (std::size_t root = 0; root < n; ++root) {
    if (disc[root] != kNone) continue;
    std::vector<Frame> stack{{root, kNone}};
    disc[root] = low[root] = timer++;
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.next < adj[f.node].size()) {
        const auto [to, k] = adj[f.node][f.next++];
        if (k == f.via_line) continue;
        if (disc[to] == kNone) {
          disc[to] = low[to] = timer++;
          stack.push_back({to, k});
        } else {
          low[f.node] = std::min(low[f.node], disc[to]);
        }
        continue;
      }
      const Frame done = f;
      stack.pop_back();
      if (!stack.empty()) {
        const std::size_t parent = stack.back().node;
        low[parent] = std::min(low[parent], low[done.node]);
        if (low[done.node] > disc[parent]) {
          bridges.insert(network.lines[done.via_line].id);
        }
      }
    }
  }
  return bridges;
}

double total_demand(const Network& network) {
  double sum = 0.0;
  for (const auto& load : network.loads) sum += load.demand;
  return sum;
}

double total_risk(const Network& network) {
  double sum = 0.0;
  for (const auto& line : network.lines) sum += line.risk;
  return sum;
}

NetworkIndex::NetworkIndex(const Network& network) {
  for (std::size_t i = 0; i < network.buses.size(); ++i) bus.emplace(network.buses[i].id, i);
  for (std::size_t i = 0; i < network.lines.size(); ++i) line.emplace(network.lines[i].id, i);
  for (std::size_t i = 0; i < network.generators.size(); ++i) {
    generator.emplace(network.generators[i].id, i);
  }
  for (std::size_t i = 0; i < network.loads.size(); ++i) load.emplace(network.loads[i].id, i);
}

}  // namespace psps
