#pragma once

#include <cstdint>
#include <cstdlib>
#include <string>

#include "psps/network.hpp"
#include "psps/random.hpp"

namespace psps::testing {

/// Three buses in a triangle; one 2.0 pu generator at bus 1, loads of 1.0
/// and 0.5 at buses 2 and 3. Line risks 0.9, 0.2, 0.1.
inline Network tri3(double p_max = 2.0) {
  Network n;
  n.buses = {{1, "1"}, {2, "2"}, {3, "3"}};
  n.lines = {{1, 1, 2, 10.0, 1.5, 0.9}, {2, 1, 3, 10.0, 1.5, 0.2}, {3, 2, 3, 10.0, 1.5, 0.1}};
  n.generators = {{1, 1, 0.0, p_max, 1.0}};
  n.loads = {{1, 2, 1.0}, {2, 3, 0.5}};
  return n;
}

struct RandomNetworkOptions {
  int max_buses = 6;
  int max_lines = 8;
  int max_generators = 2;
  double flex = 1.0;
  bool allow_p_min = true;
};

/// Connected network: random spanning tree plus extra lines, no self loops.
inline Network random_network(std::uint64_t seed, const RandomNetworkOptions& opt = {}) {
  Rng rng(seed);
  Network n;
  const int buses = rng.uniform_int(2, opt.max_buses);
  for (int i = 1; i <= buses; ++i) n.buses.push_back({i, "b" + std::to_string(i)});
  int next_line = 1;
  auto add_line = [&](int a, int b) {
    Line l;
    l.id = next_line++;
    l.from_bus = a;
    l.to_bus = b;
    l.susceptance_b = rng.uniform(4.0, 20.0);
    l.thermal_limit = rng.uniform(0.3, 1.6);
    l.risk = rng.uniform();
    l.angle_diff_cap = rng.uniform() < 0.3 ? rng.uniform(0.03, 0.2) : kDefaultAngleDiffCap;
    n.lines.push_back(l);
  };
  for (int i = 2; i <= buses; ++i) add_line(rng.uniform_int(1, i - 1), i);
  const int max_extra = opt.max_lines - (buses - 1);
  const int extra = max_extra > 0 ? rng.uniform_int(0, max_extra) : 0;
  for (int k = 0; k < extra; ++k) {
    const int a = rng.uniform_int(1, buses);
    int b = rng.uniform_int(1, buses - 1);
    if (b >= a) ++b;
    add_line(a, b);
  }
  const int gens = rng.uniform_int(1, opt.max_generators);
  for (int k = 1; k <= gens; ++k) {
    Generator g;
    g.id = k;
    g.bus = rng.uniform_int(1, buses);
    g.p_max = rng.uniform(0.8, 2.5);
    g.p_min = opt.allow_p_min && rng.uniform() < 0.3 ? rng.uniform(0.1, 0.4) * g.p_max : 0.0;
    g.flex = opt.flex;
    n.generators.push_back(g);
  }
  int next_load = 1;
  for (int i = 1; i <= buses; ++i) {
    if (rng.uniform() < 0.75) n.loads.push_back({next_load++, i, rng.uniform(0.1, 0.9)});
  }
  if (n.loads.empty()) n.loads.push_back({1, buses, 0.5});
  return n;
}

inline bool highs_available() {
  static const bool ok = std::system("python3 -c 'import highspy' > /dev/null 2>&1") == 0;
  return ok;
}

inline std::string highs_command() {
  return std::string("python3 ") + PSPS_SOURCE_DIR + "/tools/highs_solve.py {mps} {sol}";
}

}  // namespace psps::testing
