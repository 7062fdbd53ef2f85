#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "psps/json_fwd.hpp"
#include "psps/network.hpp"

namespace psps {

/// Raw matrices of a Matpower case, as read.
struct MatpowerCase {
  double base_mva = 100.0;
  std::vector<std::vector<double>> bus_rows;
  std::vector<std::vector<double>> gen_rows;
  std::vector<std::vector<double>> branch_rows;
};

/// Reads the `mpc.baseMVA`, `mpc.bus`, `mpc.gen` and `mpc.branch`
/// assignments; every other statement is skipped.
MatpowerCase read_matpower(std::string_view text);

/// Converts a case to per-unit. Branches with RATE_A = 0 get a thermal limit
/// of 100 x total demand (100 pu when the case has no demand). Risks start at 0.
Network to_network(const MatpowerCase& mpc);

inline Network parse_matpower(std::string_view text) { return to_network(read_matpower(text)); }

struct RiskTable {
  std::map<int, double> entries;          // line id -> risk
  std::optional<std::uint64_t> seed;      // set when generated, empty when read from file
};

RiskTable parse_risk_csv(std::string_view text, const Network& network);
std::string write_risk_csv(const RiskTable& table);

/// One uniform [0, 1) draw per line, in network line order, from Rng(seed).
RiskTable generate_risk(const Network& network, std::uint64_t seed);

/// Copy of `network` with risks taken from the table. Throws DataError when
/// the table does not cover exactly the network's lines.
Network apply_risk(Network network, const RiskTable& table);

inline constexpr int kNetworkFormatVersion = 1;

Json network_to_json(const Network& network);
Network network_from_json(const Json& doc);

std::string read_text_file(const std::string& path);

/// Writes `content` to `path` through a temporary sibling and a rename.
void write_file_atomic(const std::string& path, std::string_view content);

/// Loads a network from `.json` or Matpower `.m` by extension.
Network load_network_file(const std::string& path);

}  // namespace psps
