#include "psps/case_io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "psps/error.hpp"
#include "psps/random.hpp"

namespace psps {

namespace {

// ---------------------------------------------------------------------------
// Matpower lexer

enum class Tok { Ident, Number, Punct, String, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  int line = 0;
  int column = 0;
  bool newline_before = false;
};

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    bool newline = false;
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == '\n') {
        newline = true;
        advance();
        continue;
      }
      if (c == ' ' || c == '\t' || c == '\r') {
        advance();
        continue;
      }
      if (c == '%' || c == '#') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
        continue;
      }
      if (c == '.' && pos_ + 2 < text_.size() && text_.substr(pos_, 3) == "...") {
        // line continuation
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
        if (pos_ < text_.size()) advance();
        continue;
      }
      Token tok;
      tok.line = line_;
      tok.column = column_;
      tok.newline_before = newline;
      newline = false;
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        tok.kind = Tok::Ident;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_' ||
                text_[pos_] == '.')) {
          tok.text += text_[pos_];
          advance();
        }
      } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' ||
                 ((c == '-' || c == '+') && starts_number(pos_ + 1))) {
        tok.kind = Tok::Number;
        tok.text += c;
        advance();
        while (pos_ < text_.size()) {
          const char d = text_[pos_];
          const bool exp_sign = (d == '-' || d == '+') && !tok.text.empty() &&
                                (tok.text.back() == 'e' || tok.text.back() == 'E');
          if (std::isalnum(static_cast<unsigned char>(d)) || d == '.' || exp_sign) {
            tok.text += d;
            advance();
          } else {
            break;
          }
        }
      } else if (c == '\'' && !transpose_context(out)) {
        tok.kind = Tok::String;
        advance();
        while (pos_ < text_.size() && text_[pos_] != '\'' && text_[pos_] != '\n') {
          tok.text += text_[pos_];
          advance();
        }
        if (pos_ < text_.size() && text_[pos_] == '\'') advance();
      } else {
        tok.kind = Tok::Punct;
        tok.text = std::string(1, c);
        advance();
      }
      out.push_back(std::move(tok));
    }
    Token end;
    end.line = line_;
    end.column = column_;
    out.push_back(end);
    return out;
  }

 private:
  bool starts_number(std::size_t p) const {
    return p < text_.size() &&
           (std::isdigit(static_cast<unsigned char>(text_[p])) || text_[p] == '.' ||
            text_[p] == 'I' || text_[p] == 'i');
  }

  static bool transpose_context(const std::vector<Token>& out) {
    if (out.empty()) return false;
    const auto& prev = out.back();
    return prev.kind == Tok::Ident || prev.kind == Tok::Number ||
           (prev.kind == Tok::Punct && (prev.text == "]" || prev.text == ")"));
  }

  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      column_ = 1;
    } else {
      ++column_;
    }
    ++pos_;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int column_ = 1;
};

double to_number(const Token& tok) {
  if (tok.kind == Tok::Ident) {
    // Inf / NaN written as identifiers
    std::string lower;
    for (char c : tok.text) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (lower == "inf") return HUGE_VAL;
    if (lower == "nan") return NAN;
  }
  if (tok.kind != Tok::Number) {
    throw ParseError("non-numeric token '" + tok.text + "'", tok.line, tok.column);
  }
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(tok.text.c_str(), &end);
  if (end != tok.text.c_str() + tok.text.size() || errno == ERANGE) {
    throw ParseError("non-numeric token '" + tok.text + "'", tok.line, tok.column);
  }
  return v;
}

class MatpowerParser {
 public:
  explicit MatpowerParser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  MatpowerCase run() {
    MatpowerCase mpc;
    bool have_base = false, have_bus = false, have_gen = false, have_branch = false;
    while (peek().kind != Tok::End) {
      const Token& t = peek();
      if (t.kind == Tok::Ident && t.text.starts_with("mpc.") && peek(1).text == "=") {
        const std::string field = t.text.substr(4);
        pos_ += 2;
        if (field == "baseMVA") {
          mpc.base_mva = to_number(take_scalar());
          have_base = true;
        } else if (field == "bus") {
          mpc.bus_rows = matrix("mpc.bus", 3);
          have_bus = true;
        } else if (field == "gen") {
          mpc.gen_rows = matrix("mpc.gen", 10);
          have_gen = true;
        } else if (field == "branch") {
          mpc.branch_rows = matrix("mpc.branch", 11);
          have_branch = true;
        } else {
          skip_statement();
        }
        continue;
      }
      skip_statement();
    }
    if (!have_base) throw ParseError("missing mpc.baseMVA");
    if (!have_bus) throw ParseError("missing mpc.bus");
    if (!have_gen) throw ParseError("missing mpc.gen");
    if (!have_branch) throw ParseError("missing mpc.branch");
    return mpc;
  }

 private:
  const Token& peek(std::size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }

  Token take_scalar() {
    Token t = peek();
    if (t.kind == Tok::End) throw ParseError("unexpected end of file", t.line, t.column);
    ++pos_;
    if (peek().text == ";") ++pos_;
    return t;
  }

  void skip_statement() {
    int depth = 0;
    while (peek().kind != Tok::End) {
      const Token t = peek();
      ++pos_;
      if (t.kind == Tok::Punct) {
        if (t.text == "[" || t.text == "{" || t.text == "(") ++depth;
        if (t.text == "]" || t.text == "}" || t.text == ")") --depth;
        if (depth <= 0 && t.text == ";") return;
      }
      if (depth <= 0 && peek().newline_before) return;
    }
  }

  std::vector<std::vector<double>> matrix(const std::string& name, std::size_t min_cols) {
    const Token open = peek();
    if (open.text != "[") throw ParseError("expected '[' after " + name, open.line, open.column);
    ++pos_;
    std::vector<std::vector<double>> rows;
    std::vector<double> row;
    auto flush = [&] {
      if (!row.empty()) rows.push_back(std::move(row));
      row.clear();
    };
    while (true) {
      const Token t = peek();
      if (t.kind == Tok::End) throw ParseError("unterminated matrix " + name, t.line, t.column);
      if (t.newline_before) flush();
      ++pos_;
      if (t.kind == Tok::Punct && t.text == "]") break;
      if (t.kind == Tok::Punct && t.text == ";") {
        flush();
        continue;
      }
      if (t.kind == Tok::Punct && t.text == ",") continue;
      row.push_back(to_number(t));
    }
    flush();
    if (peek().text == ";") ++pos_;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.front().size()) {
        throw ParseError(name + " is not rectangular (row " + std::to_string(i + 1) + ")");
      }
    }
    if (!rows.empty() && rows.front().size() < min_cols) {
      throw ParseError(name + " needs at least " + std::to_string(min_cols) + " columns");
    }
    return rows;
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

template <class T>
T get_field(const Json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw SchemaError(where + ": missing \"" + key + "\"");
  }
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw SchemaError(where + ": field \"" + std::string(key) + "\" has the wrong type");
  }
}

template <class T>
T get_field_or(const Json& obj, const char* key, T fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  return get_field<T>(obj, key, where);
}

const Json& get_array(const Json& doc, const char* key) {
  if (!doc.contains(key)) throw SchemaError(std::string("network JSON: missing \"") + key + "\"");
  const Json& arr = doc.at(key);
  if (!arr.is_array()) throw SchemaError(std::string("network JSON: \"") + key + "\" must be an array");
  return arr;
}

}  // namespace

MatpowerCase read_matpower(std::string_view text) {
  return MatpowerParser(Lexer(text).run()).run();
}

Network to_network(const MatpowerCase& mpc) {
  if (!(mpc.base_mva > 0.0) || !std::isfinite(mpc.base_mva)) {
    throw DataError("mpc.baseMVA must be positive");
  }
  const double base = mpc.base_mva;
  Network net;
  net.base_mva = base;

  int load_id = 0;
  for (const auto& row : mpc.bus_rows) {
    const int id = static_cast<int>(row[0]);
    if (static_cast<double>(id) != row[0]) throw DataError("bus id must be an integer");
    net.buses.push_back({id, ""});
    if (row[2] > 0.0) net.loads.push_back({++load_id, id, row[2] / base});
  }
  for (std::size_t r = 0; r < mpc.gen_rows.size(); ++r) {
    const auto& row = mpc.gen_rows[r];
    if (row[7] == 0.0) continue;
    Generator gen;
    gen.id = static_cast<int>(r + 1);
    gen.bus = static_cast<int>(row[0]);
    gen.p_max = row[8] / base;
    gen.p_min = std::max(0.0, row[9]) / base;
    gen.flex = 1.0;
    net.generators.push_back(gen);
  }

  const double demand = total_demand(net);
  const double unlimited = demand > 0.0 ? 100.0 * demand : 100.0;
  for (std::size_t r = 0; r < mpc.branch_rows.size(); ++r) {
    const auto& row = mpc.branch_rows[r];
    if (row[10] == 0.0) continue;
    const int id = static_cast<int>(r + 1);
    const double x = row[3];
    if (!(x > 0.0)) {
      throw DataError("branch " + std::to_string(id) + " (" + std::to_string(static_cast<int>(row[0])) +
                      "-" + std::to_string(static_cast<int>(row[1])) + ") has nonpositive reactance X");
    }
    Line line;
    line.id = id;
    line.from_bus = static_cast<int>(row[0]);
    line.to_bus = static_cast<int>(row[1]);
    line.susceptance_b = 1.0 / x;
    line.thermal_limit = row[5] > 0.0 ? row[5] / base : unlimited;
    line.risk = 0.0;
    line.angle_diff_cap = kDefaultAngleDiffCap;
    net.lines.push_back(line);
  }
  require_valid(net);
  return net;
}

RiskTable parse_risk_csv(std::string_view text, const Network& network) {
  const NetworkIndex index(network);
  RiskTable table;
  std::size_t pos = 0;
  int line_no = 0;
  bool header_seen = false;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const std::string row = trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (row.empty()) continue;
    if (!header_seen) {
      std::string compact;
      for (char c : row) {
        if (!std::isspace(static_cast<unsigned char>(c))) compact += c;
      }
      if (compact.starts_with("\xEF\xBB\xBF")) compact = compact.substr(3);
      if (compact != "line_id,risk") {
        throw ParseError("risk CSV header must be 'line_id,risk'", line_no, 1);
      }
      header_seen = true;
      continue;
    }
    const auto comma = row.find(',');
    if (comma == std::string::npos) throw ParseError("expected 'line_id,risk'", line_no, 1);
    const std::string id_text = trim(std::string_view(row).substr(0, comma));
    const std::string risk_text = trim(std::string_view(row).substr(comma + 1));
    char* end = nullptr;
    const long id = std::strtol(id_text.c_str(), &end, 10);
    if (id_text.empty() || *end != '\0') throw ParseError("bad line id '" + id_text + "'", line_no, 1);
    end = nullptr;
    const double risk = std::strtod(risk_text.c_str(), &end);
    if (risk_text.empty() || *end != '\0' || !std::isfinite(risk)) {
      throw ParseError("bad risk value '" + risk_text + "'", line_no, static_cast<int>(comma + 2));
    }
    const int line_id = static_cast<int>(id);
    if (!index.line.contains(line_id)) {
      throw DataError("unknown line id " + id_text + " in risk table");
    }
    if (risk < 0.0) throw DataError("negative risk for line " + id_text);
    if (!table.entries.emplace(line_id, risk).second) {
      throw DataError("duplicate risk for line " + id_text);
    }
  }
  if (!header_seen) throw ParseError("empty risk CSV");
  for (const auto& line : network.lines) {
    if (!table.entries.contains(line.id)) {
      throw DataError("risk missing for line " + std::to_string(line.id));
    }
  }
  return table;
}

std::string write_risk_csv(const RiskTable& table) {
  std::ostringstream out;
  out.precision(17);
  out << "line_id,risk\n";
  for (const auto& [id, risk] : table.entries) out << id << ',' << risk << '\n';
  return out.str();
}

RiskTable generate_risk(const Network& network, std::uint64_t seed) {
  Rng rng(seed);
  RiskTable table;
  table.seed = seed;
  for (const auto& line : network.lines) table.entries[line.id] = rng.uniform();
  return table;
}

Network apply_risk(Network network, const RiskTable& table) {
  const NetworkIndex index(network);
  for (const auto& [id, risk] : table.entries) {
    if (!index.line.contains(id)) {
      throw DataError("unknown line id " + std::to_string(id) + " in risk table");
    }
  }
  for (auto& line : network.lines) {
    const auto it = table.entries.find(line.id);
    if (it == table.entries.end()) {
      throw DataError("risk missing for line " + std::to_string(line.id));
    }
    if (it->second < 0.0) throw DataError("negative risk for line " + std::to_string(line.id));
    line.risk = it->second;
  }
  return network;
}

Json network_to_json(const Network& network) {
  Json doc;
  doc["format_version"] = kNetworkFormatVersion;
  doc["base_mva"] = network.base_mva;
  doc["buses"] = Json::array();
  for (const auto& b : network.buses) doc["buses"].push_back({{"id", b.id}, {"name", b.name}});
  doc["lines"] = Json::array();
  for (const auto& l : network.lines) {
    doc["lines"].push_back({{"id", l.id},
                            {"from_bus", l.from_bus},
                            {"to_bus", l.to_bus},
                            {"susceptance_b", l.susceptance_b},
                            {"thermal_limit", l.thermal_limit},
                            {"risk", l.risk},
                            {"angle_diff_cap", l.angle_diff_cap}});
  }
  doc["generators"] = Json::array();
  for (const auto& g : network.generators) {
    doc["generators"].push_back(
        {{"id", g.id}, {"bus", g.bus}, {"p_min", g.p_min}, {"p_max", g.p_max}, {"flex", g.flex}});
  }
  doc["loads"] = Json::array();
  for (const auto& d : network.loads) {
    doc["loads"].push_back({{"id", d.id}, {"bus", d.bus}, {"demand", d.demand}});
  }
  return doc;
}

Network network_from_json(const Json& doc) {
  if (!doc.is_object()) throw SchemaError("network JSON must be an object");
  const int version = get_field<int>(doc, "format_version", "network JSON");
  if (version != kNetworkFormatVersion) {
    throw SchemaError("unsupported network format_version " + std::to_string(version));
  }
  Network net;
  net.base_mva = get_field<double>(doc, "base_mva", "network JSON");
  for (const auto& b : get_array(doc, "buses")) {
    net.buses.push_back({get_field<int>(b, "id", "bus"), get_field_or<std::string>(b, "name", "", "bus")});
  }
  for (const auto& l : get_array(doc, "lines")) {
    Line line;
    line.id = get_field<int>(l, "id", "line");
    const std::string where = "line " + std::to_string(line.id);
    line.from_bus = get_field<int>(l, "from_bus", where);
    line.to_bus = get_field<int>(l, "to_bus", where);
    line.susceptance_b = get_field<double>(l, "susceptance_b", where);
    line.thermal_limit = get_field<double>(l, "thermal_limit", where);
    line.risk = get_field_or<double>(l, "risk", 0.0, where);
    line.angle_diff_cap = get_field_or<double>(l, "angle_diff_cap", kDefaultAngleDiffCap, where);
    net.lines.push_back(line);
  }
  for (const auto& g : get_array(doc, "generators")) {
    Generator gen;
    gen.id = get_field<int>(g, "id", "generator");
    const std::string where = "generator " + std::to_string(gen.id);
    gen.bus = get_field<int>(g, "bus", where);
    gen.p_min = get_field_or<double>(g, "p_min", 0.0, where);
    gen.p_max = get_field<double>(g, "p_max", where);
    gen.flex = get_field_or<double>(g, "flex", 1.0, where);
    net.generators.push_back(gen);
  }
  for (const auto& d : get_array(doc, "loads")) {
    LoadPoint load;
    load.id = get_field<int>(d, "id", "load");
    const std::string where = "load " + std::to_string(load.id);
    load.bus = get_field<int>(d, "bus", where);
    load.demand = get_field<double>(d, "demand", where);
    net.loads.push_back(load);
  }
  require_valid(net);
  return net;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file_atomic(const std::string& path, std::string_view content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw EnvironmentError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw EnvironmentError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw EnvironmentError("cannot rename into " + path);
  }
}

Network load_network_file(const std::string& path) {
  const std::string text = read_text_file(path);
  if (path.ends_with(".m")) return parse_matpower(text);
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": malformed JSON: " + e.what());
  }
  return network_from_json(doc);
}

}  // namespace psps
