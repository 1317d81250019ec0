#include "dopf/parse.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <queue>
#include <set>
#include <sstream>

#include <json.hpp>

namespace dopf {
namespace {

// --- Matpower .m subset ------------------------------------------------

struct Scanner {
  const std::string& s;
  size_t pos = 0;

  explicit Scanner(const std::string& text) : s(text) {}

  bool eof() const { return pos >= s.size(); }
  char peek() const { return pos < s.size() ? s[pos] : '\0'; }

  void line_col(size_t at, int& line, int& col) const {
    line = 1;
    col = 1;
    for (size_t i = 0; i < at && i < s.size(); ++i) {
      if (s[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  }

  [[noreturn]] void fail(const std::string& msg) const {
    int line, col;
    line_col(pos, line, col);
    throw ParseError(line, col, msg);
  }

  void skip_ws() {
    while (!eof()) {
      char c = peek();
      if (c == '%') {  // comment to end of line
        while (!eof() && peek() != '\n') ++pos;
      } else if (c == '.' && pos + 2 < s.size() && s[pos + 1] == '.' &&
                 s[pos + 2] == '.') {  // matlab line continuation
        pos += 3;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos;
      } else {
        break;
      }
    }
  }

  bool try_consume(char c) {
    skip_ws();
    if (peek() == c) {
      ++pos;
      return true;
    }
    return false;
  }

  void expect(char c, const std::string& what) {
    if (!try_consume(c)) fail("expected '" + std::string(1, c) + "' " + what);
  }

  std::string read_ident() {
    skip_ws();
    size_t start = pos;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) ||
                      peek() == '_'))
      ++pos;
    if (pos == start) fail("expected identifier");
    return s.substr(start, pos - start);
  }

  double read_number() {
    skip_ws();
    const char* begin = s.c_str() + pos;
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin) fail("expected a number");
    pos += static_cast<size_t>(end - begin);
    return v;
  }

  bool number_next() {
    skip_ws();
    char c = peek();
    return std::isdigit(static_cast<unsigned char>(c)) || c == '-' ||
           c == '+' || c == '.';
  }

  void skip_string() {
    skip_ws();
    if (peek() != '\'') fail("expected a string literal");
    ++pos;
    while (!eof() && peek() != '\'') ++pos;
    if (eof()) fail("unterminated string");
    ++pos;
  }
};

using Matrix = std::vector<std::vector<double>>;

// newline-significant scan: rows end at ';' or '\n'
Matrix read_matrix_rows(Scanner& sc) {
  sc.expect('[', "to open a matrix");
  Matrix rows;
  std::vector<double> row;
  while (true) {
    if (sc.eof()) sc.fail("unterminated matrix");
    char c = sc.peek();
    if (c == '%') {
      while (!sc.eof() && sc.peek() != '\n') ++sc.pos;
      continue;
    }
    if (c == ']') {
      ++sc.pos;
      if (!row.empty()) rows.push_back(std::move(row));
      break;
    }
    if (c == ';' || c == '\n') {
      ++sc.pos;
      if (!row.empty()) {
        rows.push_back(std::move(row));
        row.clear();
      }
      continue;
    }
    if (c == ',' || c == ' ' || c == '\t' || c == '\r') {
      ++sc.pos;
      continue;
    }
    if (c == '.' && sc.pos + 2 < sc.s.size() && sc.s[sc.pos + 1] == '.' &&
        sc.s[sc.pos + 2] == '.') {
      sc.pos += 3;
      continue;
    }
    row.push_back(sc.read_number());
  }
  return rows;
}

struct RawCase {
  double base_mva = 0.0;
  bool has_base = false;
  Matrix bus, gen, branch, gencost;
  bool has_bus = false, has_gen = false, has_branch = false,
       has_gencost = false;
};

RawCase scan_matpower(const std::string& text) {
  Scanner sc(text);
  RawCase raw;
  sc.skip_ws();
  if (sc.eof()) sc.fail("empty case");

  while (!sc.eof()) {
    sc.skip_ws();
    if (sc.eof()) break;
    std::string ident = sc.read_ident();
    if (ident == "function") {
      // function mpc = <name>
      sc.read_ident();
      sc.expect('=', "in function header");
      sc.read_ident();
      continue;
    }
    if (ident != "mpc") sc.fail("unexpected token '" + ident + "'");
    sc.expect('.', "after mpc");
    std::string field = sc.read_ident();
    sc.expect('=', "after mpc." + field);
    sc.skip_ws();
    if (field == "baseMVA") {
      raw.base_mva = sc.read_number();
      raw.has_base = true;
    } else if (field == "bus" || field == "gen" || field == "branch" ||
               field == "gencost") {
      Matrix m = read_matrix_rows(sc);
      if (field == "bus") {
        raw.bus = std::move(m);
        raw.has_bus = true;
      } else if (field == "gen") {
        raw.gen = std::move(m);
        raw.has_gen = true;
      } else if (field == "branch") {
        raw.branch = std::move(m);
        raw.has_branch = true;
      } else {
        raw.gencost = std::move(m);
        raw.has_gencost = true;
      }
    } else if (sc.peek() == '\'') {
      sc.skip_string();
    } else if (sc.peek() == '[') {
      read_matrix_rows(sc);  // unknown matrix, ignore
    } else if (sc.number_next()) {
      sc.read_number();  // unknown scalar, ignore
    } else {
      sc.fail("unsupported value for mpc." + field);
    }
    sc.try_consume(';');
  }
  return raw;
}

[[noreturn]] void fail_row(const char* table, size_t row,
                           const std::string& msg) {
  throw ParseError(0, 0, std::string(table) + " row " +
                             std::to_string(row + 1) + ": " + msg);
}

Network build_matpower(const RawCase& raw) {
  if (!raw.has_base) throw ParseError(0, 0, "missing mpc.baseMVA");
  if (!raw.has_bus) throw ParseError(0, 0, "missing mpc.bus");
  if (!raw.has_branch) throw ParseError(0, 0, "missing mpc.branch");
  if (raw.base_mva <= 0.0) throw ParseError(0, 0, "baseMVA must be positive");
  const double base = raw.base_mva;

  Network net;
  net.base_mva = base;

  std::map<int, int> id_map;  // original bus id -> dense index
  for (size_t i = 0; i < raw.bus.size(); ++i) {
    const auto& row = raw.bus[i];
    if (row.size() < 13) fail_row("bus", i, "expected at least 13 columns");
    int orig = static_cast<int>(row[0]);
    if (!id_map.emplace(orig, static_cast<int>(i)).second)
      fail_row("bus", i, "duplicate bus id " + std::to_string(orig));
    Bus b;
    b.pd = row[2] / base;
    b.qd = row[3] / base;
    b.gs = row[4] / base;
    b.bs = row[5] / base;
    b.v_max = row[11];
    b.v_min = row[12];
    net.buses.push_back(b);
  }

  // branches: merge parallel circuits, fold half charging into endpoints
  std::map<std::pair<int, int>, Line> merged;
  for (size_t i = 0; i < raw.branch.size(); ++i) {
    const auto& row = raw.branch[i];
    if (row.size() < 11) fail_row("branch", i, "expected at least 11 columns");
    if (row[10] == 0.0) continue;  // out of service
    double ratio = row[8];
    if (ratio != 0.0 && ratio != 1.0)
      fail_row("branch", i, "transformer ratio is not supported");
    if (row[9] != 0.0)
      fail_row("branch", i, "phase-shift angle is not supported");
    auto from_it = id_map.find(static_cast<int>(row[0]));
    auto to_it = id_map.find(static_cast<int>(row[1]));
    if (from_it == id_map.end() || to_it == id_map.end())
      fail_row("branch", i, "endpoint references an unknown bus");
    int f = from_it->second, t = to_it->second;
    if (f == t) fail_row("branch", i, "self loop");
    double r = row[2], x = row[3], bc = row[4];
    double d = r * r + x * x;
    if (d == 0.0) fail_row("branch", i, "zero series impedance");
    double g = r / d, b = -x / d;
    net.buses[f].bs += bc / 2.0;
    net.buses[t].bs += bc / 2.0;
    std::pair<int, int> key = f < t ? std::make_pair(f, t)
                                    : std::make_pair(t, f);
    auto [it, fresh] = merged.try_emplace(key);
    Line& ln = it->second;
    if (fresh) {
      ln.from = key.first;
      ln.to = key.second;
    }
    ln.g += g;
    ln.b += b;
    if (row[5] > 0.0) {
      double smax = row[5] / base;
      ln.s_max = ln.s_max ? std::min(*ln.s_max, smax) : smax;
    }
  }
  for (auto& [key, ln] : merged) net.lines.push_back(ln);

  // generators and costs
  if (raw.has_gen) {
    if (!raw.has_gencost) throw ParseError(0, 0, "mpc.gen without mpc.gencost");
    if (raw.gencost.size() != raw.gen.size())
      throw ParseError(0, 0, "gencost must have one row per generator");
    for (size_t i = 0; i < raw.gen.size(); ++i) {
      const auto& row = raw.gen[i];
      if (row.size() < 10) fail_row("gen", i, "expected at least 10 columns");
      if (row[7] == 0.0) continue;  // out of service
      auto bus_it = id_map.find(static_cast<int>(row[0]));
      if (bus_it == id_map.end())
        fail_row("gen", i, "references an unknown bus");
      Bus& b = net.buses[bus_it->second];

      const auto& cost = raw.gencost[i];
      if (cost.size() < 4) fail_row("gencost", i, "expected at least 4 columns");
      if (cost[0] != 2.0)
        fail_row("gencost", i, "only polynomial cost models are supported");
      int ncost = static_cast<int>(cost[3]);
      if (ncost < 1 || ncost > 3)
        fail_row("gencost", i, "polynomial degree above 2 is not supported");
      if (cost.size() < static_cast<size_t>(4 + ncost))
        fail_row("gencost", i, "coefficient count mismatch");
      CostPoly poly;
      if (ncost == 3) {
        poly.c2 = cost[4];
        poly.c1 = cost[5];
        poly.c0 = cost[6];
      } else if (ncost == 2) {
        poly.c1 = cost[4];
        poly.c0 = cost[5];
      } else {
        poly.c0 = cost[4];
      }

      // aggregate multiple units on one bus: sum bounds and coefficients
      if (b.cost) {
        b.cost->c2 += poly.c2;
        b.cost->c1 += poly.c1;
        b.cost->c0 += poly.c0;
      } else {
        b.cost = poly;
      }
      b.qg_max += row[3] / base;
      b.qg_min += row[4] / base;
      b.pg_max += row[8] / base;
      b.pg_min += row[9] / base;
    }
  }
  return net;
}

void check_connected(const Network& net) {
  const int n = net.n_buses();
  if (n == 0) throw ParseError(0, 0, "case has no buses");
  std::vector<char> seen(n, 0);
  std::queue<int> q;
  q.push(0);
  seen[0] = 1;
  std::vector<std::vector<int>> adj(n);
  for (const Line& ln : net.lines) {
    adj[ln.from].push_back(ln.to);
    adj[ln.to].push_back(ln.from);
  }
  int reached = 1;
  while (!q.empty()) {
    int k = q.front();
    q.pop();
    for (int other : adj[k])
      if (!seen[other]) {
        seen[other] = 1;
        ++reached;
        q.push(other);
      }
  }
  if (reached != n && n > 1)
    throw ParseError(0, 0, "network graph is disconnected");
}

// --- canonical JSON ------------------------------------------------------

using njson = nlohmann::ordered_json;

double need_num(const njson& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_number())
    throw ParseError(0, 0, where + ": missing numeric field '" + key + "'");
  return j[key].get<double>();
}

Network parse_json(const std::string& text) {
  njson j;
  try {
    j = njson::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // map the byte offset back to line/column
    int line = 1, col = 1;
    for (size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError(line, col, e.what());
  }

  Network net;
  if (!j.contains("base_mva") || !j["base_mva"].is_number())
    throw ParseError(0, 0, "missing numeric field 'base_mva'");
  net.base_mva = j["base_mva"].get<double>();
  if (!j.contains("buses") || !j["buses"].is_array())
    throw ParseError(0, 0, "missing array 'buses'");
  if (!j.contains("lines") || !j["lines"].is_array())
    throw ParseError(0, 0, "missing array 'lines'");

  int k = 0;
  for (const auto& jb : j["buses"]) {
    const std::string where = "bus " + std::to_string(k++);
    Bus b;
    b.pd = need_num(jb, "pd", where);
    b.qd = need_num(jb, "qd", where);
    b.pg_min = need_num(jb, "pg_min", where);
    b.pg_max = need_num(jb, "pg_max", where);
    b.qg_min = need_num(jb, "qg_min", where);
    b.qg_max = need_num(jb, "qg_max", where);
    b.v_min = need_num(jb, "v_min", where);
    b.v_max = need_num(jb, "v_max", where);
    if (jb.contains("gs")) b.gs = need_num(jb, "gs", where);
    if (jb.contains("bs")) b.bs = need_num(jb, "bs", where);
    if (jb.contains("cost") && !jb["cost"].is_null()) {
      CostPoly c;
      c.c2 = need_num(jb["cost"], "c2", where + " cost");
      c.c1 = need_num(jb["cost"], "c1", where + " cost");
      c.c0 = need_num(jb["cost"], "c0", where + " cost");
      b.cost = c;
    }
    net.buses.push_back(b);
  }
  int li = 0;
  for (const auto& jl : j["lines"]) {
    const std::string where = "line " + std::to_string(li++);
    Line ln;
    ln.from = static_cast<int>(need_num(jl, "from", where));
    ln.to = static_cast<int>(need_num(jl, "to", where));
    ln.g = need_num(jl, "g", where);
    ln.b = need_num(jl, "b", where);
    if (ln.from < 0 || ln.from >= net.n_buses() || ln.to < 0 ||
        ln.to >= net.n_buses())
      throw ParseError(0, 0, where + ": endpoint out of range");
    for (const char* key : {"i_max", "s_max", "p_max"}) {
      if (jl.contains(key) && !jl[key].is_null()) {
        double v = need_num(jl, key, where);
        if (key[0] == 'i') ln.i_max = v;
        else if (key[0] == 's') ln.s_max = v;
        else ln.p_max = v;
      }
    }
    net.lines.push_back(ln);
  }
  return net;
}

}  // namespace

Network parse_case(const std::string& text, CaseFormat format) {
  Network net = format == CaseFormat::Matpower ? build_matpower(scan_matpower(text))
                                               : parse_json(text);
  check_connected(net);
  return net;
}

Network parse_case_file(const std::string& path,
                        std::optional<CaseFormat> format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(0, 0, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  CaseFormat fmt;
  if (format) {
    fmt = *format;
  } else if (path.size() > 2 && path.substr(path.size() - 2) == ".m") {
    fmt = CaseFormat::Matpower;
  } else if (path.size() > 5 && path.substr(path.size() - 5) == ".json") {
    fmt = CaseFormat::Json;
  } else {
    throw ParseError(0, 0, "cannot infer case format of '" + path + "'");
  }
  return parse_case(ss.str(), fmt);
}

std::string serialize_network(const Network& net) {
  njson j;
  j["base_mva"] = net.base_mva;
  j["buses"] = njson::array();
  for (const Bus& b : net.buses) {
    njson jb;
    jb["pd"] = b.pd;
    jb["qd"] = b.qd;
    jb["pg_min"] = b.pg_min;
    jb["pg_max"] = b.pg_max;
    jb["qg_min"] = b.qg_min;
    jb["qg_max"] = b.qg_max;
    jb["v_min"] = b.v_min;
    jb["v_max"] = b.v_max;
    jb["gs"] = b.gs;
    jb["bs"] = b.bs;
    if (b.cost)
      jb["cost"] = {{"c2", b.cost->c2}, {"c1", b.cost->c1}, {"c0", b.cost->c0}};
    else
      jb["cost"] = nullptr;
    j["buses"].push_back(jb);
  }
  j["lines"] = njson::array();
  for (const Line& ln : net.lines) {
    njson jl;
    jl["from"] = ln.from;
    jl["to"] = ln.to;
    jl["g"] = ln.g;
    jl["b"] = ln.b;
    if (ln.i_max) jl["i_max"] = *ln.i_max;
    if (ln.s_max) jl["s_max"] = *ln.s_max;
    if (ln.p_max) jl["p_max"] = *ln.p_max;
    j["lines"].push_back(jl);
  }
  return j.dump(2) + "\n";
}

}  // namespace dopf
