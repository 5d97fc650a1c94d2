#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lagopf {

enum class BusKind { slack, generator, load };

/// c(P) = c2*P^2 + c1*P + c0, with P in per-unit.
struct CostPolynomial {
  double c0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;

  double operator()(double p) const { return (c2 * p + c1) * p + c0; }
  double derivative(double p) const { return 2.0 * c2 * p + c1; }

  bool operator==(const CostPolynomial&) const = default;
};

struct Bus {
  int id = 0;           // dense index
  int external_id = 0;  // bus number in the source file
  BusKind kind = BusKind::load;
  double v_min = 0.9;
  double v_max = 1.1;
  double p_load = 0.0;
  double q_load = 0.0;
};

struct Branch {
  int from_bus = 0;
  int to_bus = 0;
  double g = 0.0;
  double b = 0.0;
  double b_charge = 0.0;
  // <= 0 or infinite means unbounded
  double s_max = 0.0;
  bool in_service = true;
  // series impedance as read from a case file; NaN for branches built from g, b
  double r = std::numeric_limits<double>::quiet_NaN();
  double x = std::numeric_limits<double>::quiet_NaN();

  double b_hat() const { return b - 0.5 * b_charge; }
  bool flow_limited() const { return in_service && s_max > 0.0 && std::isfinite(s_max); }
};

struct Generator {
  int bus = 0;
  double p_min = 0.0;
  double p_max = 0.0;
  double q_min = 0.0;
  double q_max = 0.0;
  CostPolynomial cost;
  // operating setpoints carried from the case file; only the plain power flow uses them
  double p_set = 0.0;
  double v_set = 1.0;
};

struct Network {
  std::string name = "case";
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;
  int slack_bus = 0;
  // generator index per bus, -1 if none; rebuilt by index()
  std::vector<int> gen_of_bus;

  std::size_t size() const { return buses.size(); }

  void index() {
    gen_of_bus.assign(buses.size(), -1);
    for (std::size_t k = 0; k < generators.size(); ++k) {
      const int bus = generators[k].bus;
      if (bus >= 0 && static_cast<std::size_t>(bus) < buses.size()) gen_of_bus[bus] = static_cast<int>(k);
    }
  }

  const Generator* generator_at(int bus) const {
    const int k = gen_of_bus.at(bus);
    return k < 0 ? nullptr : &generators[k];
  }
};

struct LoadProfile {
  std::vector<double> p;
  std::vector<double> q;

  bool operator==(const LoadProfile&) const = default;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Violation {
  std::string code;
  std::string element;  // "bus 3", "branch 7", "gen 0" or "network"
  std::string message;
};

inline std::string to_string(const Violation& v) { return v.code + " " + v.element + " " + v.message; }

inline LoadProfile nominal_load(const Network& net) {
  LoadProfile load;
  load.p.reserve(net.size());
  load.q.reserve(net.size());
  for (const Bus& bus : net.buses) {
    load.p.push_back(bus.p_load);
    load.q.push_back(bus.q_load);
  }
  return load;
}

namespace detail {

inline std::string strip_comments(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool in_comment = false;
  for (char ch : text) {
    if (ch == '\n') in_comment = false;
    if (ch == '%' || ch == '#') in_comment = true;
    if (!in_comment) out.push_back(ch);
  }
  return out;
}

inline int line_of(std::string_view text, std::size_t pos) {
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

// Rows of the matrix assigned to `mpc.<name>`; rows end at ';' or newline.
inline std::optional<std::vector<std::vector<double>>> read_table(const std::string& text, const std::string& name) {
  const std::string key = "mpc." + name;
  std::size_t pos = 0;
  while (true) {
    pos = text.find(key, pos);
    if (pos == std::string::npos) return std::nullopt;
    std::size_t after = pos + key.size();
    while (after < text.size() && std::isspace(static_cast<unsigned char>(text[after]))) ++after;
    if (after < text.size() && text[after] == '=') {
      pos = after + 1;
      break;
    }
    pos = after;
  }
  const std::size_t open = text.find('[', pos);
  const std::size_t semi = text.find(';', pos);
  if (open == std::string::npos || (semi != std::string::npos && semi < open))
    throw ParseError("malformed table '" + name + "' at line " + std::to_string(line_of(text, pos)));
  const std::size_t close = text.find(']', open);
  if (close == std::string::npos) throw ParseError("unterminated table '" + name + "'");

  std::vector<std::vector<double>> rows;
  std::vector<double> row;
  std::size_t i = open + 1;
  auto flush = [&] {
    if (!row.empty()) rows.push_back(std::move(row));
    row.clear();
  };
  while (i < close) {
    const char ch = text[i];
    if (ch == ';' || ch == '\n') {
      flush();
      ++i;
    } else if (std::isspace(static_cast<unsigned char>(ch)) || ch == ',') {
      ++i;
    } else {
      const char* begin = text.data() + i;
      char* end = nullptr;
      const double value = std::strtod(begin, &end);
      if (end == begin)
        throw ParseError("malformed row in table '" + name + "' at line " + std::to_string(line_of(text, i)));
      row.push_back(value);
      i += static_cast<std::size_t>(end - begin);
    }
  }
  flush();
  return rows;
}

inline double read_scalar(const std::string& text, const std::string& name) {
  const std::string key = "mpc." + name;
  const std::size_t pos = text.find(key);
  if (pos == std::string::npos) throw ParseError("missing table '" + name + "'");
  const std::size_t eq = text.find('=', pos);
  if (eq == std::string::npos) throw ParseError("malformed '" + name + "'");
  char* end = nullptr;
  const double value = std::strtod(text.c_str() + eq + 1, &end);
  if (end == text.c_str() + eq + 1) throw ParseError("malformed '" + name + "'");
  return value;
}

inline void require_columns(const std::vector<double>& row, std::size_t n, const std::string& table, std::size_t index) {
  if (row.size() < n)
    throw ParseError("malformed row " + std::to_string(index + 1) + " in table '" + table + "': expected at least " +
                     std::to_string(n) + " columns, got " + std::to_string(row.size()));
}

inline bool connected(const Network& net) {
  const std::size_t n = net.size();
  if (n == 0) return true;
  std::vector<std::vector<int>> adjacency(n);
  for (const Branch& br : net.branches) {
    if (!br.in_service) continue;
    if (br.from_bus < 0 || br.to_bus < 0 || static_cast<std::size_t>(br.from_bus) >= n ||
        static_cast<std::size_t>(br.to_bus) >= n)
      continue;
    adjacency[br.from_bus].push_back(br.to_bus);
    adjacency[br.to_bus].push_back(br.from_bus);
  }
  std::vector<char> seen(n, 0);
  std::queue<int> frontier;
  frontier.push(0);
  seen[0] = 1;
  std::size_t count = 1;
  while (!frontier.empty()) {
    const int u = frontier.front();
    frontier.pop();
    for (int v : adjacency[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        ++count;
        frontier.push(v);
      }
    }
  }
  return count == n;
}

inline std::vector<int> isolated_buses(const Network& net) {
  const std::size_t n = net.size();
  std::vector<std::vector<int>> adjacency(n);
  for (const Branch& br : net.branches) {
    if (!br.in_service || br.from_bus < 0 || br.to_bus < 0 || static_cast<std::size_t>(br.from_bus) >= n ||
        static_cast<std::size_t>(br.to_bus) >= n)
      continue;
    adjacency[br.from_bus].push_back(br.to_bus);
    adjacency[br.to_bus].push_back(br.from_bus);
  }
  const int root = (net.slack_bus >= 0 && static_cast<std::size_t>(net.slack_bus) < n) ? net.slack_bus : 0;
  std::vector<char> seen(n, 0);
  std::queue<int> frontier;
  if (n > 0) {
    frontier.push(root);
    seen[root] = 1;
  }
  while (!frontier.empty()) {
    const int u = frontier.front();
    frontier.pop();
    for (int v : adjacency[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        frontier.push(v);
      }
    }
  }
  std::vector<int> out;
  for (std::size_t i = 0; i < n; ++i)
    if (!seen[i]) out.push_back(static_cast<int>(i));
  return out;
}

inline std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace detail

/// Every invariant violation of `net`, one entry each; never throws.
inline std::vector<Violation> validate(const Network& net) {
  std::vector<Violation> out;
  auto add = [&out](std::string code, std::string element, std::string message) {
    out.push_back({std::move(code), std::move(element), std::move(message)});
  };
  const int n = static_cast<int>(net.size());
  if (n == 0) {
    add("EMPTY", "network", "network has no buses");
    return out;
  }
  if (!(net.base_mva > 0.0) || !std::isfinite(net.base_mva)) add("BASE_MVA", "network", "base_mva must be positive");

  int slack_count = 0;
  for (int i = 0; i < n; ++i) {
    const Bus& bus = net.buses[i];
    const std::string el = "bus " + std::to_string(i);
    if (bus.id != i) add("INDEX", el, "bus ids must be dense 0..n-1");
    if (bus.kind == BusKind::slack) ++slack_count;
    if (!(bus.v_min > 0.0) || !(bus.v_min <= bus.v_max)) add("VOLTAGE_BOUNDS", el, "require 0 < v_min <= v_max");
    if (!std::isfinite(bus.p_load) || !std::isfinite(bus.q_load) || !std::isfinite(bus.v_max))
      add("NONFINITE", el, "non-finite bus data");
  }
  if (slack_count == 0) add("NO_SLACK", "network", "no slack bus");
  if (slack_count > 1) add("MULTIPLE_SLACK", "network", std::to_string(slack_count) + " slack buses");
  if (net.slack_bus < 0 || net.slack_bus >= n || net.buses[net.slack_bus].kind != BusKind::slack)
    add("NO_SLACK", "network", "slack_bus does not reference a slack bus");

  for (std::size_t k = 0; k < net.branches.size(); ++k) {
    const Branch& br = net.branches[k];
    const std::string el = "branch " + std::to_string(k);
    if (br.from_bus < 0 || br.from_bus >= n || br.to_bus < 0 || br.to_bus >= n) {
      add("BAD_BUS_REF", el, "branch references a missing bus");
      continue;
    }
    if (br.from_bus == br.to_bus) add("SELF_LOOP", el, "from_bus equals to_bus");
    if (!std::isfinite(br.g) || !std::isfinite(br.b) || !std::isfinite(br.b_charge))
      add("NONFINITE", el, "non-finite branch admittance");
    if (br.s_max < 0.0) add("FLOW_LIMIT", el, "negative s_max");
  }

  std::vector<int> per_bus(n, 0);
  for (std::size_t k = 0; k < net.generators.size(); ++k) {
    const Generator& gen = net.generators[k];
    const std::string el = "gen " + std::to_string(k);
    if (gen.bus < 0 || gen.bus >= n) {
      add("BAD_BUS_REF", el, "generator references a missing bus");
      continue;
    }
    if (++per_bus[gen.bus] > 1) add("DUPLICATE_GEN", el, "more than one generator at bus " + std::to_string(gen.bus));
    if (!(gen.p_min <= gen.p_max)) add("GEN_P_BOUNDS", el, "require p_min <= p_max");
    if (!(gen.q_min <= gen.q_max)) add("GEN_Q_BOUNDS", el, "require q_min <= q_max");
    if (gen.cost.c2 < 0.0) add("COST_NONCONVEX", el, "negative quadratic cost coefficient");
    else if (gen.cost.derivative(gen.p_min) < -1e-12 || gen.cost.derivative(gen.p_max) < -1e-12)
      add("COST_DECREASING", el, "cost decreases on [p_min, p_max]");
  }

  for (int bus : detail::isolated_buses(net))
    add("DISCONNECTED", "bus " + std::to_string(bus), "bus is not connected to the slack bus");
  return out;
}

/// Parse a MATPOWER version 2 case. Quantities are converted to per-unit on baseMVA.
inline Network parse_matpower_case(std::string_view raw) {
  const std::string text = detail::strip_comments(raw);
  Network net;
  {
    const std::size_t fn = text.find("function");
    if (fn != std::string::npos) {
      const std::size_t eq = text.find('=', fn);
      const std::size_t eol = text.find('\n', fn);
      if (eq != std::string::npos && eq < eol) {
        std::string name = text.substr(eq + 1, eol == std::string::npos ? std::string::npos : eol - eq - 1);
        name.erase(std::remove_if(name.begin(), name.end(), [](unsigned char c) { return std::isspace(c); }),
                   name.end());
        if (!name.empty()) net.name = name;
      }
    }
  }
  net.base_mva = detail::read_scalar(text, "baseMVA");
  if (!(net.base_mva > 0.0)) throw ParseError("baseMVA must be positive");
  const double base = net.base_mva;

  auto table = [&text](const std::string& name) {
    auto rows = detail::read_table(text, name);
    if (!rows) throw ParseError("missing table '" + name + "'");
    return *rows;
  };
  const auto bus_rows = table("bus");
  const auto gen_rows = table("gen");
  const auto branch_rows = table("branch");
  const auto cost_rows = table("gencost");

  std::map<int, int> dense;
  int slack_count = 0;
  for (std::size_t r = 0; r < bus_rows.size(); ++r) {
    const auto& row = bus_rows[r];
    detail::require_columns(row, 13, "bus", r);
    Bus bus;
    bus.external_id = static_cast<int>(row[0]);
    bus.id = static_cast<int>(net.buses.size());
    const int type = static_cast<int>(row[1]);
    if (type == 3) {
      bus.kind = BusKind::slack;
      ++slack_count;
      net.slack_bus = bus.id;
    } else if (type == 1 || type == 2) {
      bus.kind = BusKind::load;
    } else {
      throw ParseError("unsupported bus type " + std::to_string(type) + " at bus " + std::to_string(bus.external_id));
    }
    bus.p_load = row[2] / base;
    bus.q_load = row[3] / base;
    if (row[4] != 0.0 || row[5] != 0.0)
      throw ParseError("bus shunts are not modeled (bus " + std::to_string(bus.external_id) + ")");
    bus.v_max = row[11];
    bus.v_min = row[12];
    if (!dense.emplace(bus.external_id, bus.id).second)
      throw ParseError("duplicate bus number " + std::to_string(bus.external_id));
    net.buses.push_back(bus);
  }
  if (slack_count == 0) throw ParseError("no slack bus");
  if (slack_count > 1) throw ParseError("more than one slack bus");

  auto lookup = [&dense](double external, const std::string& what) {
    const auto it = dense.find(static_cast<int>(external));
    if (it == dense.end())
      throw ParseError(what + " references unknown bus " + std::to_string(static_cast<int>(external)));
    return it->second;
  };

  if (cost_rows.size() < gen_rows.size()) throw ParseError("gencost has fewer rows than gen");
  std::map<int, Generator> merged;
  for (std::size_t r = 0; r < gen_rows.size(); ++r) {
    const auto& row = gen_rows[r];
    detail::require_columns(row, 10, "gen", r);
    const auto& cost_row = cost_rows[r];
    detail::require_columns(cost_row, 4, "gencost", r);
    if (static_cast<int>(cost_row[0]) != 2)
      throw ParseError("unsupported gencost model " + std::to_string(static_cast<int>(cost_row[0])) + " in row " +
                       std::to_string(r + 1) + " (only polynomial model 2)");
    const int ncost = static_cast<int>(cost_row[3]);
    if (ncost < 1 || ncost > 3)
      throw ParseError("unsupported gencost with " + std::to_string(ncost) + " coefficients in row " +
                       std::to_string(r + 1));
    detail::require_columns(cost_row, 4 + static_cast<std::size_t>(ncost), "gencost", r);
    if (row[7] <= 0.0) continue;  // out of service

    // highest order first; convert from per-MW to per-unit
    double coeff[3] = {0.0, 0.0, 0.0};
    for (int k = 0; k < ncost; ++k) coeff[ncost - 1 - k] = cost_row[4 + k];
    CostPolynomial cost{coeff[0], coeff[1] * base, coeff[2] * base * base};

    const int bus = lookup(row[0], "generator " + std::to_string(r + 1));
    Generator gen;
    gen.bus = bus;
    gen.p_set = row[1] / base;
    gen.q_max = row[3] / base;
    gen.q_min = row[4] / base;
    gen.v_set = row[5];
    gen.p_max = row[8] / base;
    gen.p_min = row[9] / base;
    gen.cost = cost;
    auto [it, fresh] = merged.emplace(bus, gen);
    if (!fresh) {
      Generator& m = it->second;
      m.p_min += gen.p_min;
      m.p_max += gen.p_max;
      m.q_min += gen.q_min;
      m.q_max += gen.q_max;
      m.p_set += gen.p_set;
      m.cost.c0 += cost.c0;
      m.cost.c1 += cost.c1;
      m.cost.c2 += cost.c2;
    }
  }
  for (auto& [bus, gen] : merged) {
    net.generators.push_back(gen);
    if (net.buses[bus].kind != BusKind::slack) net.buses[bus].kind = BusKind::generator;
  }

  for (std::size_t r = 0; r < branch_rows.size(); ++r) {
    const auto& row = branch_rows[r];
    detail::require_columns(row, 11, "branch", r);
    Branch br;
    br.from_bus = lookup(row[0], "branch " + std::to_string(r + 1));
    br.to_bus = lookup(row[1], "branch " + std::to_string(r + 1));
    if (br.from_bus == br.to_bus) throw ParseError("branch " + std::to_string(r + 1) + " is a self loop");
    const double res = row[2];
    const double react = row[3];
    const double denom = res * res + react * react;
    if (!(denom > 0.0)) throw ParseError("branch " + std::to_string(r + 1) + " has zero impedance");
    br.g = res / denom;
    br.b = react / denom;
    br.r = res;
    br.x = react;
    br.b_charge = row[4];
    br.s_max = row[5] / base;
    const double tap = row[8];
    if (tap != 0.0 && tap != 1.0)
      throw ParseError("branch " + std::to_string(r + 1) + " has a non-unity tap ratio; transformers are not modeled");
    if (row[9] != 0.0)
      throw ParseError("branch " + std::to_string(r + 1) + " has a phase shift; transformers are not modeled");
    br.in_service = row[10] > 0.0;
    net.branches.push_back(br);
  }

  net.index();
  if (!detail::connected(net)) throw ParseError("disconnected graph: some buses are unreachable over in-service branches");
  return net;
}

/// MATPOWER v2 text for `net`; parse_matpower_case(write_matpower_case(net)) reproduces it.
inline std::string write_matpower_case(const Network& net) {
  using detail::fmt;
  const double base = net.base_mva;
  std::ostringstream os;
  os << "function mpc = " << net.name << "\n";
  os << "mpc.version = '2';\n";
  os << "mpc.baseMVA = " << fmt(base) << ";\n\n";
  os << "%% bus_i type Pd Qd Gs Bs area Vm Va baseKV zone Vmax Vmin\n";
  os << "mpc.bus = [\n";
  for (const Bus& bus : net.buses) {
    const int type = bus.kind == BusKind::slack ? 3 : (bus.kind == BusKind::generator ? 2 : 1);
    os << "\t" << bus.external_id << "\t" << type << "\t" << fmt(bus.p_load * base) << "\t" << fmt(bus.q_load * base)
       << "\t0\t0\t1\t1\t0\t0\t1\t" << fmt(bus.v_max) << "\t" << fmt(bus.v_min) << ";\n";
  }
  os << "];\n\n";
  os << "%% bus Pg Qg Qmax Qmin Vg mBase status Pmax Pmin\n";
  os << "mpc.gen = [\n";
  for (const Generator& gen : net.generators) {
    os << "\t" << net.buses[gen.bus].external_id << "\t" << fmt(gen.p_set * base) << "\t0\t" << fmt(gen.q_max * base)
       << "\t" << fmt(gen.q_min * base) << "\t" << fmt(gen.v_set) << "\t" << fmt(base) << "\t1\t"
       << fmt(gen.p_max * base) << "\t" << fmt(gen.p_min * base) << ";\n";
  }
  os << "];\n\n";
  os << "%% fbus tbus r x b rateA rateB rateC ratio angle status angmin angmax\n";
  os << "mpc.branch = [\n";
  for (const Branch& br : net.branches) {
    double res = br.r, react = br.x;
    const double z2 = res * res + react * react;
    if (!(res / z2 == br.g && react / z2 == br.b)) {
      const double denom = br.g * br.g + br.b * br.b;
      res = br.g / denom;
      react = br.b / denom;
    }
    os << "\t" << net.buses[br.from_bus].external_id << "\t" << net.buses[br.to_bus].external_id << "\t"
       << fmt(res) << "\t" << fmt(react) << "\t" << fmt(br.b_charge) << "\t" << fmt(br.s_max * base)
       << "\t0\t0\t0\t0\t" << (br.in_service ? 1 : 0) << "\t-360\t360;\n";
  }
  os << "];\n\n";
  os << "%% 2 startup shutdown n c(n-1) ... c0\n";
  os << "mpc.gencost = [\n";
  for (const Generator& gen : net.generators) {
    os << "\t2\t0\t0\t3\t" << fmt(gen.cost.c2 / (base * base)) << "\t" << fmt(gen.cost.c1 / base) << "\t"
       << fmt(gen.cost.c0) << ";\n";
  }
  os << "];\n";
  return os.str();
}

/// 64-bit FNV-1a over the canonical case text, as 16 hex digits.
inline std::string fingerprint(const Network& net) {
  const std::string text = write_matpower_case(net);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace lagopf
