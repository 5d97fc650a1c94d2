#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lagopf/acopf.hpp"
#include "lagopf/network.hpp"
#include "lagopf/rng.hpp"
#include "lagopf/solver.hpp"

namespace lagopf {

enum class Label { global, local };

inline const char* to_string(Label l) { return l == Label::global ? "global" : "local"; }

struct Sample {
  int load_id = 0;
  LoadProfile load;
  OperatingPoint point;
  GenDispatch gen;
  DualVector duals;
  double cost = 0.0;
  Label label = Label::global;
  int cluster_rank = 0;

  bool operator==(const Sample&) const = default;
};

struct Dataset {
  std::string fingerprint;
  std::size_t buses = 0;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  bool operator==(const Dataset&) const = default;
};

struct DatasetSpec {
  int n_samples = 500;
  double load_variation_pct = 1.0;
  double local_fraction = 0.0;
  double train_fraction = 0.9;
  int k_starts = 20;
  std::uint64_t seed = 0;

  void check() const {
    if (n_samples < 10) throw std::invalid_argument("n_samples must be at least 10");
    if (!(load_variation_pct >= 0.0 && load_variation_pct <= 50.0))
      throw std::invalid_argument("load_variation_pct must lie in [0, 50]");
    if (!(local_fraction >= 0.0 && local_fraction <= 1.0)) throw std::invalid_argument("local_fraction must lie in [0, 1]");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw std::invalid_argument("train_fraction must lie in (0, 1)");
    if (k_starts < 1) throw std::invalid_argument("k_starts must be positive");
  }
};

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Each bus p and q drawn independently, uniform within +-pct % of nominal.
inline std::vector<LoadProfile> generate_loads(const Network& net, int n, double pct, std::uint64_t seed) {
  if (!(pct >= 0.0)) throw std::invalid_argument("load variation must be nonnegative");
  if (n < 0) throw std::invalid_argument("sample count must be nonnegative");
  const LoadProfile nominal = nominal_load(net);
  Rng rng = Rng::stream(seed, 0);
  const double lo = 1.0 - pct / 100.0;
  const double hi = 1.0 + pct / 100.0;
  std::vector<LoadProfile> loads(static_cast<std::size_t>(n));
  for (LoadProfile& load : loads) {
    load.p.resize(net.size());
    load.q.resize(net.size());
    for (std::size_t i = 0; i < net.size(); ++i) {
      load.p[i] = nominal.p[i] * rng.uniform(lo, hi);
      load.q[i] = nominal.q[i] * rng.uniform(lo, hi);
    }
  }
  return loads;
}

struct BuildResult {
  std::vector<Sample> samples;
  int skipped_loads = 0;
};

/// Random starts for load l use the stream seeded from (cfg.seed, l).
inline SolverConfig solver_config_for_load(const SolverConfig& cfg, std::uint64_t load_id) {
  SolverConfig c = cfg;
  c.seed = Rng::stream(cfg.seed, load_id + 1).next();
  return c;
}

/// One sample per distinct solution of each load; rank 0 (cheapest) is labeled global.
inline BuildResult build_samples(const Network& net, const std::vector<LoadProfile>& loads, int k_starts,
                                 const SolverConfig& cfg) {
  BuildResult out;
  for (std::size_t l = 0; l < loads.size(); ++l) {
    const auto clusters = multi_start(net, loads[l], k_starts, solver_config_for_load(cfg, l));
    if (clusters.empty()) {
      ++out.skipped_loads;
      continue;
    }
    for (std::size_t r = 0; r < clusters.size(); ++r) {
      const SolveResult& res = clusters[r].representative;
      Sample s;
      s.load_id = static_cast<int>(l);
      s.load = loads[l];
      s.point = res.point;
      s.gen = res.gen;
      s.duals = res.duals;
      s.cost = res.cost;
      s.cluster_rank = static_cast<int>(r);
      s.label = r == 0 ? Label::global : Label::local;
      out.samples.push_back(std::move(s));
    }
  }
  return out;
}

/// Keeps one sample per load. round(f N) loads, chosen by a seeded shuffle among those that have
/// a local sample, contribute a local one; the rest contribute their global sample.
inline std::vector<Sample> mix(const std::vector<Sample>& samples, double local_fraction, std::uint64_t seed) {
  if (!(local_fraction >= 0.0 && local_fraction <= 1.0)) throw std::invalid_argument("local_fraction must lie in [0, 1]");
  std::map<int, std::vector<const Sample*>> by_load;
  for (const Sample& s : samples) by_load[s.load_id].push_back(&s);
  if (by_load.empty()) return {};

  std::vector<int> ids;
  for (const auto& [id, group] : by_load) ids.push_back(id);
  Rng rng = Rng::stream(seed, 0);
  rng.shuffle(ids);

  const double n = static_cast<double>(ids.size());
  const std::size_t target = static_cast<std::size_t>(std::llround(local_fraction * n));
  std::map<int, const Sample*> chosen;
  std::size_t locals = 0;
  for (int id : ids) {
    const auto& group = by_load[id];
    std::vector<const Sample*> local, global;
    for (const Sample* s : group) (s->label == Label::local ? local : global).push_back(s);
    if (locals < target && !local.empty()) {
      chosen[id] = local[rng.below(local.size())];
      ++locals;
    } else if (!global.empty()) {
      chosen[id] = global.front();
    } else {
      chosen[id] = local[rng.below(local.size())];
      ++locals;
    }
  }
  const double realized = static_cast<double>(locals) / n;
  if (std::abs(realized - local_fraction) > 0.02)
    throw DatasetError(std::string("insufficient ") + (realized < local_fraction ? "local" : "global") +
                       " samples: realized local fraction " + detail::fmt(realized) + " for target " +
                       detail::fmt(local_fraction));
  std::vector<Sample> out;
  out.reserve(chosen.size());
  for (const auto& [id, s] : chosen) out.push_back(*s);
  return out;
}

/// floor(N f) samples go to train; both halves keep the input order.
inline std::pair<std::vector<Sample>, std::vector<Sample>> split(const std::vector<Sample>& data, double train_fraction,
                                                                 std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw std::invalid_argument("train_fraction must lie in (0, 1)");
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = Rng::stream(seed, 1);
  rng.shuffle(idx);
  const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(data.size()) * train_fraction + 1e-9));
  std::vector<char> in_train(data.size(), 0);
  for (std::size_t k = 0; k < n_train; ++k) in_train[idx[k]] = 1;
  std::pair<std::vector<Sample>, std::vector<Sample>> out;
  for (std::size_t i = 0; i < data.size(); ++i) (in_train[i] ? out.first : out.second).push_back(data[i]);
  return out;
}

inline constexpr int kDatasetFormatVersion = 1;

inline std::string dataset_header(std::size_t n) {
  std::ostringstream os;
  auto block = [&](const char* name) {
    for (std::size_t i = 0; i < n; ++i) os << name << '_' << i << ',';
  };
  block("p_load");
  block("q_load");
  block("v");
  block("theta");
  block("pg");
  block("qg");
  block("mu_p");
  block("mu_q");
  os << "cost,label,cluster_rank,load_id";
  return os.str();
}

/// Comma-separated, one row per sample, preceded by a "# lagopf-dataset" comment line and the header.
inline std::string write_dataset(const Dataset& d) {
  std::ostringstream os;
  os << "# lagopf-dataset " << kDatasetFormatVersion << " fingerprint " << d.fingerprint << " buses " << d.buses
     << '\n';
  os << dataset_header(d.buses) << '\n';
  for (const Sample& s : d.samples) {
    for (const auto* v : {&s.load.p, &s.load.q, &s.point.v, &s.point.theta, &s.gen.p, &s.gen.q, &s.duals.mu_p,
                          &s.duals.mu_q}) {
      if (v->size() != d.buses) throw DatasetError("sample for load " + std::to_string(s.load_id) + " has the wrong bus count");
      for (double x : *v) os << detail::fmt(x) << ',';
    }
    os << detail::fmt(s.cost) << ',' << to_string(s.label) << ',' << s.cluster_rank << ',' << s.load_id << '\n';
  }
  return os.str();
}

inline Dataset read_dataset(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 1;
  auto fail = [&lineno](const std::string& what) {
    return DatasetError("dataset line " + std::to_string(lineno) + ": " + what);
  };
  if (!std::getline(in, line)) throw fail("empty file");
  Dataset d;
  {
    std::istringstream ls(line);
    std::string hash, tag, fp_key, buses_key;
    int version = 0;
    if (!(ls >> hash >> tag >> version >> fp_key >> d.fingerprint >> buses_key >> d.buses) || hash != "#" ||
        tag != "lagopf-dataset" || fp_key != "fingerprint" || buses_key != "buses")
      throw fail("missing '# lagopf-dataset' preamble");
    if (version != kDatasetFormatVersion) throw fail("unsupported dataset version " + std::to_string(version));
  }
  ++lineno;
  if (!std::getline(in, line)) throw fail("missing header row");
  if (line != dataset_header(d.buses)) throw fail("header does not match " + std::to_string(d.buses) + " buses");

  const std::size_t n = d.buses;
  const std::size_t columns = 8 * n + 4;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != columns)
      throw fail("expected " + std::to_string(columns) + " columns, found " + std::to_string(cells.size()));
    auto number = [&](std::size_t c) {
      std::size_t used = 0;
      double x = 0.0;
      try {
        x = std::stod(cells[c], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != cells[c].size()) throw fail("bad number '" + cells[c] + "' in column " + std::to_string(c + 1));
      return x;
    };
    auto integer = [&](std::size_t c) {
      const double x = number(c);
      if (x != std::floor(x)) throw fail("expected an integer in column " + std::to_string(c + 1));
      return static_cast<int>(x);
    };
    Sample s;
    std::size_t c = 0;
    for (auto* v : {&s.load.p, &s.load.q, &s.point.v, &s.point.theta, &s.gen.p, &s.gen.q, &s.duals.mu_p, &s.duals.mu_q}) {
      v->resize(n);
      for (std::size_t i = 0; i < n; ++i) (*v)[i] = number(c++);
    }
    s.cost = number(c++);
    const std::string& label = cells[c++];
    if (label == "global") s.label = Label::global;
    else if (label == "local") s.label = Label::local;
    else throw fail("unknown label '" + label + "'");
    s.cluster_rank = integer(c++);
    s.load_id = integer(c++);
    if ((s.label == Label::global) != (s.cluster_rank == 0)) throw fail("label disagrees with cluster_rank");
    d.samples.push_back(std::move(s));
  }
  return d;
}

inline void write_dataset_file(const Dataset& d, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetError("cannot open '" + path + "' for writing");
  out << write_dataset(d);
  if (!out) throw DatasetError("failed writing '" + path + "'");
}

inline Dataset read_dataset_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("dataset file not found: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return read_dataset(ss.str());
}

}  // namespace lagopf
