#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lagopf/acopf.hpp"
#include "lagopf/dataset.hpp"
#include "lagopf/mlp.hpp"
#include "lagopf/network.hpp"
#include "lagopf/solver.hpp"

namespace lagopf {

class PipelineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FingerprintMismatch : public PipelineError {
 public:
  using PipelineError::PipelineError;
};

/// NN1: load (p, q) -> multipliers (mu_p, mu_q). NN2: load and multipliers -> (v, theta) packed as
/// in VarLayout: n magnitudes followed by the n-1 non-slack angles.
struct TrainedPipeline {
  Model dual_net;
  Model lagrangian_net;
  std::string net_fingerprint;

  bool operator==(const TrainedPipeline&) const = default;
};

/// Regression baseline: load -> (P at non-slack generators, V at generator buses, theta at
/// non-slack buses), each squashed into its box by a sigmoid output.
struct BaselineModel {
  Model net;
  std::string net_fingerprint;

  bool operator==(const BaselineModel&) const = default;
};

struct NetFit {
  Model model;
  std::vector<double> loss_history;
  double train_mse = 0.0;  // raw units
};

inline std::vector<double> load_features(const LoadProfile& load) {
  std::vector<double> x = load.p;
  x.insert(x.end(), load.q.begin(), load.q.end());
  return x;
}

inline std::vector<double> dual_features(const DualVector& mu) {
  std::vector<double> x = mu.mu_p;
  x.insert(x.end(), mu.mu_q.begin(), mu.mu_q.end());
  return x;
}

inline DualVector dual_from_features(std::span<const double> y) {
  const std::size_t n = y.size() / 2;
  return {{y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n)}, {y.begin() + static_cast<std::ptrdiff_t>(n), y.end()}};
}

inline std::vector<double> lagrangian_features(const LoadProfile& load, const DualVector& mu) {
  std::vector<double> x = load_features(load);
  const std::vector<double> m = dual_features(mu);
  x.insert(x.end(), m.begin(), m.end());
  return x;
}

inline double model_mse(const Model& m, const std::vector<std::vector<double>>& xs,
                        const std::vector<std::vector<double>>& ys) {
  std::vector<std::vector<double>> pred;
  pred.reserve(xs.size());
  for (const auto& x : xs) pred.push_back(m.predict(x));
  return mse_loss(pred, ys);
}

inline void require_samples(const std::vector<Sample>& train) {
  if (train.empty()) throw PipelineError("training split is empty");
}

inline NetFit train_dual_net(const std::vector<Sample>& train, const TrainConfig& cfg) {
  require_samples(train);
  std::vector<std::vector<double>> xs, ys;
  for (const Sample& s : train) {
    xs.push_back(load_features(s.load));
    ys.push_back(dual_features(s.duals));
  }
  TrainResult r = lagopf::train(xs, ys, cfg);
  const double mse = model_mse(r.model, xs, ys);
  return {std::move(r.model), std::move(r.loss_history), mse};
}

struct LagrangianTargets {
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> targets;
  int failures = 0;
  std::string first_failure;
};

/// Partial-Lagrangian minimizers for each sample's (load, mu), solved from the flat start.
/// Samples whose solve fails are left out and counted.
inline LagrangianTargets lagrangian_targets(const Network& net, const std::vector<Sample>& samples,
                                            const SolverConfig& cfg) {
  LagrangianTargets out;
  const VarLayout layout(net);
  for (const Sample& s : samples) {
    const LagrangianSolution sol = solve_partial_lagrangian(net, s.load, s.duals, flat_start(net), cfg);
    if (!sol.converged()) {
      if (out.failures++ == 0)
        out.first_failure = "load " + std::to_string(s.load_id) + ": " + to_string(sol.status) + " after " +
                            std::to_string(sol.iterations) + " iterations";
      continue;
    }
    out.inputs.push_back(lagrangian_features(s.load, s.duals));
    out.targets.push_back(layout.pack(sol.point));
  }
  return out;
}

inline NetFit train_lagrangian_net(const Network& net, const std::vector<Sample>& train, const SolverConfig& solver_cfg,
                                   const TrainConfig& cfg) {
  require_samples(train);
  const LagrangianTargets t = lagrangian_targets(net, train, solver_cfg);
  if (t.failures > 0.05 * static_cast<double>(train.size()))
    throw PipelineError("partial Lagrangian solve failed for " + std::to_string(t.failures) + " of " +
                        std::to_string(train.size()) + " samples (first: " + t.first_failure + ")");
  TrainResult r = lagopf::train(t.inputs, t.targets, cfg);
  const double mse = model_mse(r.model, t.inputs, t.targets);
  return {std::move(r.model), std::move(r.loss_history), mse};
}

inline void check_fingerprint(const Network& net, const std::string& expected) {
  const std::string actual = fingerprint(net);
  if (actual != expected)
    throw FingerprintMismatch("fingerprint mismatch: model trained for " + expected + ", network is " + actual);
}

inline OperatingPoint predict_warm_start(const Network& net, const TrainedPipeline& pipe, const LoadProfile& load) {
  check_fingerprint(net, pipe.net_fingerprint);
  const std::vector<double> mu = pipe.dual_net.predict(load_features(load));
  const std::vector<double> z = pipe.lagrangian_net.predict(lagrangian_features(load, dual_from_features(mu)));
  const VarLayout layout(net);
  if (static_cast<int>(z.size()) != layout.size()) throw PipelineError("lagrangian net output has the wrong size");
  OperatingPoint x = layout.unpack(z);
  for (std::size_t i = 0; i < net.size(); ++i) x.v[i] = std::clamp(x.v[i], net.buses[i].v_min, net.buses[i].v_max);
  x.theta[net.slack_bus] = 0.0;
  return x;
}

/// Algorithm 1: predict multipliers, predict the partial-Lagrangian minimizer, solve from it.
/// wall_time includes the prediction.
inline SolveResult solve_with_warm_start(const Network& net, const LoadProfile& load, const TrainedPipeline& pipe,
                                         const SolverConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const OperatingPoint init = predict_warm_start(net, pipe, load);
  SolveResult r = solve_acopf(net, load, init, cfg);
  r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

struct BaselineLayout {
  std::vector<int> p_buses;      // non-slack generator buses
  std::vector<int> v_buses;      // generator buses, slack included
  std::vector<int> theta_buses;  // non-slack buses

  explicit BaselineLayout(const Network& net) {
    for (std::size_t i = 0; i < net.size(); ++i) {
      const int b = static_cast<int>(i);
      const bool gen = net.generator_at(b) != nullptr;
      if (gen && b != net.slack_bus) p_buses.push_back(b);
      if (gen || b == net.slack_bus) v_buses.push_back(b);
      if (b != net.slack_bus) theta_buses.push_back(b);
    }
  }

  std::size_t size() const { return p_buses.size() + v_buses.size() + theta_buses.size(); }

  std::vector<double> pack(const OperatingPoint& x, const GenDispatch& gen) const {
    std::vector<double> y;
    for (int b : p_buses) y.push_back(gen.p[b]);
    for (int b : v_buses) y.push_back(x.v[b]);
    for (int b : theta_buses) y.push_back(x.theta[b]);
    return y;
  }

  void bounds(const Network& net, std::vector<double>& lo, std::vector<double>& hi) const {
    lo.clear();
    hi.clear();
    for (int b : p_buses) {
      lo.push_back(net.generator_at(b)->p_min);
      hi.push_back(net.generator_at(b)->p_max);
    }
    for (int b : v_buses) {
      lo.push_back(net.buses[b].v_min);
      hi.push_back(net.buses[b].v_max);
    }
    for (std::size_t k = 0; k < theta_buses.size(); ++k) {
      lo.push_back(-std::numbers::pi);
      hi.push_back(std::numbers::pi);
    }
  }
};

inline BaselineModel baseline_train(const Network& net, const std::vector<Sample>& train, const TrainConfig& cfg) {
  require_samples(train);
  const BaselineLayout layout(net);
  std::vector<std::vector<double>> xs, ys;
  for (const Sample& s : train) {
    xs.push_back(load_features(s.load));
    ys.push_back(layout.pack(s.point, s.gen));
  }
  std::vector<double> lo, hi;
  layout.bounds(net, lo, hi);
  // sigmoid range: each box padded by 5% per side; predictions are clipped back
  for (std::size_t k = 0; k < lo.size(); ++k) {
    const double pad = 0.05 * std::max(hi[k] - lo[k], 1e-3);
    lo[k] -= pad;
    hi[k] += pad;
  }
  const Architecture arch{2, Activation::sigmoid, Activation::sigmoid};
  TrainResult r = lagopf::train(xs, ys, cfg, arch, Scaler::box(lo, hi));
  return {std::move(r.model), fingerprint(net)};
}

/// Predicted setpoints are clipped to their boxes and completed by a power flow started from the
/// predicted angles. A failed power flow yields status diverged.
inline SolveResult baseline_predict(const BaselineModel& model, const Network& net, const LoadProfile& load) {
  check_fingerprint(net, model.net_fingerprint);
  const auto t0 = std::chrono::steady_clock::now();
  const BaselineLayout layout(net);
  std::vector<double> y = model.net.predict(load_features(load));
  std::vector<double> lo, hi;
  layout.bounds(net, lo, hi);
  for (std::size_t k = 0; k < y.size(); ++k) y[k] = std::clamp(y[k], lo[k], hi[k]);

  std::vector<double> fixed_p(net.size(), 0.0);
  std::vector<double> fixed_vm(net.size(), 1.0);
  OperatingPoint init = flat_start(net);
  std::size_t k = 0;
  for (int b : layout.p_buses) fixed_p[b] = y[k++];
  for (int b : layout.v_buses) fixed_vm[b] = y[k++];
  for (int b : layout.theta_buses) init.theta[b] = y[k++];

  SolveResult r;
  try {
    r.point = solve_power_flow(net, load, fixed_p, fixed_vm, init);
    for (double& a : r.point.theta) a = wrap_angle(a);
    r.gen = implied_dispatch(net, r.point, load);
    r.cost = generation_cost(net, r.gen);
    r.status = SolveStatus::converged;
  } catch (const SolverError&) {
    r.point = init;
    r.gen = GenDispatch{std::vector<double>(net.size(), 0.0), std::vector<double>(net.size(), 0.0)};
    r.cost = std::numeric_limits<double>::quiet_NaN();
    r.status = SolveStatus::diverged;
  }
  r.duals = DualVector{std::vector<double>(net.size(), 0.0), std::vector<double>(net.size(), 0.0)};
  r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

// ---------------------------------------------------------------------------------------------
// evaluation

enum class Method { algorithm1, baseline, random_start };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::algorithm1: return "algorithm1";
    case Method::baseline: return "baseline";
    case Method::random_start: return "random_start";
  }
  return "unknown";
}

inline const char* start_type(Method m) {
  switch (m) {
    case Method::algorithm1: return "lagrangian_warm";
    case Method::baseline: return "load_regression";
    case Method::random_start: return "random";
  }
  return "unknown";
}

struct EvalRecord {
  int instance = 0;
  int load_id = 0;
  Method method = Method::algorithm1;
  SolveStatus status = SolveStatus::max_iter;
  double cost = 0.0;
  double reference_cost = 0.0;
  double ratio = 0.0;
  int iterations = 0;
  double wall_time = 0.0;
};

struct MethodSummary {
  Method method = Method::algorithm1;
  int instances = 0;
  int converged = 0;
  double mean_ratio = 0.0;  // converged instances only
  double mean_iterations = 0.0;
  double mean_wall_time = 0.0;
};

struct EvalReport {
  std::vector<EvalRecord> records;
  std::vector<MethodSummary> summary;
  // 1 - mean iterations (algorithm1) / mean iterations (random_start)
  double iteration_speedup = 0.0;
  // 1 - mean wall time (algorithm1) / mean wall time (random_start)
  double time_speedup = 0.0;

  const MethodSummary& of(Method m) const {
    for (const MethodSummary& s : summary)
      if (s.method == m) return s;
    throw std::out_of_range("method missing from report");
  }
};

struct EvalOptions {
  int k_reference = 20;
  std::uint64_t seed = 0;
};

/// For each test load: multi-start reference, Algorithm 1, baseline and one random start. The
/// reference cost is the cheapest of the multi-start clusters and the converged Algorithm 1 and
/// random-start results, so every ratio of a feasible solve is at least 1.
inline EvalReport evaluate(const Network& net, const std::vector<Sample>& test, const TrainedPipeline& pipe,
                           const BaselineModel& baseline, const SolverConfig& cfg, const EvalOptions& opt = {}) {
  EvalReport rep;
  for (std::size_t t = 0; t < test.size(); ++t) {
    const LoadProfile& load = test[t].load;
    const SolverConfig inst_cfg = solver_config_for_load(cfg, static_cast<std::uint64_t>(test[t].load_id));
    SolverConfig ref_cfg = inst_cfg;
    ref_cfg.seed = Rng::stream(opt.seed, 2 * t).next();
    const auto clusters = multi_start(net, load, opt.k_reference, ref_cfg);
    double reference = clusters.empty() ? std::numeric_limits<double>::infinity() : clusters.front().representative.cost;

    SolverConfig rnd_cfg = inst_cfg;
    rnd_cfg.seed = Rng::stream(opt.seed, 2 * t + 1).next();
    std::vector<std::pair<Method, SolveResult>> runs;
    runs.emplace_back(Method::algorithm1, solve_with_warm_start(net, load, pipe, cfg));
    runs.emplace_back(Method::baseline, baseline_predict(baseline, net, load));
    {
      const auto t0 = std::chrono::steady_clock::now();
      SolveResult r = solve_acopf(net, load, start_point(net, rnd_cfg, 1), cfg);
      r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      runs.emplace_back(Method::random_start, std::move(r));
    }
    for (const auto& [m, r] : runs)
      if (m != Method::baseline && r.converged()) reference = std::min(reference, r.cost);

    for (const auto& [m, r] : runs) {
      EvalRecord rec;
      rec.instance = static_cast<int>(t);
      rec.load_id = test[t].load_id;
      rec.method = m;
      rec.status = r.status;
      rec.cost = r.cost;
      rec.reference_cost = reference;
      rec.ratio = r.cost / reference;
      rec.iterations = r.iterations;
      rec.wall_time = r.wall_time;
      rep.records.push_back(rec);
    }
  }
  for (Method m : {Method::algorithm1, Method::baseline, Method::random_start}) {
    MethodSummary s;
    s.method = m;
    for (const EvalRecord& r : rep.records) {
      if (r.method != m) continue;
      ++s.instances;
      s.mean_iterations += r.iterations;
      s.mean_wall_time += r.wall_time;
      if (r.status == SolveStatus::converged && std::isfinite(r.ratio)) {
        ++s.converged;
        s.mean_ratio += r.ratio;
      }
    }
    if (s.instances > 0) {
      s.mean_iterations /= s.instances;
      s.mean_wall_time /= s.instances;
    }
    s.mean_ratio = s.converged > 0 ? s.mean_ratio / s.converged : std::numeric_limits<double>::quiet_NaN();
    rep.summary.push_back(s);
  }
  const MethodSummary& a = rep.of(Method::algorithm1);
  const MethodSummary& r = rep.of(Method::random_start);
  if (r.mean_iterations > 0.0) rep.iteration_speedup = 1.0 - a.mean_iterations / r.mean_iterations;
  if (r.mean_wall_time > 0.0) rep.time_speedup = 1.0 - a.mean_wall_time / r.mean_wall_time;
  return rep;
}

/// Per-instance table; wall times are left to timing_table so this output is reproducible.
inline std::string report_table(const EvalReport& rep) {
  std::ostringstream os;
  os << "instance\tload_id\tmethod\tstart\tstatus\tcost\treference_cost\tratio\titerations\n";
  for (const EvalRecord& r : rep.records)
    os << r.instance << '\t' << r.load_id << '\t' << to_string(r.method) << '\t' << start_type(r.method) << '\t'
       << to_string(r.status) << '\t' << detail::fmt(r.cost) << '\t' << detail::fmt(r.reference_cost) << '\t'
       << detail::fmt(r.ratio) << '\t' << r.iterations << '\n';
  return os.str();
}

inline std::string summary_table(const EvalReport& rep) {
  std::ostringstream os;
  os << "method\tinstances\tconverged\tmean_ratio\tmean_iterations\n";
  for (const MethodSummary& s : rep.summary)
    os << to_string(s.method) << '\t' << s.instances << '\t' << s.converged << '\t' << detail::fmt(s.mean_ratio) << '\t'
       << detail::fmt(s.mean_iterations) << '\n';
  os << "iteration_speedup\t" << detail::fmt(rep.iteration_speedup) << '\n';
  return os.str();
}

inline std::string timing_table(const EvalReport& rep) {
  std::ostringstream os;
  os << "instance\tmethod\twall_time\n";
  for (const EvalRecord& r : rep.records)
    os << r.instance << '\t' << to_string(r.method) << '\t' << detail::fmt(r.wall_time) << '\n';
  for (const MethodSummary& s : rep.summary)
    os << "mean\t" << to_string(s.method) << '\t' << detail::fmt(s.mean_wall_time) << '\n';
  os << "time_speedup\t" << detail::fmt(rep.time_speedup) << '\n';
  return os.str();
}

/// x = instance index, y = cost ratio per method.
inline std::string plot_table(const EvalReport& rep) {
  std::ostringstream os;
  os << "instance\talgorithm1\tbaseline\trandom_start\n";
  const std::size_t n = rep.records.size() / 3;
  for (std::size_t t = 0; t < n; ++t) {
    os << t;
    for (std::size_t m = 0; m < 3; ++m) os << '\t' << detail::fmt(rep.records[3 * t + m].ratio);
    os << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------------------------
// persistence

inline constexpr int kBundleFormatVersion = 1;

inline std::string save_bundle(const TrainedPipeline& p) {
  std::ostringstream os;
  os << "lagopf-bundle " << kBundleFormatVersion << '\n';
  os << "fingerprint " << p.net_fingerprint << '\n';
  os << "model dual\n" << save(p.dual_net);
  os << "model lagrangian\n" << save(p.lagrangian_net);
  return os.str();
}

namespace detail {

inline std::vector<std::string> expect_line(std::istream& in, const std::string& key, std::size_t values) {
  std::string line;
  if (!std::getline(in, line)) throw ModelFormatError("corrupt bundle: missing '" + key + "' line");
  std::istringstream ls(line);
  std::string k;
  ls >> k;
  std::vector<std::string> toks;
  std::string tok;
  while (ls >> tok) toks.push_back(tok);
  if (k != key || toks.size() != values) throw ModelFormatError("corrupt bundle: expected '" + key + "' line");
  return toks;
}

}  // namespace detail

inline TrainedPipeline load_bundle(const std::string& text) {
  std::istringstream in(text);
  const auto version = detail::expect_line(in, "lagopf-bundle", 1);
  if (version[0] != std::to_string(kBundleFormatVersion))
    throw ModelVersionError("unsupported bundle version " + version[0]);
  TrainedPipeline p;
  p.net_fingerprint = detail::expect_line(in, "fingerprint", 1)[0];
  if (detail::expect_line(in, "model", 1)[0] != "dual") throw ModelFormatError("corrupt bundle: expected dual model");
  p.dual_net = load(in);
  if (detail::expect_line(in, "model", 1)[0] != "lagrangian")
    throw ModelFormatError("corrupt bundle: expected lagrangian model");
  p.lagrangian_net = load(in);
  if (p.dual_net.params.input_dim() * 2 != p.lagrangian_net.params.input_dim() ||
      p.dual_net.params.output_dim() != p.dual_net.params.input_dim())
    throw ModelFormatError("corrupt bundle: network dimensions are inconsistent");
  return p;
}

inline std::string save_baseline(const BaselineModel& b) {
  std::ostringstream os;
  os << "lagopf-baseline " << kBundleFormatVersion << '\n';
  os << "fingerprint " << b.net_fingerprint << '\n';
  os << save(b.net);
  return os.str();
}

inline BaselineModel load_baseline(const std::string& text) {
  std::istringstream in(text);
  const auto version = detail::expect_line(in, "lagopf-baseline", 1);
  if (version[0] != std::to_string(kBundleFormatVersion))
    throw ModelVersionError("unsupported baseline version " + version[0]);
  BaselineModel b;
  b.net_fingerprint = detail::expect_line(in, "fingerprint", 1)[0];
  b.net = load(in);
  return b;
}

}  // namespace lagopf
