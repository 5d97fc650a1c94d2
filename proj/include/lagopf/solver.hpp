#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lagopf/acopf.hpp"
#include "lagopf/box_lbfgs.hpp"
#include "lagopf/network.hpp"
#include "lagopf/rng.hpp"

namespace lagopf {

enum class StartDistribution { uniform, gaussian };

struct SolverConfig {
  double rho_init = 10.0;
  double rho_growth = 10.0;
  double rho_max = 1e9;
  double tol_residual = 1e-7;
  // measured on the merit after dividing costs by cost_scale(net)
  double tol_grad = 1e-6;
  int max_outer = 40;
  int max_inner = 2000;
  std::uint64_t seed = 0;
  // random starts draw theta from [-angle_spread, angle_spread]
  double angle_spread = std::numbers::pi;
  StartDistribution start_distribution = StartDistribution::uniform;
  // std-devs used by the gaussian start distribution
  double gaussian_v_sigma = 0.05;
  double gaussian_theta_sigma = 0.5;

  void check() const {
    if (!(rho_init > 0.0) || !(tol_residual > 0.0) || !(tol_grad > 0.0))
      throw std::invalid_argument("solver tolerances and rho_init must be positive");
    if (!(rho_growth > 1.0)) throw std::invalid_argument("rho_growth must exceed 1");
    if (max_outer < 1 || max_inner < 1) throw std::invalid_argument("iteration caps must be positive");
  }
};

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parse "key = value" lines ('#' starts a comment) into a config, starting from `base`.
inline SolverConfig parse_solver_config(const std::string& text, SolverConfig base = {}) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    if (trim(line).empty()) continue;
    if (eq == std::string::npos) throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "rho_init") base.rho_init = std::stod(value);
      else if (key == "rho_growth") base.rho_growth = std::stod(value);
      else if (key == "rho_max") base.rho_max = std::stod(value);
      else if (key == "tol_residual") base.tol_residual = std::stod(value);
      else if (key == "tol_grad") base.tol_grad = std::stod(value);
      else if (key == "max_outer") base.max_outer = std::stoi(value);
      else if (key == "max_inner") base.max_inner = std::stoi(value);
      else if (key == "seed") base.seed = std::stoull(value);
      else if (key == "angle_spread") base.angle_spread = std::stod(value);
      else if (key == "gaussian_v_sigma") base.gaussian_v_sigma = std::stod(value);
      else if (key == "gaussian_theta_sigma") base.gaussian_theta_sigma = std::stod(value);
      else if (key == "start_distribution") {
        if (value == "uniform") base.start_distribution = StartDistribution::uniform;
        else if (value == "gaussian") base.start_distribution = StartDistribution::gaussian;
        else throw std::invalid_argument("unknown start_distribution '" + value + "'");
      } else {
        throw std::invalid_argument("unknown key '" + key + "'");
      }
    } catch (const std::logic_error& e) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  base.check();
  return base;
}

enum class SolveStatus { converged, max_iter, diverged };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iter: return "max_iter";
    case SolveStatus::diverged: return "diverged";
  }
  return "unknown";
}

inline SolveStatus solve_status_from_string(const std::string& s) {
  if (s == "converged") return SolveStatus::converged;
  if (s == "max_iter") return SolveStatus::max_iter;
  if (s == "diverged") return SolveStatus::diverged;
  throw std::invalid_argument("unknown solve status '" + s + "'");
}

struct SolveResult {
  OperatingPoint point;
  GenDispatch gen;
  DualVector duals;
  double cost = 0.0;
  SolveStatus status = SolveStatus::max_iter;
  int iterations = 0;  // inner quasi-Newton iterations summed over outer rounds
  int outer_iterations = 0;
  double wall_time = 0.0;  // seconds

  bool converged() const { return status == SolveStatus::converged; }
};

inline double wrap_angle(double a) {
  const double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a > std::numbers::pi) a -= two_pi;
  if (a <= -std::numbers::pi) a += two_pi;
  return a;
}

/// Divisor applied to costs inside the solver merit.
inline double cost_scale(const Network& net) {
  double s = 1.0;
  for (const Generator& g : net.generators)
    s = std::max({s, std::abs(g.cost.derivative(g.p_min)), std::abs(g.cost.derivative(g.p_max))});
  return s;
}

namespace detail {

inline void fill_bounds(const Network& net, const VarLayout& layout, std::vector<double>& lo, std::vector<double>& hi) {
  lo.assign(layout.size(), -std::numeric_limits<double>::infinity());
  hi.assign(layout.size(), std::numeric_limits<double>::infinity());
  for (int i = 0; i < layout.n; ++i) {
    lo[layout.v(i)] = net.buses[i].v_min;
    hi[layout.v(i)] = net.buses[i].v_max;
  }
}

struct ConstraintState {
  double violation = 0.0;
  double feasibility = 0.0;
};

// Evaluate constraints at x, measure the violation against the multipliers in `mm`, then apply the
// first-order multiplier update.
inline ConstraintState update_multipliers(const Network& net, const OperatingPoint& x, const LoadProfile& load,
                                          double rho, MeritMultipliers& mm) {
  ConstraintState st;
  const Injections inj = bus_injections(net, x);
  auto ineq = [&](double g, double& nu) {
    st.violation = std::max(st.violation, std::abs(std::min(-g, nu / rho)));
    st.feasibility = std::max(st.feasibility, std::max(0.0, g));
    nu = std::max(0.0, nu + rho * g);
  };
  for (std::size_t i = 0; i < net.size(); ++i) {
    const Generator* gen = net.generator_at(static_cast<int>(i));
    const double p = load.p[i] + inj.p[i];
    const double q = load.q[i] + inj.q[i];
    if (gen) {
      ineq(p - gen->p_max, mm.p_hi[i]);
      ineq(gen->p_min - p, mm.p_lo[i]);
      ineq(q - gen->q_max, mm.q_hi[i]);
      ineq(gen->q_min - q, mm.q_lo[i]);
    } else {
      st.violation = std::max({st.violation, std::abs(p), std::abs(q)});
      st.feasibility = std::max({st.feasibility, std::abs(p), std::abs(q)});
      mm.lam_p[i] += rho * p;
      mm.lam_q[i] += rho * q;
    }
  }
  const BranchFlow f = branch_flows(net, x);
  for (std::size_t k = 0; k < net.branches.size(); ++k) {
    const Branch& br = net.branches[k];
    if (!br.flow_limited()) continue;
    const double s2 = br.s_max * br.s_max;
    ineq(f.p_ij[k] * f.p_ij[k] + f.q_ij[k] * f.q_ij[k] - s2, mm.flow_ij[k]);
    ineq(f.p_ji[k] * f.p_ji[k] + f.q_ji[k] * f.q_ji[k] - s2, mm.flow_ji[k]);
  }
  return st;
}

inline void check_inputs(const Network& net, const LoadProfile& load, const OperatingPoint& init) {
  if (load.p.size() != net.size() || load.q.size() != net.size())
    throw std::invalid_argument("load profile does not match the network size");
  check_point(net, init);
}

}  // namespace detail

/// Augmented-Lagrangian solve of the full ACOPF from `init`. Balance equalities at non-generator
/// buses and the generator/flow inequalities are dualized; generator-bus balances are eliminated
/// through the implied dispatch; voltage bounds are enforced by projection.
inline SolveResult solve_acopf(const Network& net, const LoadProfile& load, const OperatingPoint& init,
                               const SolverConfig& cfg) {
  cfg.check();
  detail::check_inputs(net, load, init);
  const auto t0 = std::chrono::steady_clock::now();

  const VarLayout layout(net);
  std::vector<double> lo, hi;
  detail::fill_bounds(net, layout, lo, hi);
  const double scale = cost_scale(net);

  MeritMultipliers mm = MeritMultipliers::zeros(net);
  std::vector<double> z = layout.pack(init);
  double rho = cfg.rho_init;
  double prev_violation = std::numeric_limits<double>::infinity();

  SolveResult res;
  res.status = SolveStatus::max_iter;
  for (int outer = 0; outer < cfg.max_outer; ++outer) {
    const Objective merit = [&](std::span<const double> zz, std::vector<double>& g) {
      return detail::merit(net, layout, zz, load, rho, mm, scale, &g);
    };
    const BoxMinimizerResult inner = minimize_box(merit, z, lo, hi, {cfg.max_inner, cfg.tol_grad, 10});
    res.iterations += inner.iterations;
    res.outer_iterations = outer + 1;
    z = inner.z;

    const OperatingPoint x = layout.unpack(z);
    const detail::ConstraintState st = detail::update_multipliers(net, x, load, rho, mm);
    if (!std::isfinite(st.violation) || st.violation > 1e6 || !std::isfinite(inner.value)) {
      res.status = SolveStatus::diverged;
      break;
    }
    if (st.violation <= cfg.tol_residual && st.feasibility <= cfg.tol_residual && inner.converged) {
      res.status = SolveStatus::converged;
      break;
    }
    if (st.violation > cfg.tol_residual && st.violation > 0.25 * prev_violation) rho = std::min(rho * cfg.rho_growth, cfg.rho_max);
    prev_violation = st.violation;
  }

  res.point = layout.unpack(z);
  for (double& a : res.point.theta) a = wrap_angle(a);
  res.gen = implied_dispatch(net, res.point, load);
  res.cost = generation_cost(net, res.gen);
  res.duals.mu_p.assign(net.size(), 0.0);
  res.duals.mu_q.assign(net.size(), 0.0);
  for (std::size_t i = 0; i < net.size(); ++i) {
    if (const Generator* g = net.generator_at(static_cast<int>(i))) {
      res.duals.mu_p[i] = g->cost.derivative(res.gen.p[i]) + scale * (mm.p_hi[i] - mm.p_lo[i]);
      res.duals.mu_q[i] = scale * (mm.q_hi[i] - mm.q_lo[i]);
    } else {
      res.duals.mu_p[i] = scale * mm.lam_p[i];
      res.duals.mu_q[i] = scale * mm.lam_q[i];
    }
  }
  res.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

/// Closed-form minimizer of c(p) - mu_p p and -mu_q q over the generator box, per bus.
inline GenDispatch lagrangian_dispatch(const Network& net, const DualVector& mu) {
  GenDispatch gen{std::vector<double>(net.size(), 0.0), std::vector<double>(net.size(), 0.0)};
  for (const Generator& g : net.generators) {
    const int i = g.bus;
    if (g.cost.c2 > 0.0)
      gen.p[i] = std::clamp((mu.mu_p[i] - g.cost.c1) / (2.0 * g.cost.c2), g.p_min, g.p_max);
    else
      gen.p[i] = (g.cost.c1 - mu.mu_p[i] < 0.0) ? g.p_max : g.p_min;
    gen.q[i] = mu.mu_q[i] > 0.0 ? g.q_max : g.q_min;
  }
  return gen;
}

struct LagrangianSolution {
  OperatingPoint point;
  GenDispatch gen;
  SolveStatus status = SolveStatus::max_iter;
  int iterations = 0;

  bool converged() const { return status == SolveStatus::converged; }
};

/// Minimize the partial Lagrangian for fixed multipliers: dispatch in closed form, (v, theta) by
/// projected quasi-Newton on the flow terms plus a quadratic penalty on apparent-flow excess.
inline LagrangianSolution solve_partial_lagrangian(const Network& net, const LoadProfile& load, const DualVector& mu,
                                                   const OperatingPoint& init, const SolverConfig& cfg) {
  cfg.check();
  detail::check_inputs(net, load, init);
  if (mu.mu_p.size() != net.size() || mu.mu_q.size() != net.size())
    throw std::invalid_argument("dual vector does not match the network size");

  const VarLayout layout(net);
  std::vector<double> lo, hi;
  detail::fill_bounds(net, layout, lo, hi);
  const double scale = cost_scale(net);
  const double rho = cfg.rho_init;

  const Objective objective = [&](std::span<const double> z, std::vector<double>& grad) {
    const OperatingPoint x = layout.unpack(z);
    grad.assign(layout.size(), 0.0);
    double value = 0.0;
    for (const Branch& br : net.branches) {
      if (!br.in_service) continue;
      const int i = br.from_bus;
      const int j = br.to_bus;
      const auto t = detail::branch_terms(br, x.v[i], x.v[j], x.theta[i], x.theta[j]);
      std::array<double, 4> w = {mu.mu_p[i] / scale, mu.mu_q[i] / scale, mu.mu_p[j] / scale, mu.mu_q[j] / scale};
      for (int f = 0; f < 4; ++f) value += w[f] * t.flow[f];
      if (br.flow_limited()) {
        const double s2 = br.s_max * br.s_max;
        const double e_ij = std::max(0.0, t.flow[0] * t.flow[0] + t.flow[1] * t.flow[1] - s2);
        const double e_ji = std::max(0.0, t.flow[2] * t.flow[2] + t.flow[3] * t.flow[3] - s2);
        value += 0.5 * rho * (e_ij * e_ij + e_ji * e_ji);
        w[0] += 2.0 * rho * e_ij * t.flow[0];
        w[1] += 2.0 * rho * e_ij * t.flow[1];
        w[2] += 2.0 * rho * e_ji * t.flow[2];
        w[3] += 2.0 * rho * e_ji * t.flow[3];
      }
      const std::array<int, 4> idx = {layout.v(i), layout.v(j), layout.theta(i), layout.theta(j)};
      for (int f = 0; f < 4; ++f)
        for (int a = 0; a < 4; ++a)
          if (idx[a] >= 0) grad[idx[a]] += w[f] * t.d[f][a];
    }
    return value;
  };

  const BoxMinimizerResult inner =
      minimize_box(objective, layout.pack(init), lo, hi, {cfg.max_inner, cfg.tol_grad, 10});
  LagrangianSolution out;
  out.iterations = inner.iterations;
  out.point = layout.unpack(inner.z);
  for (double& a : out.point.theta) a = wrap_angle(a);
  out.gen = lagrangian_dispatch(net, mu);
  if (!std::isfinite(inner.value)) out.status = SolveStatus::diverged;
  else out.status = inner.converged ? SolveStatus::converged : SolveStatus::max_iter;
  return out;
}

struct PowerFlowOptions {
  int max_iter = 50;
  double tol = 1e-10;
};

/// Newton-Raphson power flow. Slack: V fixed, theta = 0. Generator buses: V = fixed_vm, active
/// generation = fixed_p. Other buses: zero generation. Throws SolverError on failure.
inline OperatingPoint solve_power_flow(const Network& net, const LoadProfile& load, const std::vector<double>& fixed_p,
                                       const std::vector<double>& fixed_vm, const OperatingPoint& init,
                                       const PowerFlowOptions& opt = {}) {
  detail::check_inputs(net, load, init);
  const int n = static_cast<int>(net.size());
  if (fixed_p.size() != net.size() || fixed_vm.size() != net.size())
    throw std::invalid_argument("fixed_p/fixed_vm must have one entry per bus");

  // unknowns: theta at non-slack buses, V at buses without a generator
  std::vector<int> theta_col(n, -1), v_col(n, -1), p_row(n, -1), q_row(n, -1);
  int dim = 0;
  for (int i = 0; i < n; ++i)
    if (i != net.slack_bus) p_row[i] = theta_col[i] = dim++;
  for (int i = 0; i < n; ++i)
    if (i != net.slack_bus && !net.generator_at(i)) q_row[i] = v_col[i] = dim++;

  OperatingPoint x = init;
  for (int i = 0; i < n; ++i)
    if (net.generator_at(i) || i == net.slack_bus) x.v[i] = fixed_vm[i];
  const double slack_angle = x.theta[net.slack_bus];
  for (double& a : x.theta) a -= slack_angle;

  auto mismatch = [&](const OperatingPoint& pt) {
    const Injections inj = bus_injections(net, pt);
    Eigen::VectorXd f(dim);
    for (int i = 0; i < n; ++i) {
      const double pg = net.generator_at(i) ? fixed_p[i] : 0.0;
      if (p_row[i] >= 0) f[p_row[i]] = inj.p[i] + load.p[i] - pg;
      if (q_row[i] >= 0) f[q_row[i]] = inj.q[i] + load.q[i];
    }
    return f;
  };

  Eigen::VectorXd f = mismatch(x);
  for (int it = 0; it <= opt.max_iter; ++it) {
    if (!f.allFinite()) throw SolverError("power flow diverged");
    const double norm = dim == 0 ? 0.0 : f.lpNorm<Eigen::Infinity>();
    if (norm < opt.tol) return x;
    if (it == opt.max_iter) break;

    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(dim, dim);
    for (const Branch& br : net.branches) {
      if (!br.in_service) continue;
      const int i = br.from_bus;
      const int j = br.to_bus;
      const auto t = detail::branch_terms(br, x.v[i], x.v[j], x.theta[i], x.theta[j]);
      const std::array<int, 4> rows = {p_row[i], q_row[i], p_row[j], q_row[j]};
      const std::array<int, 4> cols = {v_col[i], v_col[j], theta_col[i], theta_col[j]};
      for (int r = 0; r < 4; ++r) {
        if (rows[r] < 0) continue;
        for (int c = 0; c < 4; ++c)
          if (cols[c] >= 0) jac(rows[r], cols[c]) += t.d[r][c];
      }
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    if (lu.rank() < dim) throw SolverError("singular Jacobian in power flow");
    const Eigen::VectorXd dx = lu.solve(-f);

    auto apply = [&](double step) {
      OperatingPoint trial = x;
      for (int i = 0; i < n; ++i) {
        if (theta_col[i] >= 0) trial.theta[i] += step * dx[theta_col[i]];
        if (v_col[i] >= 0) trial.v[i] += step * dx[v_col[i]];
      }
      return trial;
    };
    double step = 1.0;
    OperatingPoint trial = apply(step);
    Eigen::VectorXd f_trial = mismatch(trial);
    while (step > 1.0 / 64 && !(f_trial.allFinite() && f_trial.lpNorm<Eigen::Infinity>() < norm)) {
      step *= 0.5;
      trial = apply(step);
      f_trial = mismatch(trial);
    }
    x = std::move(trial);
    f = std::move(f_trial);
  }
  throw SolverError("power flow did not converge within " + std::to_string(opt.max_iter) + " iterations");
}

/// Start index 0 is the flat start; others are random draws from the (seed, index) stream.
inline OperatingPoint start_point(const Network& net, const SolverConfig& cfg, std::uint64_t index) {
  if (index == 0) return flat_start(net);
  Rng rng = Rng::stream(cfg.seed, index);
  OperatingPoint x;
  x.v.resize(net.size());
  x.theta.resize(net.size());
  for (std::size_t i = 0; i < net.size(); ++i) {
    const Bus& bus = net.buses[i];
    if (cfg.start_distribution == StartDistribution::uniform) {
      x.v[i] = rng.uniform(bus.v_min, bus.v_max);
      x.theta[i] = rng.uniform(-cfg.angle_spread, cfg.angle_spread);
    } else {
      x.v[i] = std::clamp(1.0 + cfg.gaussian_v_sigma * rng.normal(), bus.v_min, bus.v_max);
      x.theta[i] = cfg.gaussian_theta_sigma * rng.normal();
    }
  }
  x.theta[net.slack_bus] = 0.0;
  return x;
}

inline double point_distance(const OperatingPoint& a, const OperatingPoint& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i) {
    d = std::max(d, std::abs(a.v[i] - b.v[i]));
    d = std::max(d, std::abs(wrap_angle(a.theta[i] - b.theta[i])));
  }
  return d;
}

struct SolutionCluster {
  SolveResult representative;  // cheapest member
  int members = 0;
  int first_start = 0;  // start index of the representative
};

struct MultiStartOptions {
  double cost_gap = 1e-4;       // relative
  double point_distance = 1e-3;  // infinity norm, angles wrapped
};

/// Solve from k starts and group converged results into distinct solutions, cheapest first.
/// The first cluster is the global candidate.
inline std::vector<SolutionCluster> multi_start(const Network& net, const LoadProfile& load, int k,
                                                const SolverConfig& cfg, const MultiStartOptions& opt = {}) {
  if (k < 1) throw std::invalid_argument("multi_start needs k >= 1");
  struct Run {
    SolveResult result;
    int start;
  };
  std::vector<Run> runs;
  for (int s = 0; s < k; ++s) {
    SolveResult r = solve_acopf(net, load, start_point(net, cfg, static_cast<std::uint64_t>(s)), cfg);
    if (r.converged()) runs.push_back({std::move(r), s});
  }
  std::stable_sort(runs.begin(), runs.end(), [](const Run& a, const Run& b) {
    if (a.result.cost != b.result.cost) return a.result.cost < b.result.cost;
    return a.start < b.start;
  });
  std::vector<SolutionCluster> clusters;
  for (Run& run : runs) {
    bool joined = false;
    for (SolutionCluster& c : clusters) {
      const double ref = c.representative.cost;
      const double gap = std::abs(run.result.cost - ref) / std::max(1.0, std::abs(ref));
      if (gap < opt.cost_gap && point_distance(run.result.point, c.representative.point) < opt.point_distance) {
        ++c.members;
        joined = true;
        break;
      }
    }
    if (!joined) clusters.push_back({std::move(run.result), 1, run.start});
  }
  return clusters;
}

namespace detail {

inline void write_vector(std::ostream& os, const char* key, const std::vector<double>& v) {
  os << key;
  for (double x : v) os << ' ' << fmt(x);
  os << '\n';
}

}  // namespace detail

/// Line-delimited record: one "key values..." line per field, wall time last and optional.
inline std::string serialize(const SolveResult& r, bool with_timing = true) {
  std::ostringstream os;
  os << "status " << to_string(r.status) << '\n';
  os << "cost " << detail::fmt(r.cost) << '\n';
  os << "iterations " << r.iterations << '\n';
  os << "outer_iterations " << r.outer_iterations << '\n';
  detail::write_vector(os, "v", r.point.v);
  detail::write_vector(os, "theta", r.point.theta);
  detail::write_vector(os, "pg", r.gen.p);
  detail::write_vector(os, "qg", r.gen.q);
  detail::write_vector(os, "mu_p", r.duals.mu_p);
  detail::write_vector(os, "mu_q", r.duals.mu_q);
  if (with_timing) os << "wall_time " << detail::fmt(r.wall_time) << '\n';
  return os.str();
}

inline SolveResult deserialize_solve_result(const std::string& text) {
  SolveResult r;
  std::istringstream in(text);
  std::string line;
  int seen = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    auto vec = [&ls] {
      std::vector<double> v;
      std::string tok;
      while (ls >> tok) v.push_back(std::stod(tok));
      return v;
    };
    std::string tok;
    if (key == "status") {
      ls >> tok;
      r.status = solve_status_from_string(tok);
    } else if (key == "cost") {
      ls >> tok;
      r.cost = std::stod(tok);
    } else if (key == "iterations") {
      ls >> r.iterations;
    } else if (key == "outer_iterations") {
      ls >> r.outer_iterations;
    } else if (key == "v") {
      r.point.v = vec();
    } else if (key == "theta") {
      r.point.theta = vec();
    } else if (key == "pg") {
      r.gen.p = vec();
    } else if (key == "qg") {
      r.gen.q = vec();
    } else if (key == "mu_p") {
      r.duals.mu_p = vec();
    } else if (key == "mu_q") {
      r.duals.mu_q = vec();
    } else if (key == "wall_time") {
      ls >> tok;
      r.wall_time = std::stod(tok);
      --seen;
    } else {
      throw std::invalid_argument("unknown solve record key '" + key + "'");
    }
    ++seen;
  }
  if (seen < 10) throw std::invalid_argument("incomplete solve record");
  const std::size_t n = r.point.v.size();
  if (r.point.theta.size() != n || r.gen.p.size() != n || r.gen.q.size() != n || r.duals.mu_p.size() != n ||
      r.duals.mu_q.size() != n)
    throw std::invalid_argument("solve record vectors have inconsistent lengths");
  return r;
}

}  // namespace lagopf
