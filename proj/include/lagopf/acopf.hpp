#pragma once

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "lagopf/network.hpp"

namespace lagopf {

/// Voltage magnitudes and angles of every bus. The slack angle is 0.
struct OperatingPoint {
  std::vector<double> v;
  std::vector<double> theta;

  bool operator==(const OperatingPoint&) const = default;
};

/// Active/reactive generation per bus, zero where no generator sits.
struct GenDispatch {
  std::vector<double> p;
  std::vector<double> q;

  bool operator==(const GenDispatch&) const = default;
};

/// Multipliers of the active/reactive balance equalities, one pair per bus.
struct DualVector {
  std::vector<double> mu_p;
  std::vector<double> mu_q;

  bool operator==(const DualVector&) const = default;
};

/// Directed flows for every branch, i->j and j->i. Out-of-service branches carry zeros.
struct BranchFlow {
  std::vector<double> p_ij, q_ij, p_ji, q_ji;
};

inline OperatingPoint flat_start(const Network& net) {
  OperatingPoint x;
  x.v.resize(net.size());
  x.theta.assign(net.size(), 0.0);
  for (std::size_t i = 0; i < net.size(); ++i) x.v[i] = std::clamp(1.0, net.buses[i].v_min, net.buses[i].v_max);
  return x;
}

/// Packing of (v, theta) into one decision vector: all n magnitudes, then the n-1 non-slack angles.
struct VarLayout {
  int n = 0;
  int slack = 0;

  explicit VarLayout(const Network& net) : n(static_cast<int>(net.size())), slack(net.slack_bus) {}

  int size() const { return 2 * n - 1; }
  int v(int bus) const { return bus; }
  // -1 for the slack bus
  int theta(int bus) const { return bus == slack ? -1 : n + (bus < slack ? bus : bus - 1); }

  std::vector<double> pack(const OperatingPoint& x) const {
    std::vector<double> z(size());
    for (int i = 0; i < n; ++i) {
      z[v(i)] = x.v[i];
      if (i != slack) z[theta(i)] = x.theta[i] - x.theta[slack];
    }
    return z;
  }

  OperatingPoint unpack(std::span<const double> z) const {
    OperatingPoint x;
    x.v.assign(z.begin(), z.begin() + n);
    x.theta.assign(n, 0.0);
    for (int i = 0; i < n; ++i)
      if (i != slack) x.theta[i] = z[theta(i)];
    return x;
  }
};

namespace detail {

// Flows of one branch in both directions and their partials with respect to (V_i, V_j, theta_i, theta_j).
struct BranchTerms {
  enum { P_IJ, Q_IJ, P_JI, Q_JI };
  std::array<double, 4> flow{};
  std::array<std::array<double, 4>, 4> d{};
};

inline BranchTerms branch_terms(const Branch& br, double vi, double vj, double ti, double tj) {
  BranchTerms t;
  const double g = br.g;
  const double b = br.b;
  const double bh = br.b_hat();
  const double c = std::cos(ti - tj);
  const double s = std::sin(ti - tj);
  const double vv = vi * vj;

  t.flow[BranchTerms::P_IJ] = vi * vi * g - vv * (g * c - b * s);
  t.flow[BranchTerms::Q_IJ] = vi * vi * bh - vv * (b * c + g * s);
  t.flow[BranchTerms::P_JI] = vj * vj * g - vv * (g * c + b * s);
  t.flow[BranchTerms::Q_JI] = vj * vj * bh - vv * (b * c - g * s);

  t.d[BranchTerms::P_IJ] = {2.0 * vi * g - vj * (g * c - b * s), -vi * (g * c - b * s), vv * (g * s + b * c),
                            -vv * (g * s + b * c)};
  t.d[BranchTerms::Q_IJ] = {2.0 * vi * bh - vj * (b * c + g * s), -vi * (b * c + g * s), vv * (b * s - g * c),
                            -vv * (b * s - g * c)};
  t.d[BranchTerms::P_JI] = {-vj * (g * c + b * s), 2.0 * vj * g - vi * (g * c + b * s), vv * (g * s - b * c),
                            -vv * (g * s - b * c)};
  t.d[BranchTerms::Q_JI] = {-vj * (b * c - g * s), 2.0 * vj * bh - vi * (b * c - g * s), vv * (b * s + g * c),
                            -vv * (b * s + g * c)};
  return t;
}

inline void check_point(const Network& net, const OperatingPoint& x) {
  if (x.v.size() != net.size() || x.theta.size() != net.size())
    throw std::invalid_argument("operating point does not match the network size");
}

}  // namespace detail

inline BranchFlow branch_flows(const Network& net, const OperatingPoint& x) {
  detail::check_point(net, x);
  const std::size_t m = net.branches.size();
  BranchFlow f{std::vector<double>(m, 0.0), std::vector<double>(m, 0.0), std::vector<double>(m, 0.0),
               std::vector<double>(m, 0.0)};
  for (std::size_t k = 0; k < m; ++k) {
    const Branch& br = net.branches[k];
    if (!br.in_service) continue;
    const int i = br.from_bus;
    const int j = br.to_bus;
    const auto t = detail::branch_terms(br, x.v[i], x.v[j], x.theta[i], x.theta[j]);
    f.p_ij[k] = t.flow[0];
    f.q_ij[k] = t.flow[1];
    f.p_ji[k] = t.flow[2];
    f.q_ji[k] = t.flow[3];
  }
  return f;
}

struct Injections {
  std::vector<double> p;
  std::vector<double> q;
};

/// Net flow out of each bus: sum of directed branch flows leaving it.
inline Injections bus_injections(const Network& net, const OperatingPoint& x) {
  detail::check_point(net, x);
  Injections inj{std::vector<double>(net.size(), 0.0), std::vector<double>(net.size(), 0.0)};
  for (const Branch& br : net.branches) {
    if (!br.in_service) continue;
    const int i = br.from_bus;
    const int j = br.to_bus;
    const auto t = detail::branch_terms(br, x.v[i], x.v[j], x.theta[i], x.theta[j]);
    inj.p[i] += t.flow[0];
    inj.q[i] += t.flow[1];
    inj.p[j] += t.flow[2];
    inj.q[j] += t.flow[3];
  }
  return inj;
}

struct Residuals {
  std::vector<double> p;
  std::vector<double> q;

  double max_abs() const {
    double m = 0.0;
    for (double r : p) m = std::max(m, std::abs(r));
    for (double r : q) m = std::max(m, std::abs(r));
    return m;
  }
};

/// r = demand + outflow - generation; zero means balanced.
inline Residuals balance_residuals(const Network& net, const OperatingPoint& x, const LoadProfile& load,
                                   const GenDispatch& gen) {
  const Injections inj = bus_injections(net, x);
  Residuals r{std::vector<double>(net.size()), std::vector<double>(net.size())};
  for (std::size_t i = 0; i < net.size(); ++i) {
    r.p[i] = load.p[i] + inj.p[i] - gen.p[i];
    r.q[i] = load.q[i] + inj.q[i] - gen.q[i];
  }
  return r;
}

/// Dispatch that balances every generator bus exactly; other buses stay at zero.
inline GenDispatch implied_dispatch(const Network& net, const OperatingPoint& x, const LoadProfile& load) {
  const Injections inj = bus_injections(net, x);
  GenDispatch gen{std::vector<double>(net.size(), 0.0), std::vector<double>(net.size(), 0.0)};
  for (const Generator& g : net.generators) {
    gen.p[g.bus] = load.p[g.bus] + inj.p[g.bus];
    gen.q[g.bus] = load.q[g.bus] + inj.q[g.bus];
  }
  return gen;
}

inline double generation_cost(const Network& net, const GenDispatch& gen) {
  double total = 0.0;
  for (const Generator& g : net.generators) total += g.cost(gen.p[g.bus]);
  return total;
}

/// Multiplier estimates carried by the augmented-Lagrangian merit. Balance multipliers live at
/// non-generator buses; bound multipliers at generator buses; flow multipliers per branch direction.
struct MeritMultipliers {
  std::vector<double> lam_p, lam_q;
  std::vector<double> p_hi, p_lo, q_hi, q_lo;
  std::vector<double> flow_ij, flow_ji;

  static MeritMultipliers zeros(const Network& net) {
    const std::size_t n = net.size();
    const std::size_t m = net.branches.size();
    MeritMultipliers mm;
    mm.lam_p.assign(n, 0.0);
    mm.lam_q.assign(n, 0.0);
    mm.p_hi.assign(n, 0.0);
    mm.p_lo.assign(n, 0.0);
    mm.q_hi.assign(n, 0.0);
    mm.q_lo.assign(n, 0.0);
    mm.flow_ij.assign(m, 0.0);
    mm.flow_ji.assign(m, 0.0);
    return mm;
  }
};

namespace detail {

// (1/2rho)(max(0, nu + rho*g)^2 - nu^2) and its derivative in g.
inline double inequality_term(double g, double nu, double rho, double& slope) {
  const double shifted = std::max(0.0, nu + rho * g);
  slope = shifted;
  return (shifted * shifted - nu * nu) / (2.0 * rho);
}

// Merit over the packed (v, theta) vector:
//   cost(implied dispatch)/cost_scale + balance terms at non-generator buses
//   + bound terms on implied dispatch + apparent-flow terms.
// With zero multipliers and cost_scale 1 this is the plain quadratic-penalty objective.
inline double merit(const Network& net, const VarLayout& layout, std::span<const double> z, const LoadProfile& load,
                    double rho, const MeritMultipliers& mm, double cost_scale, std::vector<double>* grad) {
  const int n = layout.n;
  const OperatingPoint x = layout.unpack(z);

  std::vector<BranchTerms> terms(net.branches.size());
  std::vector<double> inj_p(n, 0.0), inj_q(n, 0.0);
  for (std::size_t k = 0; k < net.branches.size(); ++k) {
    const Branch& br = net.branches[k];
    if (!br.in_service) continue;
    terms[k] = branch_terms(br, x.v[br.from_bus], x.v[br.to_bus], x.theta[br.from_bus], x.theta[br.to_bus]);
    inj_p[br.from_bus] += terms[k].flow[0];
    inj_q[br.from_bus] += terms[k].flow[1];
    inj_p[br.to_bus] += terms[k].flow[2];
    inj_q[br.to_bus] += terms[k].flow[3];
  }

  double value = 0.0;
  std::vector<double> w_p(n, 0.0), w_q(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const Generator* gen = net.generator_at(i);
    const double p = load.p[i] + inj_p[i];
    const double q = load.q[i] + inj_q[i];
    if (gen) {
      value += gen->cost(p) / cost_scale;
      w_p[i] = gen->cost.derivative(p) / cost_scale;
      double slope = 0.0;
      value += inequality_term(p - gen->p_max, mm.p_hi[i], rho, slope);
      w_p[i] += slope;
      value += inequality_term(gen->p_min - p, mm.p_lo[i], rho, slope);
      w_p[i] -= slope;
      value += inequality_term(q - gen->q_max, mm.q_hi[i], rho, slope);
      w_q[i] += slope;
      value += inequality_term(gen->q_min - q, mm.q_lo[i], rho, slope);
      w_q[i] -= slope;
    } else {
      value += mm.lam_p[i] * p + 0.5 * rho * p * p;
      value += mm.lam_q[i] * q + 0.5 * rho * q * q;
      w_p[i] = mm.lam_p[i] + rho * p;
      w_q[i] = mm.lam_q[i] + rho * q;
    }
  }

  if (grad) grad->assign(layout.size(), 0.0);
  for (std::size_t k = 0; k < net.branches.size(); ++k) {
    const Branch& br = net.branches[k];
    if (!br.in_service) continue;
    const int i = br.from_bus;
    const int j = br.to_bus;
    const BranchTerms& t = terms[k];
    std::array<double, 4> w = {w_p[i], w_q[i], w_p[j], w_q[j]};
    if (br.flow_limited()) {
      const double s2 = br.s_max * br.s_max;
      double slope = 0.0;
      value += inequality_term(t.flow[0] * t.flow[0] + t.flow[1] * t.flow[1] - s2, mm.flow_ij[k], rho, slope);
      w[0] += 2.0 * slope * t.flow[0];
      w[1] += 2.0 * slope * t.flow[1];
      value += inequality_term(t.flow[2] * t.flow[2] + t.flow[3] * t.flow[3] - s2, mm.flow_ji[k], rho, slope);
      w[2] += 2.0 * slope * t.flow[2];
      w[3] += 2.0 * slope * t.flow[3];
    }
    if (!grad) continue;
    const std::array<int, 4> idx = {layout.v(i), layout.v(j), layout.theta(i), layout.theta(j)};
    for (int f = 0; f < 4; ++f) {
      if (w[f] == 0.0) continue;
      for (int a = 0; a < 4; ++a)
        if (idx[a] >= 0) (*grad)[idx[a]] += w[f] * t.d[f][a];
    }
  }
  return value;
}

}  // namespace detail

struct ObjectiveValue {
  double value = 0.0;
  // packed over (v, non-slack theta), see VarLayout
  std::vector<double> grad;
};

/// Cost of the implied dispatch plus rho/2 times the squared balance residuals at non-generator
/// buses, squared generator-bound violations, and squared apparent-flow excess (P^2+Q^2-S^2).
inline ObjectiveValue penalized_objective(const Network& net, const OperatingPoint& x, const LoadProfile& load,
                                          double rho) {
  if (!(rho > 0.0)) throw std::invalid_argument("rho must be positive");
  detail::check_point(net, x);
  const VarLayout layout(net);
  ObjectiveValue out;
  const auto z = layout.pack(x);
  out.value = detail::merit(net, layout, z, load, rho, MeritMultipliers::zeros(net), 1.0, &out.grad);
  return out;
}

struct LagrangianValue {
  double value = 0.0;
  std::vector<double> grad_x;  // packed (v, non-slack theta)
  std::vector<double> grad_p;  // per bus
  std::vector<double> grad_q;  // per bus
};

/// sum c(p) + sum mu_p (P_D + P_f - p) + sum mu_q (Q_D + Q_f - q). Box and flow limits are not included.
inline LagrangianValue partial_lagrangian(const Network& net, const OperatingPoint& x, const GenDispatch& gen,
                                          const LoadProfile& load, const DualVector& mu) {
  detail::check_point(net, x);
  const std::size_t n = net.size();
  const VarLayout layout(net);
  LagrangianValue out;
  out.grad_x.assign(layout.size(), 0.0);
  out.grad_p.assign(n, 0.0);
  out.grad_q.assign(n, 0.0);

  for (std::size_t i = 0; i < n; ++i) {
    const Generator* g = net.generator_at(static_cast<int>(i));
    out.value += mu.mu_p[i] * (load.p[i] - gen.p[i]) + mu.mu_q[i] * (load.q[i] - gen.q[i]);
    out.grad_p[i] = -mu.mu_p[i];
    out.grad_q[i] = -mu.mu_q[i];
    if (g) {
      out.value += g->cost(gen.p[i]);
      out.grad_p[i] += g->cost.derivative(gen.p[i]);
    }
  }
  for (const Branch& br : net.branches) {
    if (!br.in_service) continue;
    const int i = br.from_bus;
    const int j = br.to_bus;
    const auto t = detail::branch_terms(br, x.v[i], x.v[j], x.theta[i], x.theta[j]);
    const std::array<double, 4> w = {mu.mu_p[i], mu.mu_q[i], mu.mu_p[j], mu.mu_q[j]};
    const std::array<int, 4> idx = {layout.v(i), layout.v(j), layout.theta(i), layout.theta(j)};
    for (int f = 0; f < 4; ++f) {
      out.value += w[f] * t.flow[f];
      for (int a = 0; a < 4; ++a)
        if (idx[a] >= 0) out.grad_x[idx[a]] += w[f] * t.d[f][a];
    }
  }
  return out;
}

}  // namespace lagopf
