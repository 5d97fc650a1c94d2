#pragma once

// Analytic two-bus example: a generator/slack bus feeding a load bus over one line g - jb, both
// voltages fixed at 1 p.u., reactive power ignored. The load-bus angle is -theta, so theta is
// the angle by which bus 1 leads bus 2.

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lagopf/acopf.hpp"
#include "lagopf/network.hpp"

namespace lagopf::twobus {

struct TwoBusParams {
  double g = 1.0;
  double b = 5.0;
  CostPolynomial cost{0.0, 1.0, 1.0};  // c(x) = x^2 + x
  double load = 0.8;
};

/// The fixture every two-bus test and experiment uses.
inline TwoBusParams canonical() { return {}; }

class TwoBusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double generation(const TwoBusParams& p, double theta) {
  return p.g - p.g * std::cos(theta) + p.b * std::sin(theta);
}

inline double balance_residual(const TwoBusParams& p, double theta) {
  return p.load + p.g - p.g * std::cos(theta) - p.b * std::sin(theta);
}

inline double penalized(const TwoBusParams& p, double theta, double rho) {
  if (!(rho > 0.0)) throw std::invalid_argument("rho must be positive");
  const double r = balance_residual(p, theta);
  return p.cost(generation(p, theta)) + 0.5 * rho * r * r;
}

inline double lagrangian(const TwoBusParams& p, double theta, double mu) {
  return p.cost(generation(p, theta)) + mu * balance_residual(p, theta);
}

/// d lagrangian / d theta = (c' + mu) g sin(theta) + (c' - mu) b cos(theta).
inline double stationarity(const TwoBusParams& p, double theta, double mu) {
  const double cp = p.cost.derivative(generation(p, theta));
  return (cp + mu) * p.g * std::sin(theta) + (cp - mu) * p.b * std::cos(theta);
}

namespace detail {

template <class F>
double bisect(F&& f, double lo, double hi) {
  double flo = f(lo);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Minimizer of the partial Lagrangian on |theta| < pi/2 as a function of the multiplier.
/// Constant c' (linear cost) gives the closed form atan(((mu - c')/(mu + c')) b/g). Otherwise c'
/// depends on theta; the stationarity condition is bracketed on a grid and bisected, keeping the
/// interior minimum with the lowest Lagrangian value.
inline double minimizer_map(const TwoBusParams& p, double mu) {
  if (!(p.g > 0.0)) throw TwoBusError("minimizer_map requires g > 0");
  if (p.cost.c2 == 0.0) {
    const double cp = p.cost.c1;
    if (std::abs(mu + cp) < 1e-14) throw TwoBusError("mu + c' vanishes");
    return std::atan((mu - cp) / (mu + cp) * p.b / p.g);
  }
  constexpr int grid = 4000;
  const double edge = std::numbers::pi / 2;
  double best = std::numeric_limits<double>::quiet_NaN();
  double best_value = std::numeric_limits<double>::infinity();
  auto s = [&](double t) { return stationarity(p, t, mu); };
  double t_prev = -edge;
  double s_prev = s(t_prev);
  for (int k = 1; k <= grid; ++k) {
    const double t = -edge + 2.0 * edge * k / grid;
    const double st = s(t);
    if (s_prev < 0.0 && st >= 0.0) {
      const double root = st == 0.0 ? t : detail::bisect(s, t_prev, t);
      const double value = lagrangian(p, root, mu);
      if (value < best_value) {
        best_value = value;
        best = root;
      }
    }
    t_prev = t;
    s_prev = st;
  }
  if (std::isnan(best) || std::abs(best) >= edge)
    throw TwoBusError("no interior minimizer of the partial Lagrangian for mu = " + std::to_string(mu));
  return best;
}

/// Multiplier of the balance constraint at a feasible root, from stationarity of the Lagrangian.
inline double multiplier_at(const TwoBusParams& p, double theta) {
  const double cp = p.cost.derivative(generation(p, theta));
  const double den = p.b * std::cos(theta) - p.g * std::sin(theta);
  if (std::abs(den) < 1e-14) throw TwoBusError("multiplier undefined at the residual extremum");
  return cp * (p.g * std::sin(theta) + p.b * std::cos(theta)) / den;
}

struct Solutions {
  double theta_global = 0.0;
  double theta_local = 0.0;
  double mu_global = 0.0;
  double mu_local = 0.0;
  double cost_global = 0.0;
  double cost_local = 0.0;
};

/// Both roots of the balance equation on [-pi, pi] via a 10^4-point sign-change scan and bisection.
inline Solutions find_solutions(const TwoBusParams& p) {
  constexpr int grid = 10000;
  const double pi = std::numbers::pi;
  auto r = [&](double t) { return balance_residual(p, t); };
  std::vector<double> roots;
  double t_prev = -pi;
  double r_prev = r(t_prev);
  for (int k = 1; k <= grid; ++k) {
    const double t = -pi + 2.0 * pi * k / grid;
    const double rt = r(t);
    if (rt == 0.0) {
      roots.push_back(t);
    } else if ((r_prev < 0.0) != (rt < 0.0) && r_prev != 0.0) {
      roots.push_back(detail::bisect(r, t_prev, t));
    }
    t_prev = t;
    r_prev = rt;
  }
  if (roots.size() != 2)
    throw TwoBusError("expected two roots of the balance equation, found " + std::to_string(roots.size()));
  const double c0 = p.cost(generation(p, roots[0]));
  const double c1 = p.cost(generation(p, roots[1]));
  if (std::abs(c0 - c1) <= 1e-12 * std::max(1.0, std::abs(c0)))
    throw TwoBusError("ambiguous global solution: both roots have the same cost");
  Solutions s;
  const bool first_global = c0 < c1;
  s.theta_global = first_global ? roots[0] : roots[1];
  s.theta_local = first_global ? roots[1] : roots[0];
  s.cost_global = std::min(c0, c1);
  s.cost_local = std::max(c0, c1);
  s.mu_global = multiplier_at(p, s.theta_global);
  s.mu_local = multiplier_at(p, s.theta_local);
  return s;
}

/// Tab-separated theta, L_rho(theta), L_mu_k(theta)... over [-pi, pi]; resolution + 1 rows.
inline std::string sweep_landscape(const TwoBusParams& p, double rho, const std::vector<double>& mus, int resolution) {
  if (resolution < 100) throw std::invalid_argument("resolution must be at least 100");
  std::ostringstream os;
  os << "theta\tL_rho";
  for (std::size_t k = 0; k < mus.size(); ++k) os << "\tL_mu_" << k;
  os << '\n';
  const double pi = std::numbers::pi;
  for (int k = 0; k <= resolution; ++k) {
    const double t = -pi + 2.0 * pi * k / resolution;
    os << lagopf::detail::fmt(t) << '\t' << lagopf::detail::fmt(penalized(p, t, rho));
    for (double mu : mus) os << '\t' << lagopf::detail::fmt(lagrangian(p, t, mu));
    os << '\n';
  }
  return os.str();
}

/// Full-model network for the fixture. Bus 0 is the slack generator with cost c; bus 1 carries
/// the load and a zero-active-power reactive source (q within +-20). Both
/// voltage magnitudes are fixed at 1 p.u. and the line has no charging or flow limit.
inline Network make_network(const TwoBusParams& p, double p_max = 6.0) {
  Network net;
  net.name = "twobus";
  net.base_mva = 100.0;
  net.buses.resize(2);
  for (int i = 0; i < 2; ++i) {
    net.buses[i].id = i;
    net.buses[i].external_id = i + 1;
    net.buses[i].v_min = 1.0;
    net.buses[i].v_max = 1.0;
  }
  net.buses[0].kind = BusKind::slack;
  net.buses[1].kind = BusKind::generator;
  net.buses[1].p_load = p.load;
  net.slack_bus = 0;

  Branch br;
  br.from_bus = 0;
  br.to_bus = 1;
  br.g = p.g;
  br.b = p.b;
  net.branches.push_back(br);

  Generator slack_gen;
  slack_gen.bus = 0;
  slack_gen.p_min = 0.0;
  slack_gen.p_max = p_max;
  slack_gen.q_min = -20.0;
  slack_gen.q_max = 20.0;
  slack_gen.cost = p.cost;
  slack_gen.p_set = p.load;
  Generator condenser;
  condenser.bus = 1;
  condenser.q_min = -20.0;
  condenser.q_max = 20.0;
  net.generators = {slack_gen, condenser};
  net.index();
  return net;
}

/// theta in the analytic convention from a full-model point (bus 1 angle is -theta).
inline double angle_of(const OperatingPoint& x) { return -(x.theta[1] - x.theta[0]); }

inline OperatingPoint point_at(double theta) { return OperatingPoint{{1.0, 1.0}, {0.0, -theta}}; }

}  // namespace lagopf::twobus
