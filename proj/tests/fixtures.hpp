#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "lagopf/acopf.hpp"
#include "lagopf/mlp.hpp"
#include "lagopf/network.hpp"
#include "lagopf/rng.hpp"

namespace fixtures {

using namespace lagopf;

inline std::string data_path(const std::string& name) { return std::string(LAGOPF_DATA_DIR) + "/" + name; }

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Network case9() { return parse_matpower_case(slurp(data_path("case9.m"))); }

inline Branch line(int i, int j, double g, double b, double bc = 0.0, double s_max = 0.0) {
  Branch br;
  br.from_bus = i;
  br.to_bus = j;
  br.g = g;
  br.b = b;
  br.b_charge = bc;
  br.s_max = s_max;
  return br;
}

/// Buses 0..n-1, bus 0 slack with a generator; `gens` lists further generator buses.
inline Network simple_network(int n, std::vector<Branch> branches, std::vector<int> gens = {},
                              CostPolynomial cost = {0.0, 1.0, 0.0}) {
  Network net;
  net.name = "fixture";
  net.base_mva = 100.0;
  for (int i = 0; i < n; ++i) {
    Bus bus;
    bus.id = i;
    bus.external_id = i + 1;
    bus.kind = i == 0 ? BusKind::slack : BusKind::load;
    bus.v_min = 0.9;
    bus.v_max = 1.1;
    net.buses.push_back(bus);
  }
  net.slack_bus = 0;
  net.branches = std::move(branches);
  gens.insert(gens.begin(), 0);
  for (int b : gens) {
    Generator g;
    g.bus = b;
    g.p_min = 0.0;
    g.p_max = 5.0;
    g.q_min = -5.0;
    g.q_max = 5.0;
    g.cost = cost;
    net.generators.push_back(g);
    if (b != 0) net.buses[b].kind = BusKind::generator;
  }
  net.index();
  return net;
}

/// Connected 2..10 bus network: random spanning tree plus extra edges, generators at about half
/// the buses, some flow limits tight enough to matter.
inline Network random_network(Rng& rng) {
  const int n = 2 + static_cast<int>(rng.below(9));
  std::vector<Branch> branches;
  for (int i = 1; i < n; ++i) {
    const int j = static_cast<int>(rng.below(static_cast<std::size_t>(i)));
    branches.push_back(line(j, i, rng.uniform(0.2, 3.0), rng.uniform(2.0, 12.0), rng.uniform(0.0, 0.3),
                            rng.uniform() < 0.5 ? rng.uniform(0.2, 2.0) : 0.0));
  }
  const int extra = static_cast<int>(rng.below(static_cast<std::size_t>(n)));
  for (int e = 0; e < extra; ++e) {
    const int i = static_cast<int>(rng.below(static_cast<std::size_t>(n)));
    const int j = static_cast<int>(rng.below(static_cast<std::size_t>(n)));
    if (i == j) continue;
    branches.push_back(line(i, j, rng.uniform(0.2, 3.0), rng.uniform(2.0, 12.0), rng.uniform(0.0, 0.3),
                            rng.uniform() < 0.5 ? rng.uniform(0.2, 2.0) : 0.0));
  }
  std::vector<int> gens;
  for (int i = 1; i < n; ++i)
    if (rng.uniform() < 0.5) gens.push_back(i);
  Network net = simple_network(n, branches, gens);
  for (Generator& g : net.generators) {
    g.cost = {rng.uniform(0.0, 1.0), rng.uniform(0.5, 3.0), rng.uniform(0.0, 2.0)};
    g.p_min = rng.uniform(0.0, 0.3);
    g.p_max = g.p_min + rng.uniform(0.2, 1.5);
    g.q_min = -rng.uniform(0.1, 1.0);
    g.q_max = rng.uniform(0.1, 1.0);
  }
  for (Bus& bus : net.buses) {
    bus.p_load = rng.uniform(0.0, 0.6);
    bus.q_load = rng.uniform(-0.1, 0.3);
  }
  return net;
}

inline OperatingPoint random_point(const Network& net, Rng& rng) {
  OperatingPoint x;
  for (std::size_t i = 0; i < net.size(); ++i) {
    x.v.push_back(rng.uniform(0.88, 1.12));
    x.theta.push_back(rng.uniform(-0.6, 0.6));
  }
  x.theta[net.slack_bus] = 0.0;
  return x;
}

/// Central differences of f at z with step h.
inline std::vector<double> central_difference(const std::function<double(const std::vector<double>&)>& f,
                                              std::vector<double> z, double h = 1e-6) {
  std::vector<double> g(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) {
    const double z0 = z[k];
    z[k] = z0 + h;
    const double fp = f(z);
    z[k] = z0 - h;
    const double fm = f(z);
    z[k] = z0;
    g[k] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// max |a - b| / max(1, max |b|)
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 1.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    num = std::max(num, std::abs(a[k] - b[k]));
    den = std::max(den, std::abs(b[k]));
  }
  return num / den;
}

inline double penalized_gradient_error(Rng& rng) {
  const Network net = random_network(rng);
  const OperatingPoint x = random_point(net, rng);
  const LoadProfile load = nominal_load(net);
  const double rho = rng.uniform(0.5, 50.0);
  const VarLayout layout(net);
  const ObjectiveValue obj = penalized_objective(net, x, load, rho);
  const auto fd = central_difference(
      [&](const std::vector<double>& z) { return penalized_objective(net, layout.unpack(z), load, rho).value; },
      layout.pack(x));
  return relative_error(obj.grad, fd);
}

inline double lagrangian_gradient_error(Rng& rng) {
  const Network net = random_network(rng);
  const OperatingPoint x = random_point(net, rng);
  const LoadProfile load = nominal_load(net);
  const std::size_t n = net.size();
  const VarLayout layout(net);
  GenDispatch gen{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  DualVector mu{std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    mu.mu_p[i] = rng.uniform(-5.0, 10.0);
    mu.mu_q[i] = rng.uniform(-2.0, 2.0);
    if (net.generator_at(static_cast<int>(i))) {
      gen.p[i] = rng.uniform(0.0, 1.5);
      gen.q[i] = rng.uniform(-0.5, 0.5);
    }
  }
  const LagrangianValue val = partial_lagrangian(net, x, gen, load, mu);
  std::vector<double> z = layout.pack(x);
  const std::size_t nx = z.size();
  z.insert(z.end(), gen.p.begin(), gen.p.end());
  z.insert(z.end(), gen.q.begin(), gen.q.end());
  const auto fd = central_difference(
      [&](const std::vector<double>& w) {
        GenDispatch g{std::vector<double>(w.begin() + nx, w.begin() + nx + n), std::vector<double>(w.begin() + nx + n, w.end())};
        return partial_lagrangian(net, layout.unpack(std::vector<double>(w.begin(), w.begin() + nx)), g, load, mu).value;
      },
      z);
  // generation at buses without a generator is not a decision variable
  std::vector<double> analytic = val.grad_x, numeric(fd.begin(), fd.begin() + nx);
  for (std::size_t i = 0; i < n; ++i) {
    if (!net.generator_at(static_cast<int>(i))) continue;
    analytic.push_back(val.grad_p[i]);
    analytic.push_back(val.grad_q[i]);
    numeric.push_back(fd[nx + i]);
    numeric.push_back(fd[nx + n + i]);
  }
  return relative_error(analytic, numeric);
}

inline double mlp_gradient_error(Rng& rng) {
  std::vector<int> dims{1 + static_cast<int>(rng.below(4))};
  const int hidden = 1 + static_cast<int>(rng.below(2));
  for (int h = 0; h < hidden; ++h) dims.push_back(2 + static_cast<int>(rng.below(5)));
  dims.push_back(1 + static_cast<int>(rng.below(3)));
  const Activation act = rng.uniform() < 0.5 ? Activation::relu : Activation::sigmoid;
  const Activation out = rng.uniform() < 0.5 ? Activation::linear : Activation::sigmoid;
  MlpParams p = init_params(dims, act, out, rng.next());
  for (auto& b : p.biases)
    for (double& v : b) v = rng.uniform(-0.5, 0.5);
  const int n = 1 + static_cast<int>(rng.below(6));
  std::vector<std::vector<double>> xs(n), ys(n);
  for (int s = 0; s < n; ++s) {
    for (int k = 0; k < dims.front(); ++k) xs[s].push_back(rng.uniform(-2.0, 2.0));
    for (int k = 0; k < dims.back(); ++k) ys[s].push_back(rng.uniform(-1.0, 1.0));
  }
  const auto [loss, grad] = loss_gradient(p, xs, ys);
  const auto fd = central_difference(
      [&](const std::vector<double>& w) {
        MlpParams q = p;
        unflatten(q, w);
        std::vector<std::vector<double>> pred;
        for (const auto& x : xs) pred.push_back(forward(q, x));
        return mse_loss(pred, ys);
      },
      flatten(p));
  return relative_error(grad, fd);
}

}  // namespace fixtures
