#include <gtest/gtest.h>

#include <algorithm>
#include <numbers>

#include "fixtures.hpp"
#include "lagopf/solver.hpp"
#include "lagopf/twobus.hpp"

using namespace lagopf;
using fixtures::line;
using fixtures::simple_network;

namespace {

const twobus::TwoBusParams kFixture = twobus::canonical();
const twobus::Solutions kRoots = twobus::find_solutions(kFixture);

// Residual, bound and flow checks of the converged-result invariant.
void expect_feasible(const Network& net, const LoadProfile& load, const SolveResult& r, const SolverConfig& cfg) {
  ASSERT_TRUE(r.converged());
  const Residuals res = balance_residuals(net, r.point, load, r.gen);
  EXPECT_LE(res.max_abs(), cfg.tol_residual);
  for (std::size_t i = 0; i < net.size(); ++i) {
    EXPECT_GE(r.point.v[i], net.buses[i].v_min);
    EXPECT_LE(r.point.v[i], net.buses[i].v_max);
    if (const Generator* g = net.generator_at(static_cast<int>(i))) {
      EXPECT_LE(r.gen.p[i], g->p_max + cfg.tol_residual);
      EXPECT_GE(r.gen.p[i], g->p_min - cfg.tol_residual);
      EXPECT_LE(r.gen.q[i], g->q_max + cfg.tol_residual);
      EXPECT_GE(r.gen.q[i], g->q_min - cfg.tol_residual);
    }
  }
  const BranchFlow f = branch_flows(net, r.point);
  for (std::size_t k = 0; k < net.branches.size(); ++k) {
    if (!net.branches[k].flow_limited()) continue;
    const double s2 = net.branches[k].s_max * net.branches[k].s_max;
    EXPECT_LE(f.p_ij[k] * f.p_ij[k] + f.q_ij[k] * f.q_ij[k] - s2, cfg.tol_residual);
    EXPECT_LE(f.p_ji[k] * f.p_ji[k] + f.q_ji[k] * f.q_ji[k] - s2, cfg.tol_residual);
  }
}

}  // namespace

TEST(SolverConfig, ParseAndCheck) {
  const SolverConfig c = parse_solver_config("# comment\nrho_init = 5\n  tol_grad=1e-5  \nseed = 42\nstart_distribution = gaussian\n");
  EXPECT_EQ(c.rho_init, 5.0);
  EXPECT_EQ(c.tol_grad, 1e-5);
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.start_distribution, StartDistribution::gaussian);
  EXPECT_THROW(parse_solver_config("rho_growth = 1"), std::invalid_argument);
  EXPECT_THROW(parse_solver_config("tol_residual = 0"), std::invalid_argument);
  EXPECT_THROW(parse_solver_config("bogus = 3"), std::invalid_argument);
  EXPECT_THROW(parse_solver_config("rho_init 3"), std::invalid_argument);
}

TEST(SolveAcopf, TwoBusGlobalBasin) {
  const Network net = twobus::make_network(kFixture);
  const LoadProfile load = nominal_load(net);
  const SolverConfig cfg;
  for (double th : {-1.0, 0.0, 0.16, 0.5, 1.0}) {
    const SolveResult r = solve_acopf(net, load, twobus::point_at(th), cfg);
    expect_feasible(net, load, r, cfg);
    EXPECT_NEAR(twobus::angle_of(r.point), kRoots.theta_global, 1e-6);
    EXPECT_NEAR(r.cost, kRoots.cost_global, 1e-6 * kRoots.cost_global);
  }
}

TEST(SolveAcopf, TwoBusStrictLocalBasin) {
  const Network net = twobus::make_network(kFixture);
  const LoadProfile load = nominal_load(net);
  const SolverConfig cfg;
  for (double th : {2.0, 2.58, 3.0}) {
    const SolveResult r = solve_acopf(net, load, twobus::point_at(th), cfg);
    expect_feasible(net, load, r, cfg);
    EXPECT_NEAR(wrap_angle(twobus::angle_of(r.point)), kRoots.theta_local, 1e-6);
    EXPECT_NEAR(r.cost, kRoots.cost_local, 1e-6 * kRoots.cost_local);
  }
}

TEST(SolveAcopf, TwoBusDualsMatchAnalyticMultiplier) {
  const Network net = twobus::make_network(kFixture);
  const SolveResult g = solve_acopf(net, nominal_load(net), twobus::point_at(0.0), {});
  const SolveResult l = solve_acopf(net, nominal_load(net), twobus::point_at(2.5), {});
  // the load-bus active price is the multiplier of the analytic balance equation
  EXPECT_NEAR(g.duals.mu_p[1], kRoots.mu_global, 1e-5);
  EXPECT_NEAR(l.duals.mu_p[1], kRoots.mu_local, 1e-5);
}

TEST(SolveAcopf, ZeroLoadLosslessStaysFlat) {
  const CostPolynomial cost{0.25, 1.0, 0.5};
  const Network net = simple_network(3, {line(0, 1, 0.0, 5.0), line(1, 2, 0.0, 4.0)}, {2}, cost);
  const LoadProfile zero{{0, 0, 0}, {0, 0, 0}};
  const SolveResult r = solve_acopf(net, zero, flat_start(net), {});
  ASSERT_TRUE(r.converged());
  for (double t : r.point.theta) EXPECT_NEAR(t, 0.0, 1e-6);
  for (double p : r.gen.p) EXPECT_NEAR(p, 0.0, 1e-6);
  EXPECT_NEAR(r.cost, 2 * cost(0.0), 1e-6);
}

TEST(SolveAcopf, Case9MatchesKnownOptimum) {
  const Network net = fixtures::case9();
  const LoadProfile load = nominal_load(net);
  const SolverConfig cfg;
  const SolveResult r = solve_acopf(net, load, flat_start(net), cfg);
  expect_feasible(net, load, r, cfg);
  // published optimum of this case: 5296.69 $/h
  EXPECT_NEAR(r.cost, 5296.686, 0.01);
  // bus prices of the case sit between 24 and 25 $/MWh, i.e. 2400..2500 per p.u.
  for (double mu : r.duals.mu_p) {
    EXPECT_GT(mu, 2400.0);
    EXPECT_LT(mu, 2510.0);
  }
}

TEST(SolveAcopf, RestartFromOptimumIsAFixedPoint) {
  for (const Network& net : {fixtures::case9(), twobus::make_network(twobus::canonical())}) {
    const LoadProfile load = nominal_load(net);
    const SolveResult first = solve_acopf(net, load, flat_start(net), {});
    ASSERT_TRUE(first.converged());
    const SolveResult again = solve_acopf(net, load, first.point, {});
    ASSERT_TRUE(again.converged());
    EXPECT_LE(again.outer_iterations, first.outer_iterations);
    EXPECT_LE(again.iterations, first.iterations);
    EXPECT_NEAR(again.cost, first.cost, 1e-8 * std::max(1.0, first.cost));
  }
}

TEST(SolveAcopf, DualConsistencyAtKktPoint) {
  const Network net = fixtures::case9();
  const LoadProfile load = nominal_load(net);
  const SolverConfig cfg;
  const SolveResult r = solve_acopf(net, load, flat_start(net), cfg);
  ASSERT_TRUE(r.converged());
  const LagrangianValue lv = partial_lagrangian(net, r.point, r.gen, load, r.duals);
  EXPECT_NEAR(lv.value, r.cost, 1e-5 * r.cost);
  // stationarity in (v, theta) over coordinates away from the voltage bounds, in cost-scaled units
  const VarLayout layout(net);
  const double scale = cost_scale(net);
  double worst = 0.0;
  for (int i = 0; i < layout.n; ++i) {
    const bool at_bound = r.point.v[i] <= net.buses[i].v_min + 1e-9 || r.point.v[i] >= net.buses[i].v_max - 1e-9;
    if (!at_bound) worst = std::max(worst, std::abs(lv.grad_x[layout.v(i)]) / scale);
    if (layout.theta(i) >= 0) worst = std::max(worst, std::abs(lv.grad_x[layout.theta(i)]) / scale);
  }
  EXPECT_LE(worst, 10 * cfg.tol_grad + 10 * cfg.tol_residual);
}

TEST(SolveAcopf, DivergenceAndMaxIter) {
  const Network net = twobus::make_network(kFixture);
  SolverConfig cfg;
  cfg.max_outer = 1;
  cfg.max_inner = 1;
  const SolveResult r = solve_acopf(net, nominal_load(net), twobus::point_at(1.0), cfg);
  EXPECT_EQ(r.status, SolveStatus::max_iter);
  // load far beyond what the line can carry
  LoadProfile heavy = nominal_load(net);
  heavy.p[1] = 50.0;
  const SolveResult d = solve_acopf(net, heavy, flat_start(net), {});
  EXPECT_FALSE(d.converged());
}

TEST(SolveAcopf, RejectsBadInputs) {
  const Network net = twobus::make_network(kFixture);
  EXPECT_THROW(solve_acopf(net, {{0.0}, {0.0}}, flat_start(net), {}), std::invalid_argument);
  SolverConfig bad;
  bad.rho_growth = 0.5;
  EXPECT_THROW(solve_acopf(net, nominal_load(net), flat_start(net), bad), std::invalid_argument);
}

TEST(PartialLagrangian, DispatchClosedForm) {
  // c(P) = P^2 on [-1, 1], mu = 1 -> P = 0.5
  Network net = simple_network(2, {line(0, 1, 1.0, 5.0)}, {}, {0.0, 0.0, 1.0});
  net.generators[0].p_min = -1.0;
  net.generators[0].p_max = 1.0;
  const LagrangianSolution s =
      solve_partial_lagrangian(net, nominal_load(net), {{1.0, 0.0}, {0.0, 0.0}}, flat_start(net), {});
  EXPECT_DOUBLE_EQ(s.gen.p[0], 0.5);
  // mu = 0 with increasing costs -> lower bounds
  const Network c9 = fixtures::case9();
  const DualVector zero{std::vector<double>(9, 0.0), std::vector<double>(9, 0.0)};
  const GenDispatch gen = lagrangian_dispatch(c9, zero);
  for (const Generator& g : c9.generators) {
    EXPECT_EQ(gen.p[g.bus], g.p_min);
    EXPECT_EQ(gen.q[g.bus], g.q_min);
  }
}

TEST(PartialLagrangian, LocalMultipliersLeadToGlobalBasin) {
  const Network net = twobus::make_network(kFixture);
  const LoadProfile load = nominal_load(net);
  const SolveResult local = solve_acopf(net, load, twobus::point_at(2.5), {});
  ASSERT_NEAR(local.cost, kRoots.cost_local, 1e-6 * kRoots.cost_local);
  const LagrangianSolution s = solve_partial_lagrangian(net, load, local.duals, flat_start(net), {});
  ASSERT_TRUE(s.converged());
  const SolveResult warm = solve_acopf(net, load, s.point, {});
  EXPECT_NEAR(warm.cost, kRoots.cost_global, 1e-6 * kRoots.cost_global);
}

TEST(PowerFlow, ZeroLoadIsFlat) {
  const Network net = simple_network(3, {line(0, 1, 1.0, 5.0), line(1, 2, 0.5, 4.0)}, {2});
  const OperatingPoint x = solve_power_flow(net, {{0, 0, 0}, {0, 0, 0}}, {0, 0, 0}, {1, 1, 1}, flat_start(net));
  for (double t : x.theta) EXPECT_NEAR(t, 0.0, 1e-12);
  for (double v : x.v) EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(PowerFlow, RecoversAngleFromInjection) {
  // forward-compute the injection at a chosen angle, then invert
  const twobus::TwoBusParams p = twobus::canonical();
  const Network net = twobus::make_network(p);
  for (double th : {0.3, -0.2, 0.9}) {
    const OperatingPoint target = twobus::point_at(th);
    const Injections inj = bus_injections(net, target);
    LoadProfile load{{0.0, -inj.p[1]}, {0.0, 0.0}};
    const OperatingPoint x = solve_power_flow(net, load, {0.0, 0.0}, {1.0, 1.0}, flat_start(net));
    EXPECT_NEAR(x.theta[1], target.theta[1], 1e-8);
  }
}

TEST(PowerFlow, Case9MismatchBelowTolerance) {
  const Network net = fixtures::case9();
  const LoadProfile load = nominal_load(net);
  std::vector<double> p(9, 0.0), vm(9, 1.0);
  for (const Generator& g : net.generators) {
    p[g.bus] = g.p_set;
    vm[g.bus] = g.v_set;
  }
  const OperatingPoint x = solve_power_flow(net, load, p, vm, flat_start(net));
  const Injections inj = bus_injections(net, x);
  for (int i = 1; i < 9; ++i) {
    const double gen = net.generator_at(i) ? p[i] : 0.0;
    EXPECT_LT(std::abs(load.p[i] + inj.p[i] - gen), 1e-8);
    if (!net.generator_at(i)) {
      EXPECT_LT(std::abs(load.q[i] + inj.q[i]), 1e-8);
    }
  }
}

TEST(PowerFlow, FailuresThrow) {
  const Network net = twobus::make_network(kFixture);
  EXPECT_THROW(solve_power_flow(net, {{0.0, 50.0}, {0.0, 0.0}}, {0.0, 0.0}, {1.0, 1.0}, flat_start(net)), SolverError);
}

TEST(MultiStart, TwoBusFindsBothRoots) {
  const Network net = twobus::make_network(kFixture);
  SolverConfig cfg;
  cfg.seed = 4;
  const auto clusters = multi_start(net, nominal_load(net), 50, cfg);
  ASSERT_EQ(clusters.size(), 2u);
  EXPECT_NEAR(clusters[0].representative.cost, kRoots.cost_global, 1e-6 * kRoots.cost_global);
  EXPECT_NEAR(clusters[1].representative.cost, kRoots.cost_local, 1e-6 * kRoots.cost_local);
  EXPECT_LE(clusters[0].representative.cost, clusters[1].representative.cost);
}

TEST(MultiStart, StartsNearFlatShareOneSolution) {
  const Network net = fixtures::case9();
  SolverConfig cfg;
  cfg.angle_spread = 0.3;
  const auto clusters = multi_start(net, nominal_load(net), 5, cfg);
  ASSERT_EQ(clusters.size(), 1u);
  EXPECT_NEAR(clusters[0].representative.cost, 5296.686, 0.01);
}

TEST(MultiStart, Deterministic) {
  const Network net = twobus::make_network(kFixture);
  SolverConfig cfg;
  cfg.seed = 9;
  const auto a = multi_start(net, nominal_load(net), 12, cfg);
  const auto b = multi_start(net, nominal_load(net), 12, cfg);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].members, b[k].members);
    EXPECT_EQ(a[k].representative.iterations, b[k].representative.iterations);
    EXPECT_EQ(serialize(a[k].representative, false), serialize(b[k].representative, false));
  }
  EXPECT_THROW(multi_start(net, nominal_load(net), 0, cfg), std::invalid_argument);
}

TEST(StartPoint, FlatThenRandomWithinBounds) {
  const Network net = fixtures::case9();
  SolverConfig cfg;
  EXPECT_EQ(start_point(net, cfg, 0), flat_start(net));
  for (std::uint64_t k = 1; k < 20; ++k) {
    const OperatingPoint x = start_point(net, cfg, k);
    EXPECT_EQ(x.theta[net.slack_bus], 0.0);
    for (std::size_t i = 0; i < net.size(); ++i) {
      EXPECT_GE(x.v[i], net.buses[i].v_min);
      EXPECT_LE(x.v[i], net.buses[i].v_max);
      EXPECT_LE(std::abs(x.theta[i]), cfg.angle_spread);
    }
  }
  cfg.start_distribution = StartDistribution::gaussian;
  EXPECT_EQ(start_point(net, cfg, 3), start_point(net, cfg, 3));
}

TEST(SolveRecord, RoundTrip) {
  const Network net = fixtures::case9();
  const SolveResult r = solve_acopf(net, nominal_load(net), flat_start(net), {});
  const SolveResult back = deserialize_solve_result(serialize(r));
  EXPECT_EQ(back.point, r.point);
  EXPECT_EQ(back.gen, r.gen);
  EXPECT_EQ(back.duals, r.duals);
  EXPECT_EQ(back.cost, r.cost);
  EXPECT_EQ(back.status, r.status);
  EXPECT_EQ(back.iterations, r.iterations);
  EXPECT_EQ(back.wall_time, r.wall_time);
  EXPECT_EQ(deserialize_solve_result(serialize(r, false)).wall_time, 0.0);
  EXPECT_THROW(deserialize_solve_result("status converged\n"), std::invalid_argument);
  EXPECT_THROW(deserialize_solve_result("status weird\n"), std::invalid_argument);
}
