#include <gtest/gtest.h>

#include <numbers>

#include "fixtures.hpp"
#include "lagopf/acopf.hpp"
#include "lagopf/twobus.hpp"

using namespace lagopf;
using fixtures::line;
using fixtures::simple_network;

TEST(BranchFlows, FlatPointCarriesNothing) {
  const Network net = simple_network(2, {line(0, 1, 1.0, 10.0)});
  const BranchFlow f = branch_flows(net, flat_start(net));
  EXPECT_EQ(f.p_ij[0], 0.0);
  EXPECT_EQ(f.q_ij[0], 0.0);
  EXPECT_EQ(f.p_ji[0], 0.0);
  EXPECT_EQ(f.q_ji[0], 0.0);
}

TEST(BranchFlows, ChargingOnly) {
  const Network net = simple_network(2, {line(0, 1, 0.0, 5.0, 0.1)});
  const BranchFlow f = branch_flows(net, flat_start(net));
  EXPECT_NEAR(f.q_ij[0], -0.05, 1e-15);
  EXPECT_NEAR(f.q_ji[0], -0.05, 1e-15);
}

TEST(BranchFlows, PinnedHighPrecisionValues) {
  // 40-digit evaluation of the flow formulas at V = [1.02, 0.98], theta = [0.1, 0], g = 1, b = 5
  const Network net = simple_network(2, {line(0, 1, 1.0, 5.0)});
  OperatingPoint x{{1.02, 0.98}, {0.1, 0.0}};
  const BranchFlow f = branch_flows(net, x);
  EXPECT_NEAR(f.p_ij[0], 0.5447612527889325494, 1e-14);
  EXPECT_NEAR(f.q_ij[0], 0.1291756986602578000, 1e-14);
  EXPECT_NEAR(f.p_ji[0], -0.5331735800127616610, 1e-14);
  EXPECT_NEAR(f.q_ji[0], -0.07123733477940335790, 1e-14);
}

TEST(BranchFlows, LosslessAntisymmetryAndNonnegativeLosses) {
  lagopf::Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const Network lossless = simple_network(2, {line(0, 1, 0.0, rng.uniform(1, 10))});
    const Network lossy = simple_network(2, {line(0, 1, rng.uniform(0.1, 3), rng.uniform(1, 10))});
    const OperatingPoint x{{rng.uniform(0.9, 1.1), rng.uniform(0.9, 1.1)}, {0.0, rng.uniform(-1, 1)}};
    const BranchFlow a = branch_flows(lossless, x);
    EXPECT_EQ(a.p_ij[0], -a.p_ji[0]);
    const BranchFlow b = branch_flows(lossy, x);
    EXPECT_GE(b.p_ij[0] + b.p_ji[0], 0.0);
  }
}

TEST(BusInjections, FlatLosslessIsZero) {
  const Network net = simple_network(3, {line(0, 1, 0.0, 4.0), line(1, 2, 0.0, 6.0), line(0, 2, 0.0, 3.0)});
  const Injections inj = bus_injections(net, flat_start(net));
  for (double v : inj.p) EXPECT_EQ(v, 0.0);
  for (double v : inj.q) EXPECT_EQ(v, 0.0);
}

TEST(BusInjections, TwoBusGenerationExpression) {
  const twobus::TwoBusParams p = twobus::canonical();
  const Network net = twobus::make_network(p);
  for (double th : {-2.0, -0.3, 0.16, 1.0, 2.58}) {
    const Injections inj = bus_injections(net, twobus::point_at(th));
    EXPECT_NEAR(inj.p[0], p.g - p.g * std::cos(th) + p.b * std::sin(th), 1e-14);
  }
}

TEST(BusInjections, MatchesExplicitSumOnLoop) {
  lagopf::Rng rng(11);
  const Network net = simple_network(3, {line(0, 1, 1.0, 4.0, 0.05), line(1, 2, 0.5, 6.0), line(2, 0, 2.0, 3.0, 0.1)});
  const OperatingPoint x = fixtures::random_point(net, rng);
  const BranchFlow f = branch_flows(net, x);
  const Injections inj = bus_injections(net, x);
  std::vector<double> p(3, 0.0), q(3, 0.0);
  for (std::size_t k = 0; k < net.branches.size(); ++k) {
    p[net.branches[k].from_bus] += f.p_ij[k];
    q[net.branches[k].from_bus] += f.q_ij[k];
    p[net.branches[k].to_bus] += f.p_ji[k];
    q[net.branches[k].to_bus] += f.q_ji[k];
  }
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(inj.p[i], p[i], 1e-15);
    EXPECT_NEAR(inj.q[i], q[i], 1e-15);
  }
}

TEST(Residuals, Basics) {
  Network net = simple_network(2, {line(0, 1, 1.0, 5.0)});
  const OperatingPoint flat = flat_start(net);
  const GenDispatch zero{{0.0, 0.0}, {0.0, 0.0}};
  EXPECT_EQ(balance_residuals(net, flat, {{0, 0}, {0, 0}}, zero).max_abs(), 0.0);
  const Residuals r = balance_residuals(net, flat, {{0.0, 0.5}, {0.0, 0.0}}, zero);
  EXPECT_EQ(r.p, (std::vector<double>{0.0, 0.5}));
}

TEST(ImpliedDispatch, BalancesGeneratorBuses) {
  lagopf::Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const Network net = fixtures::random_network(rng);
    const OperatingPoint x = fixtures::random_point(net, rng);
    const LoadProfile load = nominal_load(net);
    const GenDispatch gen = implied_dispatch(net, x, load);
    const Residuals r = balance_residuals(net, x, load, gen);
    for (std::size_t i = 0; i < net.size(); ++i) {
      if (net.generator_at(static_cast<int>(i))) {
        EXPECT_NEAR(r.p[i], 0.0, 1e-14);
        EXPECT_NEAR(r.q[i], 0.0, 1e-14);
      } else {
        EXPECT_EQ(gen.p[i], 0.0);
      }
    }
  }
  const Network net = simple_network(2, {line(0, 1, 1.0, 5.0)});
  const GenDispatch zero = implied_dispatch(net, flat_start(net), {{0, 0}, {0, 0}});
  EXPECT_EQ(zero.p, (std::vector<double>{0.0, 0.0}));
}

TEST(ImpliedDispatch, TwoBusSlackGeneration) {
  const twobus::TwoBusParams p = twobus::canonical();
  const Network net = twobus::make_network(p);
  const double th = 0.4;
  const GenDispatch gen = implied_dispatch(net, twobus::point_at(th), nominal_load(net));
  EXPECT_NEAR(gen.p[0], twobus::generation(p, th), 1e-14);
}

TEST(GenerationCost, Polynomials) {
  Network net = simple_network(2, {line(0, 1, 1.0, 5.0)}, {1}, {0.0, 0.0, 1.0});
  EXPECT_EQ(generation_cost(net, {{2.0, 0.0}, {0.0, 0.0}}), 4.0);
  net = simple_network(2, {line(0, 1, 1.0, 5.0)}, {1}, {0.0, 1.0, 0.0});
  EXPECT_EQ(generation_cost(net, {{1.0, 2.0}, {0.0, 0.0}}), 3.0);
}

TEST(PenalizedObjective, FeasibleInteriorPointCostsOnlyGeneration) {
  const twobus::TwoBusParams p = twobus::canonical();
  const Network net = twobus::make_network(p);
  const auto roots = twobus::find_solutions(p);
  const OperatingPoint x = twobus::point_at(roots.theta_global);
  const ObjectiveValue v = penalized_objective(net, x, nominal_load(net), 5.0);
  EXPECT_NEAR(v.value, generation_cost(net, implied_dispatch(net, x, nominal_load(net))), 1e-12);
}

TEST(PenalizedObjective, TwoBusLandscapeMatchesAnalytic) {
  // the load-bus balance enters through the condenser's [0, 0] active bounds; skip angles where
  // the slack generation would also breach its lower bound
  const twobus::TwoBusParams p = twobus::canonical();
  const Network net = twobus::make_network(p, 1e6);
  int compared = 0;
  for (int k = 0; k <= 200; ++k) {
    const double th = -std::numbers::pi + 2.0 * std::numbers::pi * k / 200;
    if (twobus::generation(p, th) < 0.0) continue;
    const double full = penalized_objective(net, twobus::point_at(th), nominal_load(net), 2.0).value;
    EXPECT_NEAR(full, twobus::penalized(p, th, 2.0), 1e-9) << th;
    ++compared;
  }
  EXPECT_GT(compared, 80);
}

TEST(PenalizedObjective, GradientMatchesFiniteDifferences) {
  lagopf::Rng rng(17);
  for (int t = 0; t < 30; ++t) EXPECT_LT(fixtures::penalized_gradient_error(rng), 1e-6);
}

TEST(PartialLagrangian, Basics) {
  lagopf::Rng rng(23);
  const Network net = fixtures::random_network(rng);
  const OperatingPoint x = fixtures::random_point(net, rng);
  const LoadProfile load = nominal_load(net);
  const GenDispatch gen = implied_dispatch(net, x, load);
  const DualVector zero{std::vector<double>(net.size(), 0.0), std::vector<double>(net.size(), 0.0)};
  EXPECT_NEAR(partial_lagrangian(net, x, gen, load, zero).value, generation_cost(net, gen), 1e-12);

  // balanced network: every bus carries a generator
  std::vector<int> all;
  for (int i = 1; i < 4; ++i) all.push_back(i);
  const Network full = simple_network(4, {line(0, 1, 1, 5), line(1, 2, 1, 5), line(2, 3, 1, 5)}, all, {0.2, 1.0, 0.5});
  const OperatingPoint y = fixtures::random_point(full, rng);
  const LoadProfile l4{{0.1, 0.2, 0.3, 0.1}, {0.0, 0.1, 0.0, 0.05}};
  const GenDispatch g4 = implied_dispatch(full, y, l4);
  DualVector mu{{3, -1, 2, 7}, {0.5, -0.3, 1, 2}};
  EXPECT_NEAR(partial_lagrangian(full, y, g4, l4, mu).value, generation_cost(full, g4), 1e-12);
}

TEST(PartialLagrangian, GradientMatchesFiniteDifferences) {
  lagopf::Rng rng(29);
  for (int t = 0; t < 30; ++t) EXPECT_LT(fixtures::lagrangian_gradient_error(rng), 1e-6);
}

TEST(Invariance, AngleShiftLeavesEverythingUnchanged) {
  lagopf::Rng rng(31);
  for (int t = 0; t < 10; ++t) {
    const Network net = fixtures::random_network(rng);
    OperatingPoint x = fixtures::random_point(net, rng);
    OperatingPoint y = x;
    for (double& a : y.theta) a += 0.7;
    const BranchFlow fx = branch_flows(net, x), fy = branch_flows(net, y);
    for (std::size_t k = 0; k < net.branches.size(); ++k) {
      EXPECT_NEAR(fx.p_ij[k], fy.p_ij[k], 1e-12);
      EXPECT_NEAR(fx.q_ji[k], fy.q_ji[k], 1e-12);
    }
    const LoadProfile load = nominal_load(net);
    EXPECT_NEAR(penalized_objective(net, x, load, 3.0).value, penalized_objective(net, y, load, 3.0).value, 1e-10);
  }
}

TEST(VarLayout, PackUnpackDropsSlackAngle) {
  const Network net = fixtures::case9();
  lagopf::Rng rng(2);
  OperatingPoint x = fixtures::random_point(net, rng);
  const VarLayout layout(net);
  EXPECT_EQ(layout.size(), 17);
  const OperatingPoint y = layout.unpack(layout.pack(x));
  EXPECT_EQ(y, x);
}
