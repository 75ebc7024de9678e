#include <gtest/gtest.h>

#include <random>

#include "ddopf/errors.hpp"
#include "ddopf/netmodel.hpp"
#include "support/fixtures.hpp"

namespace ddopf {
namespace {

using testing::load_fixture;
using testing::random_grid;

TEST(NetModel, TrianglePtdfMatchesHandComputation) {
  const ReducedModel m = reduce(load_fixture("case3_triangle.json"));
  // Reduced coordinates are buses 2 and 3. One unit injected at bus 2 and
  // withdrawn at the slack splits 2/3 over the direct line, 1/3 via bus 3.
  ASSERT_EQ(m.reduced_bus_ids, (std::vector<int>{2, 3}));
  Matrix expected(3, 2);
  expected << -2.0 / 3, -1.0 / 3,  //
      1.0 / 3, -1.0 / 3,           //
      -1.0 / 3, -2.0 / 3;
  EXPECT_LT((m.ptdf - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(NetModel, LaplacianRowsSumToZeroAndIsSymmetric) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const GridCase g = random_grid(8 + trial, 4, rng);
    const Matrix b = build_bus_susceptance(g);
    EXPECT_LT(b.rowwise().sum().cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((b - b.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(NetModel, ZeroEigenvalueMultiplicityEqualsComponentCount) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 6; ++trial) {
    GridCase g = random_grid(10, 3, rng);
    // Cut the graph by dropping every branch that touches the chosen buses.
    const int isolated = trial % 3;
    std::vector<Branch> kept;
    for (const Branch& br : g.branches) {
      const bool cut = br.from > 10 - isolated || br.to > 10 - isolated;
      if (!cut) kept.push_back(br);
    }
    g.branches = kept;
    const int comps = connected_components(g);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(build_bus_susceptance(g));
    const double top = eig.eigenvalues().cwiseAbs().maxCoeff();
    int zeros = 0;
    for (double v : eig.eigenvalues()) zeros += std::abs(v) < 1e-9 * top;
    EXPECT_EQ(zeros, comps);
    EXPECT_GE(comps, 1);
  }
}

TEST(NetModel, DisconnectedCaseThrowsWithComponents) {
  GridCase g = load_fixture("case3_triangle.json");
  g.buses.push_back({4, 10.0});
  try {
    reduce(g);
    FAIL() << "expected ConnectivityError";
  } catch (const ConnectivityError& e) {
    ASSERT_EQ(e.components().size(), 2u);
    EXPECT_EQ(e.components()[1], std::vector<int>{4});
  }
}

TEST(NetModel, FlowsMatchAngleDifferences) {
  std::mt19937_64 rng(3);
  const GridCase g = random_grid(9, 5, rng);
  const ReducedModel m = reduce(g);
  std::normal_distribution<double> n(0.0, 30.0);
  const Vector u = Vector::NullaryExpr(m.num_inputs(), [&] { return n(rng); });
  const Vector w = Vector::NullaryExpr(m.num_demands(), [&] { return n(rng); });
  const DcFlow f = solve_dc_flow(m, u, w);

  Vector theta = Vector::Zero(static_cast<Eigen::Index>(g.buses.size()));
  for (std::size_t k = 0; k < m.reduced_bus_ids.size(); ++k) {
    theta(g.bus_index(m.reduced_bus_ids[k])) = f.angles(static_cast<Eigen::Index>(k));
  }
  for (std::size_t k = 0; k < g.branches.size(); ++k) {
    const Branch& br = g.branches[k];
    const double expected = (theta(g.bus_index(br.from)) - theta(g.bus_index(br.to))) / (br.x * br.tap);
    EXPECT_NEAR(f.flows(static_cast<Eigen::Index>(k)), expected, 1e-8 * (1 + std::abs(expected)));
  }
  EXPECT_LT((f.flows - m.ptdf * (m.gen_incidence * u - m.demand_incidence * w)).cwiseAbs().maxCoeff(),
            1e-8);
}

TEST(NetModel, NodalBalanceHoldsAtEveryBus) {
  std::mt19937_64 rng(8);
  const GridCase g = random_grid(7, 3, rng);
  const ReducedModel m = reduce(g);
  const Vector u = Vector::Constant(m.num_inputs(), 12.5);
  const Vector w = Vector::LinSpaced(m.num_demands(), 3.0, 40.0);
  const DcFlow f = solve_dc_flow(m, u, w);
  Vector net = Vector::Zero(static_cast<Eigen::Index>(g.buses.size()));
  for (std::size_t k = 0; k < g.branches.size(); ++k) {
    net(g.bus_index(g.branches[k].from)) -= f.flows(static_cast<Eigen::Index>(k));
    net(g.bus_index(g.branches[k].to)) += f.flows(static_cast<Eigen::Index>(k));
  }
  Vector injection = Vector::Zero(net.size());
  for (std::size_t k = 0; k < m.reduced_bus_ids.size(); ++k) {
    injection(g.bus_index(m.reduced_bus_ids[k])) =
        (m.gen_incidence * u - m.demand_incidence * w)(static_cast<Eigen::Index>(k));
  }
  injection(m.slack_index) += f.slack_power;
  EXPECT_LT((net + injection).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(NetModel, InputOrderIsGeneratorsThenStorages) {
  const GridCase g = load_fixture("case6ww.json");
  const ReducedModel m = reduce(g);
  EXPECT_EQ(m.num_inputs(), g.num_inputs());
  EXPECT_EQ(m.num_storages(), 2);
  const Eigen::Index gens = m.num_inputs() - m.num_storages();
  EXPECT_TRUE(m.storage_selector.leftCols(gens).isZero());
  EXPECT_TRUE(m.storage_selector.rightCols(2).isIdentity());
}

TEST(NetModel, ValidationRejectsBrokenCases) {
  GridCase g = load_fixture("case3_triangle.json");
  GridCase bad = g;
  bad.branches[0].to = 99;
  EXPECT_THROW(bad.validate(), ReferenceError);
  bad = g;
  bad.branches[0].x = 0.0;
  EXPECT_THROW(reduce(bad), InvalidParameter);
  bad = g;
  bad.storages[0].e0 = 1000.0;
  EXPECT_THROW(bad.validate(), InvalidParameter);
  bad = g;
  bad.slack_bus = 3;  // no generator there
  EXPECT_THROW(bad.validate(), InvalidParameter);
}

}  // namespace
}  // namespace ddopf
