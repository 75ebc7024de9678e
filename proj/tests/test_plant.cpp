#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "ddopf/errors.hpp"
#include "ddopf/plant.hpp"
#include "support/fixtures.hpp"

namespace ddopf {
namespace {

using testing::load_fixture;

struct Fixture {
  ReducedModel model;
  QuasiWeierstrass sys;
};

Fixture make(const std::string& name) {
  const GridCase g = load_fixture(name);
  Fixture f{reduce(g), {}};
  f.sys = assemble_descriptor(f.model, g.delta_hours);
  return f;
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  return Matrix::NullaryExpr(r, c, [&] { return n(rng); });
}

TEST(Plant, DescriptorMatricesHaveTheOpfStructure) {
  const Fixture f = make("case6ww.json");
  const QuasiWeierstrass& s = f.sys;
  const int q = s.q();
  EXPECT_TRUE(s.a1.isIdentity());
  EXPECT_TRUE(s.n.isZero());
  EXPECT_TRUE(s.f1.isZero());
  EXPECT_EQ(s.nilpotency_index, 1);
  EXPECT_TRUE(s.b1.isApprox(-0.25 * f.model.storage_selector));
  EXPECT_TRUE(s.d.row(q).isApprox(-Vector::Ones(s.num_inputs()).transpose()));
  EXPECT_TRUE(s.g.row(q).isApprox(Vector::Ones(s.num_disturbances()).transpose()));
  EXPECT_TRUE(s.c1.topRows(q).isIdentity());
  EXPECT_TRUE(s.c1.bottomRows(s.num_outputs() - q).isZero());
  // Algebraic part: x2 = -B2 u - F2 w are the angles, flows read them through B~f.
  const Matrix binv = f.model.reduced_susceptance.inverse();
  EXPECT_LT((s.b2 + binv * f.model.gen_incidence).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((s.f2 - binv * f.model.demand_incidence).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Plant, NilpotencyIndex) {
  EXPECT_EQ(nilpotency_index(Matrix::Zero(3, 3)), 1);
  Matrix shift = Matrix::Zero(3, 3);
  shift(0, 1) = 1.0;
  shift(1, 2) = 1.0;
  EXPECT_EQ(nilpotency_index(shift), 3);
  EXPECT_THROW(nilpotency_index(Matrix::Identity(2, 2)), InvalidParameter);
}

TEST(Plant, StepArithmetic) {
  const Fixture f = make("case3_triangle.json");
  // u = [gen at bus 2; storage at bus 3]; w = demand at bus 3.
  PlantState st{Vector::Constant(1, 100.0)};
  StepResult r = step(f.sys, st, Vector::Zero(2), Vector::Zero(1));
  EXPECT_EQ(r.y(0), 100.0);
  EXPECT_TRUE(r.y.tail(4).isZero());
  EXPECT_EQ(r.next.e(0), 100.0);

  Vector u(2);
  u << 0.0, 10.0;
  r = step(f.sys, st, u, Vector::Zero(1));
  EXPECT_DOUBLE_EQ(r.next.e(0), 97.5);

  // +1 MW at bus 2, 1 MW demand at bus 3, slack idle.
  u << 1.0, 0.0;
  r = step(f.sys, st, u, Vector::Constant(1, 1.0));
  EXPECT_NEAR(r.y(1), 0.0, 1e-15);
  EXPECT_NEAR(r.y(2), -1.0 / 3, 1e-12);
  EXPECT_NEAR(r.y(3), 2.0 / 3, 1e-12);
  EXPECT_NEAR(r.y(4), 1.0 / 3, 1e-12);
}

TEST(Plant, PowerBalanceAndPtdfFlowsOnRandomInputs) {
  std::mt19937_64 rng(21);
  for (const char* name : {"case3_triangle.json", "case6ww.json", "case14.json", "case118.json"}) {
    const Fixture f = make(name);
    const Matrix u = random_matrix(20, f.sys.num_inputs(), rng, 40.0);
    const Matrix w = random_matrix(20, f.sys.num_disturbances(), rng, 40.0).cwiseAbs();
    const TrajectoryLog log = simulate(f.sys, Vector::Constant(f.sys.q(), 10.0), u, w);
    const OutputLayout& l = f.sys.layout;
    for (Eigen::Index k = 0; k < log.length(); ++k) {
      const double balance = log.y(k, l.slack_offset()) + u.row(k).sum() - w.row(k).sum();
      EXPECT_LT(std::abs(balance), 1e-9 * (1.0 + w.row(k).cwiseAbs().sum())) << name;
      const Vector flows = f.model.ptdf * (f.model.gen_incidence * u.row(k).transpose() -
                                           f.model.demand_incidence * w.row(k).transpose());
      EXPECT_LT((log.y.row(k).segment(l.flow_offset(), l.branches).transpose() - flows)
                    .cwiseAbs()
                    .maxCoeff(),
                1e-9 * (1.0 + flows.cwiseAbs().maxCoeff()))
          << name;
    }
  }
}

TEST(Plant, StorageTelescopes) {
  std::mt19937_64 rng(4);
  const Fixture f = make("case6ww.json");
  const Matrix u = random_matrix(50, f.sys.num_inputs(), rng, 10.0);
  const Matrix w = random_matrix(50, f.sys.num_disturbances(), rng, 10.0);
  const Vector e0 = Vector::Constant(f.sys.q(), 25.0);
  const TrajectoryLog log = simulate(f.sys, e0, u, w);
  Vector e = e0;
  for (Eigen::Index k = 0; k < 50; ++k) {
    EXPECT_EQ(log.y.row(k).head(f.sys.q()).transpose(), e);
    e -= 0.25 * f.model.storage_selector * u.row(k).transpose();
  }
  // Telescoped form: e(T-1) - e(0) = -delta * sum of storage powers.
  const Vector sum = f.model.storage_selector * u.topRows(49).colwise().sum().transpose();
  EXPECT_LT((log.y.row(49).head(f.sys.q()).transpose() - e0 + 0.25 * sum).cwiseAbs().maxCoeff(),
            1e-12);
}

TEST(Plant, SuperpositionOnTheChargeBlock) {
  std::mt19937_64 rng(9);
  const Fixture f = make("case14.json");
  const Matrix u = random_matrix(12, f.sys.num_inputs(), rng, 10.0);
  const Matrix du = random_matrix(12, f.sys.num_inputs(), rng, 10.0);
  const Matrix w = random_matrix(12, f.sys.num_disturbances(), rng, 10.0);
  const Vector e0 = Vector::Constant(f.sys.q(), 30.0);
  const int q = f.sys.q();
  const Matrix a = simulate(f.sys, e0, u + du, w).y.leftCols(q);
  const Matrix b = simulate(f.sys, e0, u, w).y.leftCols(q);
  const Matrix c = simulate(f.sys, Vector::Zero(q), du, Matrix::Zero(12, w.cols())).y.leftCols(q);
  EXPECT_LT((a - b - c).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Plant, ConstantInputsGiveConstantAlgebraicOutputs) {
  const Fixture f = make("case6ww.json");
  const Matrix u = Matrix::Constant(3, f.sys.num_inputs(), 5.0);
  const Matrix w = Matrix::Constant(3, f.sys.num_disturbances(), 30.0);
  const TrajectoryLog log = simulate(f.sys, Vector::Constant(2, 25.0), u, w);
  const int q = f.sys.q();
  for (int k = 1; k < 3; ++k) {
    EXPECT_LT((log.y.row(k).tail(log.y.cols() - q) - log.y.row(0).tail(log.y.cols() - q))
                  .cwiseAbs()
                  .maxCoeff(),
              1e-12);
    EXPECT_NEAR(log.y(k, 0) - log.y(k - 1, 0), -0.25 * 5.0, 1e-12);
  }
  EXPECT_EQ(simulate(f.sys, Vector::Zero(2), Matrix(0, u.cols()), Matrix(0, w.cols())).length(), 0);
}

TEST(Plant, ReplayReproducesLog) {
  std::mt19937_64 rng(1);
  const Fixture f = make("case14.json");
  const Matrix u = random_matrix(30, f.sys.num_inputs(), rng, 10.0);
  const Matrix w = random_matrix(30, f.sys.num_disturbances(), rng, 10.0);
  const TrajectoryLog a = simulate(f.sys, Vector::Constant(1, 50.0), u, w);
  const TrajectoryLog b = simulate(f.sys, a.y.row(0).head(1).transpose(), a.u, a.w);
  EXPECT_EQ(a.y, b.y);

  const auto path = std::filesystem::temp_directory_path() / "ddopf_plant_log.csv";
  save_trajectory_csv(a, path);
  const TrajectoryLog c = load_trajectory_csv(path);
  EXPECT_EQ(c.u, a.u);
  EXPECT_EQ(c.w, a.w);
  EXPECT_EQ(c.y, a.y);
}

TEST(Plant, StepRejectsWrongDimensions) {
  const Fixture f = make("case3_triangle.json");
  EXPECT_THROW(step(f.sys, {Vector::Zero(1)}, Vector::Zero(3), Vector::Zero(1)), DimensionMismatch);
}

TEST(Plant, PbhTests) {
  for (const char* name : {"case3_triangle.json", "case6ww.json", "case14.json", "case118.json"}) {
    const Fixture f = make(name);
    EXPECT_TRUE(r_controllable(f.sys)) << name;
    EXPECT_TRUE(r_observable(f.sys)) << name;
  }
  QuasiWeierstrass s;
  s.a1 = Matrix::Identity(2, 2);
  s.b1 = Matrix::Zero(2, 1);
  s.b1(0, 0) = 1.0;
  s.f1 = Matrix::Zero(2, 1);
  s.c1 = Matrix::Identity(2, 2);
  s.n = Matrix::Zero(0, 0);
  EXPECT_FALSE(r_controllable(s));
  EXPECT_TRUE(r_observable(s));

  QuasiWeierstrass empty;
  empty.a1 = Matrix::Zero(0, 0);
  empty.b1 = Matrix::Zero(0, 2);
  empty.f1 = Matrix::Zero(0, 1);
  empty.c1 = Matrix::Zero(3, 0);
  EXPECT_TRUE(r_controllable(empty));
  EXPECT_TRUE(r_observable(empty));
}

}  // namespace
}  // namespace ddopf
