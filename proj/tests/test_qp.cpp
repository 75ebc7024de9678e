#include <gtest/gtest.h>

#include <limits>
#include <random>

#include "ddopf/errors.hpp"
#include "ddopf/qp.hpp"
#include "support/qp_oracle.hpp"

namespace ddopf {
namespace {

using testing::DenseQp;
using testing::enumerate_active_sets;
using testing::random_qp;
using testing::to_problem;

constexpr double kInf = std::numeric_limits<double>::infinity();

QpProblem clamp_problem() {
  return QpProblem::dense((Matrix(1, 1) << 2).finished(), (Vector(1) << -2).finished(),
                          Matrix::Identity(1, 1), Vector::Zero(1), Vector::Constant(1, 0.5));
}

TEST(Qp, ClampedScalar) {
  const QpProblem p = clamp_problem();
  const QpSolution s = solve(p);
  ASSERT_EQ(s.status, QpStatus::kOptimal);
  EXPECT_NEAR(s.x(0), 0.5, 1e-8);
  EXPECT_NEAR(s.y(0), 1.0, 1e-6);  // upper bound active, positive multiplier
  const KktResiduals r = kkt_residuals(p, s.x, s.y);
  EXPECT_LT(r.stationarity, 1e-6);
  EXPECT_LT(r.primal, 1e-6);
  EXPECT_LT(r.complementarity, 1e-6);
}

TEST(Qp, KktResidualsOfHandPicks) {
  const QpProblem p = clamp_problem();
  const KktResiduals zero = kkt_residuals(p, Vector::Zero(1), Vector::Zero(1));
  EXPECT_EQ(zero.primal, 0.0);
  EXPECT_DOUBLE_EQ(zero.stationarity, 2.0);
  const KktResiduals outside = kkt_residuals(p, Vector::Constant(1, 0.8), Vector::Zero(1));
  EXPECT_NEAR(outside.primal, 0.3, 1e-15);
  const KktResiduals below = kkt_residuals(p, Vector::Constant(1, -0.25), Vector::Zero(1));
  EXPECT_NEAR(below.primal, 0.25, 1e-15);
}

TEST(Qp, EqualityConstrainedSymmetry) {
  const QpProblem p = QpProblem::dense(Matrix::Identity(2, 2), Vector::Zero(2), Matrix::Ones(1, 2),
                                       Vector::Ones(1), Vector::Ones(1));
  const QpSolution s = solve(p);
  ASSERT_EQ(s.status, QpStatus::kOptimal);
  EXPECT_NEAR(s.x(0), 0.5, 1e-8);
  EXPECT_NEAR(s.x(1), 0.5, 1e-8);
}

TEST(Qp, MatchesActiveSetEnumeration) {
  std::mt19937_64 rng(2024);
  int compared = 0;
  for (int trial = 0; trial < 150; ++trial) {
    const int n = 1 + trial % 6;
    const int m = 1 + (trial / 6) % 6;
    const DenseQp qp = random_qp(n, m, rng);
    const auto oracle = enumerate_active_sets(qp);
    ASSERT_TRUE(oracle.has_value());  // feasible by construction
    const QpProblem p = to_problem(qp);
    const QpSolution s = solve(p);
    ASSERT_EQ(s.status, QpStatus::kOptimal) << "trial " << trial;
    EXPECT_LT((s.x - oracle->x).cwiseAbs().maxCoeff(), 1e-6 * (1.0 + oracle->x.cwiseAbs().maxCoeff()))
        << "trial " << trial;
    const KktResiduals r = kkt_residuals(p, s.x, s.y);
    EXPECT_LT(std::max({r.stationarity, r.primal, r.complementarity}), 1e-6) << "trial " << trial;
    ++compared;
  }
  EXPECT_GE(compared, 100);
}

// P = J'J + diag(d) with a thin J: the factored KKT path must land on the
// same minimizer as the enumeration.
TEST(Qp, FactoredHessianMatchesActiveSetEnumeration) {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 2 + trial % 5;
    const int m = 1 + (trial / 5) % 6;
    const int k = 1 + trial % (n - 1);
    DenseQp qp = random_qp(n, m, rng);
    const Matrix j = Matrix::NullaryExpr(k, n, [&] { return g(rng); });
    const Vector d = Vector::NullaryExpr(n, [&] { return trial % 2 ? 0.05 + u(rng) : 0.0; });
    qp.p = j.transpose() * j;
    qp.p.diagonal() += d;
    // A zero diagonal leaves P singular; keep the QP bounded with a box.
    if (d.isZero()) {
      const Eigen::Index rows = qp.a.rows();
      qp.a.conservativeResize(rows + n, n);
      qp.a.bottomRows(n).setIdentity();
      qp.lo.conservativeResize(rows + n);
      qp.hi.conservativeResize(rows + n);
      qp.lo.tail(n).setConstant(-50.0);
      qp.hi.tail(n).setConstant(50.0);
    }
    QpProblem p = to_problem(qp);
    p.set_factor(j.sparseView(), d);
    const QpSolution factored = solve(p);
    const QpSolution plain = solve(to_problem(qp));
    ASSERT_EQ(factored.status, QpStatus::kOptimal) << "trial " << trial;
    ASSERT_EQ(plain.status, QpStatus::kOptimal) << "trial " << trial;
    const double scale = 1.0 + plain.x.cwiseAbs().maxCoeff();
    EXPECT_LT((factored.x - plain.x).cwiseAbs().maxCoeff(), 1e-6 * scale) << "trial " << trial;
    if (!d.isZero()) {
      const auto oracle = enumerate_active_sets(qp);
      ASSERT_TRUE(oracle.has_value());
      EXPECT_LT((factored.x - oracle->x).cwiseAbs().maxCoeff(), 1e-6 * scale) << "trial " << trial;
    }
    const KktResiduals r = kkt_residuals(p, factored.x, factored.y);
    EXPECT_LT(std::max({r.stationarity, r.primal, r.complementarity}), 1e-6) << "trial " << trial;
  }
}

TEST(Qp, FactorMustReproduceHessian) {
  QpProblem p = clamp_problem();  // P = [2]
  EXPECT_THROW(p.set_factor((Matrix(1, 1) << 1.0).finished().sparseView(), Vector::Zero(1)),
               InvalidParameter);
  EXPECT_THROW(p.set_factor(Matrix::Ones(1, 2).sparseView(), Vector::Zero(2)), DimensionMismatch);
  p.set_factor((Matrix(1, 1) << 1.0).finished().sparseView(), Vector::Ones(1));
  EXPECT_TRUE(p.has_factor);
  const QpSolution s = solve(p);
  ASSERT_EQ(s.status, QpStatus::kOptimal);
  EXPECT_NEAR(s.x(0), 0.5, 1e-8);
}

TEST(Qp, PrimalInfeasibleDetected) {
  // x >= 1 and x <= 0 through two rows.
  Matrix a(2, 1);
  a << 1, 1;
  const QpProblem p = QpProblem::dense(Matrix::Identity(1, 1), Vector::Zero(1), a,
                                       (Vector(2) << 1, -kInf).finished(),
                                       (Vector(2) << kInf, 0).finished());
  const QpSolution s = solve(p);
  EXPECT_EQ(s.status, QpStatus::kPrimalInfeasible);
  EXPECT_EQ(s.certificate_rows, (std::vector<int>{0, 1}));
}

TEST(Qp, DualInfeasibleDetected) {
  // Linear objective unbounded below over x >= 0.
  const QpProblem p = QpProblem::dense(Matrix::Zero(2, 2), (Vector(2) << -1, 0).finished(),
                                       Matrix::Identity(2, 2), Vector::Zero(2),
                                       Vector::Constant(2, kInf));
  EXPECT_EQ(solve(p).status, QpStatus::kDualInfeasible);
}

TEST(Qp, ScalingTheObjectiveLeavesTheMinimizer) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    DenseQp qp = random_qp(4, 5, rng);
    const QpSolution base = solve(to_problem(qp));
    for (double gamma : {1e-3, 1e3}) {
      DenseQp scaled = qp;
      scaled.p *= gamma;
      scaled.c *= gamma;
      const QpSolution s = solve(to_problem(scaled));
      ASSERT_EQ(s.status, QpStatus::kOptimal);
      EXPECT_LT((s.x - base.x).cwiseAbs().maxCoeff(), 1e-6);
    }
  }
}

TEST(Qp, TighterToleranceDoesNotWorsenResiduals) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const QpProblem p = to_problem(random_qp(5, 6, rng));
    QpSettings loose;
    loose.eps_abs = loose.eps_rel = 1e-4;
    loose.polish = false;
    QpSettings tight = loose;
    tight.eps_abs = tight.eps_rel = 1e-9;
    const QpSolution a = solve(p, loose);
    const QpSolution b = solve(p, tight);
    const KktResiduals ra = kkt_residuals(p, a.x, a.y);
    const KktResiduals rb = kkt_residuals(p, b.x, b.y);
    EXPECT_LE(std::max(rb.stationarity, rb.primal), std::max(ra.stationarity, ra.primal) + 1e-12);
  }
}

TEST(Qp, DeterministicAndWarmStartConsistent) {
  std::mt19937_64 rng(9);
  const QpProblem p = to_problem(random_qp(6, 6, rng));
  const QpSolution a = solve(p);
  const QpSolution b = solve(p);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.iterations, b.iterations);
  const WarmStart warm{a.x, a.y};
  const QpSolution c = solve(p, {}, &warm);
  ASSERT_EQ(c.status, QpStatus::kOptimal);
  EXPECT_LE(c.iterations, a.iterations);
  EXPECT_LT((c.x - a.x).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(Qp, SolverReuseAfterUpdates) {
  std::mt19937_64 rng(13);
  const DenseQp qp = random_qp(5, 6, rng);
  QpSolver solver(to_problem(qp));
  ASSERT_EQ(solver.solve().status, QpStatus::kOptimal);
  DenseQp moved = qp;
  moved.c = -qp.c;
  moved.lo.array() -= 0.2;
  moved.hi.array() += 0.3;
  solver.update_linear_cost(moved.c);
  solver.update_bounds(moved.lo, moved.hi);
  const QpSolution s = solver.solve();
  const auto oracle = enumerate_active_sets(moved);
  ASSERT_TRUE(oracle);
  EXPECT_LT((s.x - oracle->x).cwiseAbs().maxCoeff(), 1e-6 * (1.0 + oracle->x.cwiseAbs().maxCoeff()));
}

TEST(Qp, ConstructionValidates) {
  EXPECT_THROW(QpProblem::dense(Matrix::Identity(2, 2), Vector::Zero(3), Matrix::Identity(2, 2),
                                Vector::Zero(2), Vector::Ones(2)),
               DimensionMismatch);
  EXPECT_THROW(QpProblem::dense(Matrix::Identity(1, 1), Vector::Zero(1), Matrix::Identity(1, 1),
                                Vector::Ones(1), Vector::Zero(1)),
               InvalidParameter);
  // Asymmetric P is symmetrized.
  Matrix p(2, 2);
  p << 2, 1, 0, 2;
  const QpProblem q = QpProblem::dense(p, Vector::Zero(2), Matrix::Identity(2, 2), -Vector::Ones(2),
                                       Vector::Ones(2));
  EXPECT_DOUBLE_EQ(Matrix(q.p)(0, 1), 0.5);
  EXPECT_DOUBLE_EQ(Matrix(q.p)(1, 0), 0.5);
}

}  // namespace
}  // namespace ddopf
