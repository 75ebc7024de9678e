#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <string>

#include "ddopf/controllers.hpp"
#include "ddopf/errors.hpp"
#include "ddopf/log.hpp"

namespace ddopf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void push_block(std::vector<Eigen::Triplet<double>>& trips, const Matrix& m, Eigen::Index row,
                Eigen::Index col) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if (m(i, j) != 0.0) trips.emplace_back(row + i, col + j, m(i, j));
    }
  }
}

}  // namespace

PlanBuilder::PlanBuilder(Eigen::Index num_vars, StageCost cost, Bounds bounds,
                         double regularization, QpSettings settings)
    : num_vars_(num_vars),
      cost_(std::move(cost)),
      bounds_(std::move(bounds)),
      regularization_(regularization),
      settings_(settings) {
  if (regularization < 0.0) throw InvalidParameter("regularization weight must be nonnegative");
  bounds_.validate();
}

void PlanBuilder::add_equality(EqualityBlock block) {
  if (solver_) throw InvalidParameter("plan builder already finalized");
  for (const auto& [col, a] : block.terms) {
    if (a.rows() != block.rows() || col < 0 || col + a.cols() > num_vars_) {
      throw DimensionMismatch("equality block term out of range");
    }
  }
  groups_.push_back({false, equalities_.size(), num_rows_});
  num_rows_ += block.rows();
  equalities_.push_back(std::move(block));
}

void PlanBuilder::add_stage(StageMap map) {
  if (solver_) throw InvalidParameter("plan builder already finalized");
  if (map.gu.rows() != bounds_.u_min.size() || map.gy.rows() != bounds_.y_min.size() ||
      map.gu.cols() != map.gy.cols() || map.col < 0 || map.col + map.gu.cols() > num_vars_) {
    throw DimensionMismatch("stage map does not match the bounds or the variable count");
  }
  groups_.push_back({true, stages_.size(), num_rows_});
  num_rows_ += map.gu.rows() + map.gy.rows();
  stages_.push_back(std::move(map));
}

void PlanBuilder::set_factored_cost(bool on) {
  if (solver_) throw InvalidParameter("plan builder already finalized");
  factored_cost_ = on;
}

void PlanBuilder::finalize() {
  const Eigen::Index n = num_vars_;
  const Eigen::Index nu = bounds_.u_min.size();
  const Eigen::Index ny = bounds_.y_min.size();
  const Eigen::Index nz = nu + ny;

  // Stage Hessian h = 2 blockdiag(R, Q) and a factor h = L L'.
  Matrix h = Matrix::Zero(nz, nz);
  h.topLeftCorner(nu, nu) = cost_.r_quad + cost_.r_quad.transpose();
  h.bottomRightCorner(ny, ny) = cost_.q_quad + cost_.q_quad.transpose();
  Matrix lt;
  bool factored = factored_cost_;
  if (factored) {
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(h);
    const double tol = 1e-12 * std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < nz; ++i) {
      if (eig.eigenvalues()(i) > tol) keep.push_back(i);
    }
    lt.resize(static_cast<Eigen::Index>(keep.size()), nz);
    for (std::size_t r = 0; r < keep.size(); ++r) {
      lt.row(static_cast<Eigen::Index>(r)) = std::sqrt(eig.eigenvalues()(keep[r])) *
                                             eig.eigenvectors().col(keep[r]).transpose();
    }
    // Only worth it when the factor is much thinner than the stage blocks.
    for (const auto& st : stages_) {
      if (2 * lt.rows() > st.gu.cols()) factored = false;
    }
  }

  std::vector<Eigen::Triplet<double>> p_trips, j_trips;
  for (std::size_t k = 0; k < stages_.size(); ++k) {
    const auto& s = stages_[k];
    Matrix g(nz, s.gu.cols());
    g << s.gu, s.gy;
    const Matrix hg = g.transpose() * h * g;
    push_block(p_trips, 0.5 * (hg + hg.transpose()), s.col, s.col);
    if (factored) {
      push_block(j_trips, lt * g, static_cast<Eigen::Index>(k) * lt.rows(), s.col);
    }
  }
  if (regularization_ > 0.0) {
    for (Eigen::Index k = 0; k < n; ++k) p_trips.emplace_back(k, k, 2.0 * regularization_);
  }
  SparseMatrix p(n, n);
  p.setFromTriplets(p_trips.begin(), p_trips.end());

  std::vector<Eigen::Triplet<double>> a_trips;
  Vector lo(num_rows_), hi(num_rows_);
  for (const auto& g : groups_) {
    if (g.stage) {
      const auto& s = stages_[g.index];
      push_block(a_trips, s.gu, g.row, s.col);
      push_block(a_trips, s.gy, g.row + nu, s.col);
      lo.segment(g.row, nu) = bounds_.u_min;
      hi.segment(g.row, nu) = bounds_.u_max;
      lo.segment(g.row + nu, ny) = bounds_.y_min;
      hi.segment(g.row + nu, ny) = bounds_.y_max;
      lo.segment(g.row + nu, s.free_rows).setConstant(-kInf);
      hi.segment(g.row + nu, s.free_rows).setConstant(kInf);
    } else {
      const auto& e = equalities_[g.index];
      for (const auto& [col, a] : e.terms) push_block(a_trips, a, g.row, col);
      lo.segment(g.row, e.rows()).setZero();
      hi.segment(g.row, e.rows()).setZero();
    }
  }
  SparseMatrix a(num_rows_, n);
  a.setFromTriplets(a_trips.begin(), a_trips.end());
  QpProblem problem(std::move(p), Vector::Zero(n), std::move(a), std::move(lo), std::move(hi));
  if (factored) {
    SparseMatrix j(lt.rows() * static_cast<Eigen::Index>(stages_.size()), n);
    j.setFromTriplets(j_trips.begin(), j_trips.end());
    problem.set_factor(std::move(j), Vector::Constant(n, 2.0 * regularization_));
  }
  solver_ = std::make_unique<QpSolver>(std::move(problem), settings_);
}

Plan PlanBuilder::solve(const std::vector<Offsets>& offsets, const std::vector<Vector>& rhs,
                        const WarmStart* warm) {
  if (!solver_) finalize();
  if (offsets.size() != stages_.size() || rhs.size() != equalities_.size()) {
    throw DimensionMismatch("plan builder: one offset per stage and one rhs per block expected");
  }
  const Eigen::Index n = num_vars_;
  Vector c = Vector::Zero(n);
  Vector lo(num_rows_), hi(num_rows_);
  for (const auto& g : groups_) {
    if (g.stage) {
      const auto& s = stages_[g.index];
      const auto& o = offsets[g.index];
      const Eigen::Index nu = s.gu.rows();
      const Eigen::Index ny = s.gy.rows();
      if (o.u.size() != nu || o.y.size() != ny) throw DimensionMismatch("stage offset size");
      c.segment(s.col, s.gu.cols()) +=
          s.gu.transpose() * (2.0 * cost_.r_quad * o.u + cost_.r_lin) +
          s.gy.transpose() * (2.0 * cost_.q_quad * o.y + cost_.q_lin);
      lo.segment(g.row, nu) = bounds_.u_min - o.u;
      hi.segment(g.row, nu) = bounds_.u_max - o.u;
      lo.segment(g.row + nu, ny) = bounds_.y_min - o.y;
      hi.segment(g.row + nu, ny) = bounds_.y_max - o.y;
      lo.segment(g.row + nu, s.free_rows).setConstant(-kInf);
      hi.segment(g.row + nu, s.free_rows).setConstant(kInf);
    } else {
      const auto& e = equalities_[g.index];
      if (rhs[g.index].size() != e.rows()) throw DimensionMismatch("equality rhs size");
      lo.segment(g.row, e.rows()) = rhs[g.index];
      hi.segment(g.row, e.rows()) = rhs[g.index];
    }
  }
  solver_->update_linear_cost(c);
  solver_->update_bounds(lo, hi);
  QpSolution sol = solver_->solve(warm);

  if (sol.status == QpStatus::kPrimalInfeasible) {
    throw InfeasibleSchedule("plan QP is infeasible (" +
                                 std::to_string(sol.certificate_rows.size()) +
                                 " rows in the certificate)",
                             sol.certificate_rows);
  }
  if (sol.status == QpStatus::kDualInfeasible) {
    throw NumericalError("plan QP is unbounded");
  }
  if (sol.status == QpStatus::kMaxIterations) {
    log::warn("plan QP hit the iteration limit (primal residual " +
              std::to_string(sol.primal_residual) + ", dual residual " +
              std::to_string(sol.dual_residual) + ")");
  }

  Plan plan;
  const Eigen::Index nu = bounds_.u_min.size();
  const Eigen::Index ny = bounds_.y_min.size();
  plan.u.resize(static_cast<Eigen::Index>(stages_.size()), nu);
  plan.y.resize(static_cast<Eigen::Index>(stages_.size()), ny);
  plan.objective = regularization_ * sol.x.squaredNorm();
  for (std::size_t k = 0; k < stages_.size(); ++k) {
    const auto& s = stages_[k];
    const auto seg = sol.x.segment(s.col, s.gu.cols());
    const Vector u = s.gu * seg + offsets[k].u;
    const Vector y = s.gy * seg + offsets[k].y;
    plan.u.row(static_cast<Eigen::Index>(k)) = u.transpose();
    plan.y.row(static_cast<Eigen::Index>(k)) = y.transpose();
    plan.objective += cost_(u, y);
  }
  plan.decision = sol.x;
  plan.status = sol.status;
  plan.iterations = sol.iterations;
  plan.solve_seconds = sol.seconds;
  plan.polished = sol.polished;
  last_duals_ = std::move(sol.y);
  return plan;
}

Vector shift_blocks(const Vector& v, Eigen::Index prefix, Eigen::Index block) {
  Vector out = v;
  if (block <= 0) return out;
  const Eigen::Index body = v.size() - prefix;
  if (body < 2 * block) return out;
  out.segment(prefix, body - block) = v.segment(prefix + block, body - block);
  return out;
}

}  // namespace ddopf
