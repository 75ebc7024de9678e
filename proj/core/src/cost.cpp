#include <Eigen/Eigenvalues>
#include <limits>

#include "ddopf/controllers.hpp"
#include "ddopf/errors.hpp"

namespace ddopf {

void StageCost::validate() const {
  const Eigen::Index nu = r_lin.size();
  const Eigen::Index ny = q_lin.size();
  if (r_quad.rows() != nu || r_quad.cols() != nu || q_quad.rows() != ny || q_quad.cols() != ny) {
    throw DimensionMismatch("stage cost: matrix sizes do not match the linear terms");
  }
  if (nu > 0) {
    Eigen::LLT<Matrix> llt(0.5 * (r_quad + r_quad.transpose()));
    if (llt.info() != Eigen::Success) {
      throw InvalidParameter("stage cost: R must be positive definite");
    }
  }
  if (ny > 0) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (q_quad + q_quad.transpose()),
                                              Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-10) {
      throw InvalidParameter("stage cost: Q must be positive semidefinite");
    }
  }
}

double StageCost::operator()(const Vector& u, const Vector& y) const {
  return u.dot(r_quad * u) + r_lin.dot(u) + y.dot(q_quad * y) + q_lin.dot(y);
}

StageCost make_stage_cost(const GridCase& grid, const ReducedModel& model,
                          const CostOptions& options) {
  const int nu = model.num_inputs();
  const int ny = model.num_outputs();
  const int q = model.num_storages();
  const double dt = grid.delta_hours;
  StageCost cost;
  cost.r_quad = Matrix::Zero(nu, nu);
  cost.r_lin = Vector::Zero(nu);
  cost.q_quad = Matrix::Zero(ny, ny);
  cost.q_lin = Vector::Zero(ny);

  int col = 0;
  for (int g : model.input_generators) {
    cost.r_quad(col, col) = dt * grid.generators[g].cost_quadratic;
    cost.r_lin(col) = dt * grid.generators[g].cost_linear;
    ++col;
  }
  for (int s = 0; s < q; ++s, ++col) {
    cost.r_quad(col, col) = dt * grid.storages[s].cost_power_quadratic;
    cost.q_quad(s, s) = dt * grid.storages[s].cost_energy_quadratic;
  }
  if (options.price_slack) {
    const auto& slack = grid.generators[model.slack_generator];
    cost.q_quad(q, q) = dt * slack.cost_quadratic;
    cost.q_lin(q) = dt * slack.cost_linear;
  }
  for (int k = q + 1; k < ny; ++k) cost.q_quad(k, k) = dt * options.flow_weight;
  cost.validate();
  return cost;
}

void Bounds::validate() const {
  if (u_min.size() != u_max.size() || y_min.size() != y_max.size()) {
    throw DimensionMismatch("bounds: min and max differ in length");
  }
  if ((u_min.array() > u_max.array()).any() || (y_min.array() > y_max.array()).any()) {
    throw InvalidParameter("bounds: min exceeds max");
  }
}

Bounds make_bounds(const GridCase& grid, const ReducedModel& model) {
  const int nu = model.num_inputs();
  const int q = model.num_storages();
  const int ne = model.num_branches();
  Bounds b;
  b.u_min.resize(nu);
  b.u_max.resize(nu);
  int col = 0;
  for (int g : model.input_generators) {
    b.u_min(col) = grid.generators[g].p_min;
    b.u_max(col) = grid.generators[g].p_max;
    ++col;
  }
  for (int s = 0; s < q; ++s, ++col) {
    b.u_min(col) = grid.storages[s].s_min;
    b.u_max(col) = grid.storages[s].s_max;
  }
  const int ny = q + 1 + ne;
  b.y_min.resize(ny);
  b.y_max.resize(ny);
  for (int s = 0; s < q; ++s) {
    b.y_min(s) = grid.storages[s].e_min;
    b.y_max(s) = grid.storages[s].e_max;
  }
  const auto& slack = grid.generators[model.slack_generator];
  b.y_min(q) = slack.p_min;
  b.y_max(q) = slack.p_max;
  for (int k = 0; k < ne; ++k) {
    const double f = grid.branches[k].f_max > 0.0 ? grid.branches[k].f_max
                                                   : std::numeric_limits<double>::infinity();
    b.y_min(q + 1 + k) = -f;
    b.y_max(q + 1 + k) = f;
  }
  b.validate();
  return b;
}

}  // namespace ddopf
