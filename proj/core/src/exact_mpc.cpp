#include "ddopf/controllers.hpp"
#include "ddopf/errors.hpp"

namespace ddopf {

ExactMpc::ExactMpc(ReducedModel model, StageCost cost, Bounds bounds, int horizon,
                   QpSettings settings)
    : model_(std::move(model)), horizon_(horizon) {
  if (horizon < 1) throw InvalidParameter("horizon must be at least 1");
  const int nu = model_.num_inputs();
  const int q = model_.num_storages();
  const int ny = model_.num_outputs();
  const Matrix flow_map = model_.ptdf * model_.gen_incidence;
  builder_.emplace(static_cast<Eigen::Index>(horizon) * nu, std::move(cost), std::move(bounds),
                   0.0, settings);
  for (int k = 0; k < horizon; ++k) {
    StageMap s;
    s.col = 0;
    s.gu = Matrix::Zero(nu, (k + 1) * nu);
    s.gu.rightCols(nu).setIdentity();
    s.gy = Matrix::Zero(ny, (k + 1) * nu);
    for (int i = 0; i < k; ++i) {
      s.gy.block(0, i * nu, q, nu) = -model_.delta_hours * model_.storage_selector;
    }
    s.gy.block(q, k * nu, 1, nu).setConstant(-1.0);
    s.gy.block(q + 1, k * nu, model_.num_branches(), nu) = flow_map;
    s.free_rows = k == 0 ? q : 0;
    builder_->add_stage(std::move(s));
  }
  builder_->finalize();
}

Plan ExactMpc::plan(const Measurement& m, const Matrix& w_forecast) {
  const int q = model_.num_storages();
  const int nu = model_.num_inputs();
  if (w_forecast.rows() < horizon_ || w_forecast.cols() != model_.num_demands()) {
    throw DimensionMismatch("exact MPC: forecast must be horizon x n_w");
  }
  if (m.e_now.size() != q) throw DimensionMismatch("exact MPC: charge vector size");
  const Matrix flow_demand = model_.ptdf * model_.demand_incidence;
  std::vector<PlanBuilder::Offsets> offsets(horizon_);
  for (int k = 0; k < horizon_; ++k) {
    const Vector w = w_forecast.row(k).transpose();
    offsets[k].u = Vector::Zero(nu);
    offsets[k].y.resize(model_.num_outputs());
    offsets[k].y.head(q) = m.e_now;
    offsets[k].y(q) = w.sum();
    offsets[k].y.tail(model_.num_branches()) = -flow_demand * w;
  }
  WarmStart warm;
  const WarmStart* ws = nullptr;
  if (warm_start_ && last_) {
    warm.x = shift_blocks(last_->x, 0, nu);
    warm.y = shift_blocks(last_->y, 0, nu + model_.num_outputs());
    ws = &warm;
  }
  Plan p = builder_->solve(offsets, {}, ws);
  last_ = WarmStart{p.decision, builder_->last_duals()};
  return p;
}

Plan exact_mpc_plan(const ReducedModel& model, const StageCost& cost, const Bounds& bounds,
                    const Vector& e_now, const Matrix& w_forecast, const QpSettings& settings) {
  ExactMpc mpc(model, cost, bounds, static_cast<int>(w_forecast.rows()), settings);
  Measurement m;
  m.e_now = e_now;
  return mpc.plan(m, w_forecast);
}

}  // namespace ddopf
