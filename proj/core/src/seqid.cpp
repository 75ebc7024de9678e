#include <string>

#include "ddopf/controllers.hpp"
#include "ddopf/errors.hpp"
#include "ddopf/log.hpp"

namespace ddopf {

namespace {

double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace

PtdfEstimate seqid_estimate_ptdf(const TrajectoryLog& data, const Matrix& gen_incidence,
                                 const Matrix& demand_incidence, const OutputLayout& layout) {
  if (data.u.cols() != gen_incidence.cols() || data.w.cols() != demand_incidence.cols() ||
      data.y.cols() != layout.size() || gen_incidence.rows() != demand_incidence.rows()) {
    throw DimensionMismatch("seq-ID: data does not match the incidence maps");
  }
  const Matrix injections =
      data.u * gen_incidence.transpose() - data.w * demand_incidence.transpose();
  const Matrix flows = data.y.middleCols(layout.flow_offset(), layout.branches);

  PtdfEstimate est;
  est.required_rank = static_cast<int>(gen_incidence.rows());
  est.rank = numeric_rank(injections);
  est.ptdf = (pseudo_inverse(injections) * flows).transpose();
  return est;
}

PtdfEstimate seqid_estimate_ptdf(const TrajectoryLog& data, const ReducedModel& model) {
  const OutputLayout layout{model.num_storages(), model.num_branches()};
  PtdfEstimate est =
      seqid_estimate_ptdf(data, model.gen_incidence, model.demand_incidence, layout);
  const Matrix injections =
      data.u * model.gen_incidence.transpose() - data.w * model.demand_incidence.transpose();
  for (Eigen::Index r = 0; r < injections.cols(); ++r) {
    if (injections.col(r).cwiseAbs().maxCoeff() == 0.0) {
      est.zero_injection_buses.push_back(model.reduced_bus_ids[r]);
    }
  }
  if (est.rank < est.required_rank) {
    std::string msg = "seq-ID: injection data has rank " + std::to_string(est.rank) + " of " +
                      std::to_string(est.required_rank) + " (" +
                      std::to_string(est.required_rank - est.rank) + " deficient)";
    if (!est.zero_injection_buses.empty()) {
      msg += "; no injection at bus";
      for (int b : est.zero_injection_buses) msg += " " + std::to_string(b);
    }
    log::warn(msg);
  }
  return est;
}

EquivalenceReport regression_equivalence_check(const TrajectoryLog& data,
                                               const ReducedModel& model) {
  const Eigen::Index nu = data.u.cols();
  const Eigen::Index nw = data.w.cols();
  const OutputLayout layout{model.num_storages(), model.num_branches()};
  if (data.y.cols() != layout.size()) throw DimensionMismatch("equivalence: output size");

  Matrix z(data.length(), nu + nw);
  z << data.u, data.w;
  const Matrix flows = data.y.middleCols(layout.flow_offset(), layout.branches);
  const Matrix z_pinv = pseudo_inverse(z);
  const Matrix regression = (z_pinv * flows).transpose();

  EquivalenceReport rep;
  rep.m_uf = regression.leftCols(nu);
  rep.m_wf = regression.rightCols(nw);
  const PtdfEstimate est = seqid_estimate_ptdf(data, model);
  rep.ptdf = est.ptdf;
  rep.injection_rank = est.rank;

  Matrix k(model.gen_incidence.rows(), nu + nw);
  k << model.gen_incidence, -model.demand_incidence;
  const Matrix implied = rep.ptdf * k;
  rep.deviation_u = max_abs(rep.m_uf - implied.leftCols(nu));
  rep.deviation_w = max_abs(rep.m_wf - implied.rightCols(nw));
  rep.max_deviation = std::max(rep.deviation_u, rep.deviation_w);
  const Matrix projector = z_pinv * z;
  rep.projected_deviation = max_abs((regression - implied) * projector);
  return rep;
}

std::unique_ptr<ExactMpc> make_seqid_controller(const ReducedModel& model,
                                                const PtdfEstimate& estimate, StageCost cost,
                                                Bounds bounds, int horizon, QpSettings settings) {
  if (estimate.ptdf.rows() != model.ptdf.rows() || estimate.ptdf.cols() != model.ptdf.cols()) {
    throw DimensionMismatch("seq-ID: estimated PTDF has the wrong shape");
  }
  ReducedModel identified = model;
  identified.ptdf = estimate.ptdf;
  auto mpc = std::make_unique<ExactMpc>(std::move(identified), std::move(cost), std::move(bounds),
                                        horizon, settings);
  mpc->set_name("seqid");
  return mpc;
}

}  // namespace ddopf
