#include <string>

#include "ddopf/controllers.hpp"
#include "ddopf/errors.hpp"
#include "ddopf/log.hpp"

namespace ddopf {

DdOpf::DdOpf(const TrajectoryLog& data, const ReducedModel& model, StageCost cost, Bounds bounds,
             DdOpfOptions options, QpSettings settings)
    : options_(options),
      storage_selector_(model.storage_selector),
      nu_(model.num_inputs()),
      nw_(model.num_demands()),
      ny_(model.num_outputs()),
      q_(model.num_storages()) {
  if (options_.horizon < 1) throw InvalidParameter("horizon must be at least 1");
  if (options_.t_ini < 1) throw InvalidParameter("T_ini must be at least 1");
  if (options_.lambda < 0.0) throw InvalidParameter("lambda must be nonnegative");
  if (options_.segmented && options_.full_past) {
    throw InvalidParameter("full-past mode requires the single-stack formulation");
  }
  if (data.u.cols() != nu_ || data.w.cols() != nw_ || data.y.cols() != ny_) {
    throw DimensionMismatch("DD-OPF: offline data does not match the model dimensions");
  }

  StackOptions so;
  so.t_ini = options_.t_ini;
  so.horizon = options_.segmented ? 1 : options_.horizon;
  so.policy = options_.policy;
  so.full_past = options_.full_past;
  stack_ = build_simplified_stack(data, storage_selector_, so);
  if (options_.policy == PePolicy::kTruncated) {
    const int target = options_.truncation_rank > 0
                           ? options_.truncation_rank
                           : (so.t_ini + so.horizon) * (nu_ + nw_) + q_;
    if (target < stack_.columns()) {
      stack_ = truncate_rank(stack_, target);
    } else {
      log::info("DD-OPF: " + std::to_string(stack_.columns()) +
                " data columns do not exceed the truncation target " + std::to_string(target));
    }
  }

  subst_ = NullspaceSubstitution(stack_.w_future);
  basis_ = subst_.basis();
  if (basis_.cols() == 0) {
    throw InsufficientData("DD-OPF: W_F leaves no free trajectory parameters");
  }
  uf_n_ = stack_.u_future * basis_;
  yf_n_ = stack_.y_future * basis_;
  sp_n_ = stack_.s_past * basis_;
  ep_n_ = stack_.e_past * basis_;
  if (options_.full_past) {
    up_n_ = stack_.u_past * basis_;
    wp_n_ = stack_.w_past * basis_;
    yp_n_ = stack_.y_past * basis_;
  }
  const Eigen::Index nb = basis_.cols();
  const Eigen::Index nvars = options_.segmented ? nb * options_.horizon : nb;
  builder_.emplace(nvars, std::move(cost), std::move(bounds), options_.lambda, settings);
  builder_->set_factored_cost(true);
  if (options_.segmented) build_segmented();
  else build_single();
  builder_->finalize();
}

void DdOpf::build_segmented() {
  const Eigen::Index nb = basis_.cols();
  const int t_ini = options_.t_ini;
  su_n_ = storage_selector_ * uf_n_;
  se_n_ = yf_n_.topRows(q_);
  const Eigen::Index past_rows = 2 * static_cast<Eigen::Index>(q_) * t_ini;
  Matrix own(past_rows, nb);
  own << sp_n_, ep_n_;
  for (int j = 0; j < options_.horizon; ++j) {
    if (past_rows > 0) {
      EqualityBlock eq;
      eq.terms.emplace_back(j * nb, own);
      // Past samples that fall inside the horizon come from earlier segments.
      for (int i = 0; i < t_ini; ++i) {
        const int tau = j - t_ini + i;
        if (tau < 0) continue;
        Matrix link = Matrix::Zero(past_rows, nb);
        link.middleRows(i * q_, q_) = -su_n_;
        link.middleRows(t_ini * q_ + i * q_, q_) = -se_n_;
        eq.terms.emplace_back(tau * nb, std::move(link));
      }
      builder_->add_equality(std::move(eq));
    }
    StageMap s;
    s.col = j * nb;
    s.gu = uf_n_;
    s.gy = yf_n_;
    s.free_rows = j == 0 ? q_ : 0;
    builder_->add_stage(std::move(s));
  }
}

void DdOpf::build_single() {
  const Eigen::Index nb = basis_.cols();
  EqualityBlock eq;
  if (options_.full_past) {
    Matrix past(up_n_.rows() + wp_n_.rows() + yp_n_.rows(), nb);
    past << up_n_, wp_n_, yp_n_;
    eq.terms.emplace_back(0, std::move(past));
  } else {
    Matrix past(sp_n_.rows() + ep_n_.rows(), nb);
    past << sp_n_, ep_n_;
    eq.terms.emplace_back(0, std::move(past));
  }
  if (eq.rows() > 0) builder_->add_equality(std::move(eq));
  for (int k = 0; k < options_.horizon; ++k) {
    StageMap s;
    s.col = 0;
    s.gu = uf_n_.middleRows(static_cast<Eigen::Index>(k) * nu_, nu_);
    s.gy = yf_n_.middleRows(static_cast<Eigen::Index>(k) * ny_, ny_);
    s.free_rows = k == 0 ? q_ : 0;
    builder_->add_stage(std::move(s));
  }
}

Plan DdOpf::plan(const Measurement& m, const Matrix& w_forecast) {
  if (w_forecast.rows() < options_.horizon || w_forecast.cols() != nw_) {
    throw DimensionMismatch("DD-OPF: forecast must be horizon x n_w");
  }
  const int t_ini = options_.t_ini;
  if (m.u.rows() < t_ini || m.y.rows() < t_ini || m.u.cols() != nu_ || m.y.cols() != ny_ ||
      (options_.full_past && (m.w.rows() < t_ini || m.w.cols() != nw_))) {
    throw DimensionMismatch("DD-OPF: measurement buffer shorter than T_ini or of wrong width");
  }
  return options_.segmented ? solve_segmented(m, w_forecast) : solve_single(m, w_forecast);
}

Plan DdOpf::solve_segmented(const Measurement& m, const Matrix& w_forecast) {
  const int t_ini = options_.t_ini;
  const int horizon = options_.horizon;
  const Eigen::Index nb = basis_.cols();
  const Eigen::Index last = m.u.rows() - 1;
  const Matrix su = storage_selector_ * stack_.u_future;
  const Matrix se = stack_.y_future.topRows(q_);

  std::vector<Vector> alpha0(horizon);
  for (int j = 0; j < horizon; ++j) alpha0[j] = subst_.particular(w_forecast.row(j).transpose());

  std::vector<PlanBuilder::Offsets> offsets(horizon);
  std::vector<Vector> rhs;
  for (int j = 0; j < horizon; ++j) {
    if (q_ > 0) {
      Vector r(2 * q_ * t_ini);
      for (int i = 0; i < t_ini; ++i) {
        const int tau = j - t_ini + i;
        Vector s, e;
        if (tau < 0) {
          const Eigen::Index row = last + 1 + tau;
          s = storage_selector_ * m.u.row(row).transpose();
          e = m.y.row(row).head(q_).transpose();
        } else {
          s = su * alpha0[tau];
          e = se * alpha0[tau];
        }
        r.segment(i * q_, q_) = s - stack_.s_past.middleRows(i * q_, q_) * alpha0[j];
        r.segment((t_ini + i) * q_, q_) = e - stack_.e_past.middleRows(i * q_, q_) * alpha0[j];
      }
      rhs.push_back(std::move(r));
    }
    offsets[j].u = stack_.u_future * alpha0[j];
    offsets[j].y = stack_.y_future * alpha0[j];
  }

  WarmStart warm;
  const WarmStart* ws = nullptr;
  if (warm_start_ && last_) {
    const Eigen::Index rows_per_segment = 2 * q_ * t_ini + nu_ + ny_;
    warm.x = shift_blocks(last_->x, 0, nb);
    warm.y = shift_blocks(last_->y, 0, rows_per_segment);
    ws = &warm;
  }
  Plan p = builder_->solve(offsets, rhs, ws);
  last_ = WarmStart{p.decision, builder_->last_duals()};
  return p;
}

Plan DdOpf::solve_single(const Measurement& m, const Matrix& w_forecast) {
  const int t_ini = options_.t_ini;
  const int horizon = options_.horizon;
  Vector w(static_cast<Eigen::Index>(horizon) * nw_);
  for (int k = 0; k < horizon; ++k) w.segment(k * nw_, nw_) = w_forecast.row(k).transpose();
  const Vector alpha0 = subst_.particular(w);
  const Eigen::Index first = m.u.rows() - t_ini;

  std::vector<Vector> rhs;
  if (options_.full_past) {
    Vector past(t_ini * (nu_ + nw_ + ny_));
    for (int i = 0; i < t_ini; ++i) {
      past.segment(i * nu_, nu_) = m.u.row(first + i).transpose();
      past.segment(t_ini * nu_ + i * nw_, nw_) = m.w.row(m.w.rows() - t_ini + i).transpose();
      past.segment(t_ini * (nu_ + nw_) + i * ny_, ny_) = m.y.row(m.y.rows() - t_ini + i).transpose();
    }
    Matrix stacked(past.size(), alpha0.size());
    stacked << stack_.u_past, stack_.w_past, stack_.y_past;
    rhs.push_back(past - stacked * alpha0);
  } else if (q_ > 0) {
    Vector past(2 * q_ * t_ini);
    for (int i = 0; i < t_ini; ++i) {
      past.segment(i * q_, q_) = storage_selector_ * m.u.row(first + i).transpose();
      past.segment((t_ini + i) * q_, q_) = m.y.row(m.y.rows() - t_ini + i).head(q_).transpose();
    }
    Matrix stacked(past.size(), alpha0.size());
    stacked << stack_.s_past, stack_.e_past;
    rhs.push_back(past - stacked * alpha0);
  }

  std::vector<PlanBuilder::Offsets> offsets(horizon);
  for (int k = 0; k < horizon; ++k) {
    offsets[k].u = stack_.u_future.middleRows(static_cast<Eigen::Index>(k) * nu_, nu_) * alpha0;
    offsets[k].y = stack_.y_future.middleRows(static_cast<Eigen::Index>(k) * ny_, ny_) * alpha0;
  }
  const WarmStart* ws = warm_start_ && last_ ? &*last_ : nullptr;
  Plan p = builder_->solve(offsets, rhs, ws);
  last_ = WarmStart{p.decision, builder_->last_duals()};
  return p;
}

}  // namespace ddopf
