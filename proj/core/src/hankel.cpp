#include "ddopf/hankel.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <string>

#include "ddopf/errors.hpp"
#include "ddopf/log.hpp"

namespace ddopf {

Matrix hankel_matrix(const Matrix& seq, int depth) {
  const Eigen::Index t = seq.rows();
  const Eigen::Index nv = seq.cols();
  if (depth < 1) throw InvalidParameter("Hankel depth must be at least 1");
  if (t < depth) {
    throw InsufficientData("Hankel matrix of depth " + std::to_string(depth) + " needs at least " +
                           std::to_string(depth) + " samples, got " + std::to_string(t));
  }
  const Eigen::Index cols = t - depth + 1;
  Matrix h(depth * nv, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (int i = 0; i < depth; ++i) {
      h.block(i * nv, j, nv, 1) = seq.row(j + i).transpose();
    }
  }
  return h;
}

Excitation is_persistently_exciting(const Matrix& seq, int order, double rel_tol) {
  Excitation out;
  out.required = static_cast<int>(seq.cols()) * order;
  const Matrix h = hankel_matrix(seq, order);
  if (h.cols() < out.required) {
    // Too few columns for full row rank.
    out.rank = numeric_rank(h, rel_tol);
    out.exciting = false;
    return out;
  }
  out.rank = numeric_rank(h, rel_tol);
  out.exciting = out.rank == out.required;
  return out;
}

int min_data_length(int num_inputs, int num_disturbances, int horizon, int q, int s) {
  return (num_inputs + num_disturbances + 1) * (horizon + 2 * (q + s - 1)) - 1;
}

int behavior_dimension(int t_ini, int num_inputs, int num_disturbances, int q) {
  return 2 * t_ini * (num_inputs + num_disturbances) + q;
}

PastFuture split_past_future(const TrajectoryLog& data, int t_ini, int horizon, int s) {
  if (t_ini < 0 || horizon < 1 || s < 1) throw InvalidParameter("split_past_future: bad sizes");
  const Eigen::Index usable = data.length() - s + 1;
  const int depth = t_ini + horizon;
  if (usable < depth) {
    throw InsufficientData("need at least " + std::to_string(depth + s - 1) +
                           " samples for past/future split, got " +
                           std::to_string(data.length()));
  }
  auto split = [&](const Matrix& sig, Matrix& past, Matrix& future) {
    const Matrix h = hankel_matrix(sig.topRows(usable), depth);
    const Eigen::Index nv = sig.cols();
    past = h.topRows(t_ini * nv);
    future = h.bottomRows(horizon * nv);
  };
  PastFuture pf;
  split(data.u, pf.u_past, pf.u_future);
  split(data.w, pf.w_past, pf.w_future);
  split(data.y, pf.y_past, pf.y_future);
  return pf;
}

Eigen::Index HankelStack::rows() const {
  return s_past.rows() + e_past.rows() + u_past.rows() + w_past.rows() + y_past.rows() +
         u_future.rows() + w_future.rows() + y_future.rows();
}

Matrix HankelStack::stacked() const {
  return vstack({&s_past, &e_past, &u_past, &w_past, &y_past, &u_future, &w_future, &y_future});
}

HankelStack build_simplified_stack(const TrajectoryLog& data, const Matrix& storage_selector,
                                   const StackOptions& options) {
  const int nu = static_cast<int>(data.u.cols());
  const int nw = static_cast<int>(data.w.cols());
  const int q = static_cast<int>(storage_selector.rows());
  if (storage_selector.cols() != nu) {
    throw DimensionMismatch("storage selector width does not match input dimension");
  }
  if (data.y.cols() < q) throw DimensionMismatch("output has fewer entries than storages");

  HankelStack stack;
  stack.t_ini = options.t_ini;
  stack.horizon = options.horizon;
  stack.storages = q;
  stack.full_past = options.full_past;

  // Joint (u, w) excitation of order t_ini + horizon + q + s - 1 with s = 1.
  const int order = options.t_ini + options.horizon + q;
  const int min_length = (nu + nw + 1) * order - 1;
  Matrix joint(data.length(), nu + nw);
  joint << data.u, data.w;
  if (options.policy == PePolicy::kStrict && data.length() < min_length) {
    throw PersistencyError("strict PE mode needs at least " + std::to_string(min_length) +
                           " samples, got " + std::to_string(data.length()));
  }
  if (data.length() >= order) {
    stack.excitation = is_persistently_exciting(joint, order, options.rank_tolerance);
  } else {
    stack.excitation.required = (nu + nw) * order;
  }
  if (!stack.excitation.exciting) {
    const std::string msg = "offline data not persistently exciting of order " +
                            std::to_string(order) + " (rank " +
                            std::to_string(stack.excitation.rank) + " of " +
                            std::to_string(stack.excitation.required) + ")";
    if (options.policy == PePolicy::kStrict) throw PersistencyError(msg);
    log::info(msg + "; continuing in truncated mode");
  }

  const PastFuture pf = split_past_future(data, options.t_ini, options.horizon, 1);
  const Eigen::Index m = pf.u_future.cols();
  stack.s_past.resize(static_cast<Eigen::Index>(options.t_ini) * q, m);
  stack.e_past.resize(static_cast<Eigen::Index>(options.t_ini) * q, m);
  const Eigen::Index ny = data.y.cols();
  for (int i = 0; i < options.t_ini; ++i) {
    stack.s_past.middleRows(i * q, q) = storage_selector * pf.u_past.middleRows(i * nu, nu);
    stack.e_past.middleRows(i * q, q) = pf.y_past.middleRows(i * ny, q);
  }
  stack.u_future = pf.u_future;
  stack.w_future = pf.w_future;
  stack.y_future = pf.y_future;
  if (options.full_past) {
    stack.u_past = pf.u_past;
    stack.w_past = pf.w_past;
    stack.y_past = pf.y_past;
  } else {
    stack.u_past.resize(0, m);
    stack.w_past.resize(0, m);
    stack.y_past.resize(0, m);
  }
  stack.truncation.original_rank = 0;
  return stack;
}

HankelStack truncate_rank(const HankelStack& stack, int target_rank) {
  if (target_rank < 1) throw InvalidParameter("truncation target must be at least 1");
  HankelStack out = stack;
  const Matrix h = stack.stacked();
  if (target_rank >= h.cols()) {
    log::warn("truncation target " + std::to_string(target_rank) + " is not below the column count " +
              std::to_string(h.cols()) + "; stack left unchanged");
    out.truncation.original_rank = numeric_rank(h);
    out.truncation.target_rank = target_rank;
    out.truncation.applied = false;
    return out;
  }
  Eigen::BDCSVD<Matrix> svd(h, Eigen::ComputeThinU);
  const Vector& sv = svd.singularValues();
  int rank = 0;
  while (rank < sv.size() && sv(rank) > kDefaultRankTolerance * sv(0)) ++rank;
  out.truncation.original_rank = rank;
  out.truncation.target_rank = target_rank;
  out.truncation.discarded = sv.tail(sv.size() - target_rank);
  out.truncation.applied = true;

  const Matrix compressed = svd.matrixU().leftCols(target_rank) * sv.head(target_rank).asDiagonal();
  Eigen::Index at = 0;
  auto take = [&](Matrix& block) {
    const Eigen::Index r = block.rows();
    block = compressed.middleRows(at, r);
    at += r;
  };
  take(out.s_past);
  take(out.e_past);
  take(out.u_past);
  take(out.w_past);
  take(out.y_past);
  take(out.u_future);
  take(out.w_future);
  take(out.y_future);
  return out;
}

double span_residual(const Matrix& stack, const Vector& target) {
  const Vector alpha = stack.completeOrthogonalDecomposition().solve(target);
  return (stack * alpha - target).norm() / std::max(1.0, target.norm());
}

NullspaceSubstitution::NullspaceSubstitution(const Matrix& w_future, double rel_tol,
                                             double range_tol)
    : w_future_(w_future), range_tol_(range_tol) {
  if (w_future.size() > 0 && w_future.cwiseAbs().maxCoeff() == 0.0) {
    throw InvalidParameter("nullspace substitution needs a nonzero W_F");
  }
  pinv_ = ddopf::pseudo_inverse(w_future, rel_tol);
  basis_ = null_space(w_future, rel_tol);
}

Vector NullspaceSubstitution::particular(const Vector& forecast) const {
  if (forecast.size() != w_future_.rows()) {
    throw DimensionMismatch("forecast length does not match W_F");
  }
  Vector alpha = pinv_ * forecast;
  const double residual = (w_future_ * alpha - forecast).norm() / std::max(1.0, forecast.norm());
  if (residual > range_tol_) {
    throw InfeasibleForecast("demand forecast lies outside the range of W_F (relative residual " +
                                 std::to_string(residual) + ")",
                             residual);
  }
  return alpha;
}

NullspaceSubstitution nullspace_substitution(const Matrix& w_future) {
  return NullspaceSubstitution(w_future);
}

}  // namespace ddopf
