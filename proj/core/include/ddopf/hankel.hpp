#pragma once

#include <optional>
#include <vector>

#include "ddopf/linalg.hpp"
#include "ddopf/plant.hpp"

namespace ddopf {

// Block-Hankel matrix of a sequence stored one sample per row (T x n_v):
// depth block rows, T - depth + 1 columns, column j = (v(j), ..., v(j+depth-1)).
Matrix hankel_matrix(const Matrix& seq, int depth);

struct Excitation {
  bool exciting = false;
  int rank = 0;
  int required = 0;  // n_v * order
};

// Throws InsufficientData when the sequence is shorter than order.
Excitation is_persistently_exciting(const Matrix& seq, int order,
                                    double rel_tol = kDefaultRankTolerance);

// Minimum data length for persistency of excitation of order
// horizon + 2(q + s - 1) on the joint (u, w) signal.
int min_data_length(int num_inputs, int num_disturbances, int horizon, int q, int s = 1);

// Dimension of the input-disturbance-output behavior over 2 * t_ini steps.
int behavior_dimension(int t_ini, int num_inputs, int num_disturbances, int q);

struct PastFuture {
  Matrix u_past, w_past, y_past;
  Matrix u_future, w_future, y_future;
};

PastFuture split_past_future(const TrajectoryLog& data, int t_ini, int horizon, int s = 1);

enum class PePolicy { kStrict, kTruncated };

struct TruncationRecord {
  int original_rank = 0;
  int target_rank = 0;
  Vector discarded;  // singular values dropped by the truncation
  bool applied = false;
};

// Past blocks hold only storage powers and charges; future blocks hold the
// full u, w and y. With full_past the complete past blocks are kept as well.
struct HankelStack {
  Matrix s_past, e_past;
  Matrix u_future, w_future, y_future;
  // Optional complete past blocks (empty unless built with full_past).
  Matrix u_past, w_past, y_past;

  int t_ini = 1;
  int horizon = 1;
  int storages = 0;
  bool full_past = false;
  Excitation excitation;  // joint (u, w) check at construction
  TruncationRecord truncation;

  Eigen::Index columns() const { return u_future.cols(); }
  Eigen::Index rows() const;
  // All blocks stacked in the order s_P, e_P, [u_P, w_P, y_P,] u_F, w_F, y_F.
  Matrix stacked() const;
};

struct StackOptions {
  int t_ini = 1;
  int horizon = 1;
  PePolicy policy = PePolicy::kTruncated;
  bool full_past = false;
  double rank_tolerance = kDefaultRankTolerance;
};

// storage_selector: |S| x n_u, picks storage powers out of u. The charge block
// is the first |S| entries of y.
HankelStack build_simplified_stack(const TrajectoryLog& data, const Matrix& storage_selector,
                                   const StackOptions& options);

// Replaces the columns by U_r * Sigma_r of the rank-r approximation of the
// stacked matrix. A target above the column count leaves the stack as is.
HankelStack truncate_rank(const HankelStack& stack, int target_rank);

// Least-squares coefficient residual: min_a ||stack * a - target|| / max(1, ||target||).
double span_residual(const Matrix& stack, const Vector& target);

class NullspaceSubstitution {
 public:
  NullspaceSubstitution() = default;
  explicit NullspaceSubstitution(const Matrix& w_future,
                                 double rel_tol = kDefaultRankTolerance,
                                 double range_tol = 1e-6);

  const Matrix& pseudo_inverse() const { return pinv_; }
  const Matrix& basis() const { return basis_; }
  Eigen::Index dimension() const { return basis_.cols(); }

  // alpha_0 = W_F^+ w; throws InfeasibleForecast when w is outside range(W_F).
  Vector particular(const Vector& forecast) const;

 private:
  Matrix w_future_;
  Matrix pinv_;
  Matrix basis_;
  double range_tol_ = 1e-6;
};

NullspaceSubstitution nullspace_substitution(const Matrix& w_future);

}  // namespace ddopf
