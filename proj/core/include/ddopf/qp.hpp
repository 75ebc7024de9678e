#pragma once

#include <Eigen/SparseCholesky>
#include <optional>
#include <string_view>
#include <vector>

#include "ddopf/linalg.hpp"

namespace ddopf {

// minimize 0.5 x'Px + c'x  subject to  lo <= A x <= hi.
// Equalities are rows with lo == hi; bounds may be infinite.
struct QpProblem {
  SparseMatrix p;
  Vector c;
  SparseMatrix a;
  Vector lo;
  Vector hi;

  QpProblem() = default;
  // Symmetrizes p and checks dimensions and lo <= hi.
  QpProblem(SparseMatrix p, Vector c, SparseMatrix a, Vector lo, Vector hi);
  static QpProblem dense(const Matrix& p, const Vector& c, const Matrix& a, const Vector& lo,
                         const Vector& hi);

  // Optional factored form P = J'J + diag(d). Only the KKT factorization uses
  // it; it keeps the system sparse when P has dense low-rank blocks.
  SparseMatrix p_factor;
  Vector p_diag;
  bool has_factor = false;
  // Throws InvalidParameter unless J'J + diag(d) reproduces P.
  void set_factor(SparseMatrix j, Vector d);

  Eigen::Index num_variables() const { return c.size(); }
  Eigen::Index num_constraints() const { return lo.size(); }
  double objective(const Vector& x) const;
};

enum class QpStatus { kOptimal, kMaxIterations, kPrimalInfeasible, kDualInfeasible };

std::string_view to_string(QpStatus status);

struct QpSettings {
  double eps_abs = 1e-8;
  double eps_rel = 1e-8;
  double eps_prim_inf = 1e-5;
  double eps_dual_inf = 1e-5;
  int max_iter = 50000;
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;  // over-relaxation
  bool adaptive_rho = true;
  bool polish = true;
  int scaling_iterations = 10;
  int check_interval = 25;
  double polish_delta = 1e-7;
  int polish_refine_iterations = 25;
};

struct QpSolution {
  Vector x;
  Vector y;  // one multiplier per row; > 0 at an active upper bound
  QpStatus status = QpStatus::kMaxIterations;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double seconds = 0.0;
  bool polished = false;
  // Rows carrying weight in the primal infeasibility certificate.
  std::vector<int> certificate_rows;
};

struct KktResiduals {
  double stationarity = 0.0;     // ||P x + c + A'y||_inf
  double primal = 0.0;           // distance of A x from [lo, hi], inf-norm
  double complementarity = 0.0;  // max_i |y_i| * slack of the bound y_i pushes against
};

KktResiduals kkt_residuals(const QpProblem& problem, const Vector& x, const Vector& y);

struct WarmStart {
  Vector x;
  Vector y;
};

// Keeps the scaling and the factorization of a fixed (P, A) pattern so that
// receding-horizon solves only pay for new linear terms and bounds.
class QpSolver {
 public:
  QpSolver(QpProblem problem, QpSettings settings = {});

  void update_linear_cost(const Vector& c);
  void update_bounds(const Vector& lo, const Vector& hi);
  QpSolution solve(const WarmStart* warm = nullptr);

  const QpProblem& problem() const { return problem_; }
  const QpSettings& settings() const { return settings_; }

 private:
  struct Residuals {
    double prim = 0.0, dual = 0.0;
    double prim_scale = 0.0, dual_scale = 0.0;
  };

  void equilibrate();
  void rescale_vectors();
  void set_rho_vector(double rho);
  void factorize();
  Vector solve_kkt(const Vector& rhs) const;
  Residuals residuals(const Vector& xs, const Vector& zs, const Vector& ys) const;
  bool converged(const Residuals& r) const;
  bool primal_infeasible(const Vector& dy, std::vector<int>* rows) const;
  bool dual_infeasible(const Vector& dx) const;
  std::optional<QpSolution> polish(const Vector& zs, const Vector& ys) const;
  QpSolution finish(const Vector& xs, const Vector& ys, QpStatus status, int iter,
                    const Residuals& r) const;

  QpProblem problem_;
  QpSettings settings_;

  // Scaled data: P_s = cost_scale * D P D, A_s = E A D.
  SparseMatrix p_s_;
  SparseMatrix j_s_;     // scaled factor rows (empty without a factor)
  SparseMatrix p_top_;   // top-left KKT block before sigma: P_s, or diag(d_s)
  SparseMatrix a_s_;
  SparseMatrix at_s_;
  Vector c_s_, lo_s_, hi_s_;
  Vector d_, e_;
  double cost_scale_ = 1.0;

  Vector rho_vec_;
  double rho_ = 0.1;
  // Without a factor: reduced system P + sigma I + A' diag(rho) A. With one:
  // quasi-definite [diag + sigma I, J', A'; J, -I, 0; A, 0, -diag(1/rho)],
  // lower triangle. The pattern is analyzed once.
  SparseMatrix kkt_matrix_;
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower> kkt_;
};

QpSolution solve(const QpProblem& problem, const QpSettings& settings = {},
                 const WarmStart* warm = nullptr);

}  // namespace ddopf
