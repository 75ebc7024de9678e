#include "ddopf/qp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "ddopf/errors.hpp"

namespace ddopf {

namespace {

constexpr double kRhoMin = 1e-6;
constexpr double kRhoMax = 1e6;
constexpr double kRhoEqualityFactor = 1e3;
constexpr double kTiny = 1e-30;
constexpr int kKktRefineSteps = 3;

double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

void scale_in_place(SparseMatrix& m, const Vector& left, const Vector& right) {
  for (int k = 0; k < m.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
      it.valueRef() *= left(it.row()) * right(it.col());
    }
  }
}

SparseMatrix identity(Eigen::Index n, double value) {
  SparseMatrix i(n, n);
  i.reserve(Eigen::VectorXi::Constant(n, 1));
  for (Eigen::Index k = 0; k < n; ++k) i.insert(k, k) = value;
  i.makeCompressed();
  return i;
}

// Lower triangle of [T + top I, J', A'; J, -I, 0; A, 0, -diag(bottom)].
// J may have no rows.
SparseMatrix quasi_definite_kkt(const SparseMatrix& t, const SparseMatrix& j,
                                const SparseMatrix& a, double top, const Vector& bottom) {
  const Eigen::Index n = t.rows();
  const Eigen::Index nj = j.rows();
  const Eigen::Index m = a.rows();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(t.nonZeros() + j.nonZeros() + a.nonZeros() + n + nj + m));
  for (int k = 0; k < t.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(t, k); it; ++it) {
      if (it.row() >= it.col()) trips.emplace_back(it.row(), it.col(), it.value());
    }
  }
  for (Eigen::Index k = 0; k < n; ++k) trips.emplace_back(k, k, top);
  for (int k = 0; k < j.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(j, k); it; ++it) {
      trips.emplace_back(n + it.row(), it.col(), it.value());
    }
  }
  for (Eigen::Index i = 0; i < nj; ++i) trips.emplace_back(n + i, n + i, -1.0);
  for (int k = 0; k < a.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(a, k); it; ++it) {
      trips.emplace_back(n + nj + it.row(), it.col(), it.value());
    }
  }
  for (Eigen::Index i = 0; i < m; ++i) trips.emplace_back(n + nj + i, n + nj + i, -bottom(i));
  SparseMatrix kkt(n + nj + m, n + nj + m);
  kkt.setFromTriplets(trips.begin(), trips.end());
  kkt.makeCompressed();
  return kkt;
}

bool is_equality(double lo, double hi) {
  return std::isfinite(lo) && std::isfinite(hi) && hi - lo <= 1e-12 * std::max(1.0, std::abs(lo));
}

}  // namespace

QpProblem::QpProblem(SparseMatrix p_in, Vector c_in, SparseMatrix a_in, Vector lo_in, Vector hi_in)
    : c(std::move(c_in)), lo(std::move(lo_in)), hi(std::move(hi_in)) {
  const Eigen::Index n = c.size();
  if (p_in.rows() != n || p_in.cols() != n) throw DimensionMismatch("QP: P must be n x n");
  if (a_in.cols() != n) throw DimensionMismatch("QP: A must have n columns");
  if (lo.size() != a_in.rows() || hi.size() != a_in.rows()) {
    throw DimensionMismatch("QP: bounds must have one entry per row of A");
  }
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    if (std::isnan(lo(i)) || std::isnan(hi(i)) || lo(i) > hi(i)) {
      throw InvalidParameter("QP: row " + std::to_string(i) + " has lo > hi");
    }
  }
  SparseMatrix pt = p_in.transpose();
  p = 0.5 * (p_in + pt);
  p.prune(0.0);
  p.makeCompressed();
  a = std::move(a_in);
  a.makeCompressed();
}

void QpProblem::set_factor(SparseMatrix j, Vector d) {
  const Eigen::Index n = num_variables();
  if (j.cols() != n || d.size() != n) throw DimensionMismatch("QP: factor must have n columns");
  SparseMatrix jt = j.transpose();
  SparseMatrix rebuilt = jt * j;
  for (Eigen::Index k = 0; k < n; ++k) rebuilt.coeffRef(k, k) += d(k);
  const SparseMatrix diff = rebuilt - p;
  double scale = 1.0, err = 0.0;
  for (Eigen::Index k = 0; k < p.nonZeros(); ++k) scale = std::max(scale, std::abs(p.valuePtr()[k]));
  for (Eigen::Index k = 0; k < diff.nonZeros(); ++k) err = std::max(err, std::abs(diff.valuePtr()[k]));
  if (err > 1e-9 * scale) throw InvalidParameter("QP: factor does not reproduce P");
  p_factor = std::move(j);
  p_factor.makeCompressed();
  p_diag = std::move(d);
  has_factor = true;
}

QpProblem QpProblem::dense(const Matrix& p, const Vector& c, const Matrix& a, const Vector& lo,
                           const Vector& hi) {
  return QpProblem(p.sparseView(), c, a.sparseView(), lo, hi);
}

double QpProblem::objective(const Vector& x) const { return 0.5 * x.dot(p * x) + c.dot(x); }

std::string_view to_string(QpStatus status) {
  switch (status) {
    case QpStatus::kOptimal: return "optimal";
    case QpStatus::kMaxIterations: return "max_iterations";
    case QpStatus::kPrimalInfeasible: return "primal_infeasible";
    case QpStatus::kDualInfeasible: return "dual_infeasible";
  }
  return "unknown";
}

KktResiduals kkt_residuals(const QpProblem& problem, const Vector& x, const Vector& y) {
  KktResiduals r;
  const Vector ax = problem.a * x;
  r.stationarity = inf_norm(problem.p * x + problem.c + problem.a.transpose() * y);
  const Vector proj = ax.cwiseMax(problem.lo).cwiseMin(problem.hi);
  r.primal = inf_norm(ax - proj);
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    double slack = 0.0;
    if (y(i) > 0.0) slack = problem.hi(i) - ax(i);
    else if (y(i) < 0.0) slack = ax(i) - problem.lo(i);
    else continue;
    r.complementarity = std::max(r.complementarity, std::abs(y(i)) * std::abs(slack));
  }
  return r;
}

QpSolver::QpSolver(QpProblem problem, QpSettings settings)
    : problem_(std::move(problem)), settings_(settings) {
  if (settings_.max_iter < 1 || settings_.check_interval < 1) {
    throw InvalidParameter("QP: max_iter and check_interval must be positive");
  }
  if (settings_.rho <= 0.0 || settings_.sigma <= 0.0 || settings_.alpha <= 0.0 ||
      settings_.alpha >= 2.0) {
    throw InvalidParameter("QP: rho, sigma must be positive and alpha in (0, 2)");
  }
  equilibrate();
  rescale_vectors();
  rho_ = settings_.rho;
  set_rho_vector(rho_);
  factorize();
}

// Ruiz equilibration of the KKT matrix followed by a cost normalization.
void QpSolver::equilibrate() {
  const Eigen::Index n = problem_.num_variables();
  const Eigen::Index m = problem_.num_constraints();
  p_s_ = problem_.p;
  a_s_ = problem_.a;
  d_ = Vector::Ones(n);
  e_ = Vector::Ones(m);
  cost_scale_ = 1.0;
  Vector c = problem_.c;

  auto to_scaling = [](double norm) {
    if (norm < 1e-4) norm = 1.0;
    norm = std::min(norm, 1e4);
    return 1.0 / std::sqrt(norm);
  };

  for (int it = 0; it < settings_.scaling_iterations; ++it) {
    Vector dn = Vector::Zero(n);
    Vector en = Vector::Zero(m);
    for (int k = 0; k < p_s_.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator i(p_s_, k); i; ++i) {
        dn(i.col()) = std::max(dn(i.col()), std::abs(i.value()));
      }
    }
    for (int k = 0; k < a_s_.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator i(a_s_, k); i; ++i) {
        const double v = std::abs(i.value());
        dn(i.col()) = std::max(dn(i.col()), v);
        en(i.row()) = std::max(en(i.row()), v);
      }
    }
    const Vector dd = dn.unaryExpr(to_scaling);
    const Vector de = en.unaryExpr(to_scaling);
    scale_in_place(p_s_, dd, dd);
    scale_in_place(a_s_, de, dd);
    c = c.cwiseProduct(dd);
    d_ = d_.cwiseProduct(dd);
    e_ = e_.cwiseProduct(de);

    double mean_col = 0.0;
    if (n > 0) {
      Vector cn = Vector::Zero(n);
      for (int k = 0; k < p_s_.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator i(p_s_, k); i; ++i) {
          cn(i.col()) = std::max(cn(i.col()), std::abs(i.value()));
        }
      }
      mean_col = cn.mean();
    }
    double gamma = std::max(mean_col, inf_norm(c));
    if (gamma < 1e-4) gamma = 1.0;
    gamma = 1.0 / std::min(gamma, 1e4);
    p_s_ *= gamma;
    c *= gamma;
    cost_scale_ *= gamma;
  }
  p_s_.makeCompressed();
  a_s_.makeCompressed();
  at_s_ = a_s_.transpose();
  at_s_.makeCompressed();
  if (problem_.has_factor) {
    j_s_ = problem_.p_factor;
    scale_in_place(j_s_, Vector::Constant(j_s_.rows(), std::sqrt(cost_scale_)), d_);
    const Vector diag = cost_scale_ * problem_.p_diag.cwiseProduct(d_).cwiseProduct(d_);
    p_top_ = SparseMatrix(n, n);
    p_top_.reserve(Eigen::VectorXi::Constant(n, 1));
    for (Eigen::Index k = 0; k < n; ++k) p_top_.insert(k, k) = diag(k);
    p_top_.makeCompressed();
  } else {
    j_s_ = SparseMatrix(0, n);
    p_top_ = p_s_;
  }
}

void QpSolver::rescale_vectors() {
  c_s_ = cost_scale_ * problem_.c.cwiseProduct(d_);
  lo_s_ = problem_.lo.cwiseProduct(e_);
  hi_s_ = problem_.hi.cwiseProduct(e_);
}

void QpSolver::set_rho_vector(double rho) {
  const Eigen::Index m = problem_.num_constraints();
  rho_vec_.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double lo = problem_.lo(i), hi = problem_.hi(i);
    if (!std::isfinite(lo) && !std::isfinite(hi)) rho_vec_(i) = kRhoMin;
    else if (is_equality(lo, hi)) rho_vec_(i) = kRhoEqualityFactor * rho;
    else rho_vec_(i) = rho;
  }
}

void QpSolver::factorize() {
  const Eigen::Index n = problem_.num_variables();
  const bool first = kkt_matrix_.rows() == 0;
  if (!problem_.has_factor) {
    // Reduced system P + sigma I + A' diag(rho) A; its pattern does not
    // depend on rho.
    const SparseMatrix weighted = at_s_ * rho_vec_.asDiagonal();
    kkt_matrix_ = p_s_ + identity(n, settings_.sigma) + SparseMatrix(weighted * a_s_);
  } else if (first) {
    kkt_matrix_ =
        quasi_definite_kkt(p_top_, j_s_, a_s_, settings_.sigma, rho_vec_.cwiseInverse());
  } else {
    // Each constraint column of the lower triangle holds only its diagonal.
    const Eigen::Index offset = n + j_s_.rows();
    for (Eigen::Index i = 0; i < rho_vec_.size(); ++i) {
      kkt_matrix_.valuePtr()[kkt_matrix_.outerIndexPtr()[offset + i]] = -1.0 / rho_vec_(i);
    }
  }
  if (first) kkt_.analyzePattern(kkt_matrix_);
  kkt_.factorize(kkt_matrix_);
  if (kkt_.info() != Eigen::Success) throw NumericalError("QP: KKT factorization failed");
}

// LDL' solve; the quasi-definite form gets iterative refinement since the
// plain solve can fall short of the accuracy the ADMM tolerances need.
Vector QpSolver::solve_kkt(const Vector& rhs) const {
  Vector sol = kkt_.solve(rhs);
  if (!problem_.has_factor) return sol;
  const double target = 1e-13 * std::max(1.0, inf_norm(rhs));
  for (int it = 0; it < kKktRefineSteps; ++it) {
    const Vector res = rhs - kkt_matrix_.selfadjointView<Eigen::Lower>() * sol;
    if (inf_norm(res) <= target) break;
    sol += kkt_.solve(res);
  }
  return sol;
}

void QpSolver::update_linear_cost(const Vector& c) {
  if (c.size() != problem_.num_variables()) throw DimensionMismatch("QP: cost size changed");
  problem_.c = c;
  c_s_ = cost_scale_ * c.cwiseProduct(d_);
}

void QpSolver::update_bounds(const Vector& lo, const Vector& hi) {
  if (lo.size() != problem_.num_constraints() || hi.size() != problem_.num_constraints()) {
    throw DimensionMismatch("QP: bound size changed");
  }
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    if (std::isnan(lo(i)) || std::isnan(hi(i)) || lo(i) > hi(i)) {
      throw InvalidParameter("QP: row " + std::to_string(i) + " has lo > hi");
    }
  }
  problem_.lo = lo;
  problem_.hi = hi;
  lo_s_ = lo.cwiseProduct(e_);
  hi_s_ = hi.cwiseProduct(e_);
  const Vector old = rho_vec_;
  set_rho_vector(rho_);
  if (old != rho_vec_) factorize();
}

QpSolver::Residuals QpSolver::residuals(const Vector& xs, const Vector& zs,
                                        const Vector& ys) const {
  Residuals r;
  const Vector einv = e_.cwiseInverse();
  const Vector dinv = d_.cwiseInverse();
  const Vector ax = a_s_ * xs;
  r.prim = inf_norm((ax - zs).cwiseProduct(einv));
  r.prim_scale = std::max(inf_norm(ax.cwiseProduct(einv)), inf_norm(zs.cwiseProduct(einv)));
  const Vector px = p_s_ * xs;
  const Vector aty = at_s_ * ys;
  r.dual = inf_norm((px + c_s_ + aty).cwiseProduct(dinv)) / cost_scale_;
  r.dual_scale = std::max({inf_norm(px.cwiseProduct(dinv)), inf_norm(aty.cwiseProduct(dinv)),
                           inf_norm(c_s_.cwiseProduct(dinv))}) /
                 cost_scale_;
  return r;
}

bool QpSolver::converged(const Residuals& r) const {
  return r.prim <= settings_.eps_abs + settings_.eps_rel * r.prim_scale &&
         r.dual <= settings_.eps_abs + settings_.eps_rel * r.dual_scale;
}

bool QpSolver::primal_infeasible(const Vector& dy, std::vector<int>* rows) const {
  const Vector delta = dy.cwiseProduct(e_);
  const double norm = inf_norm(delta);
  if (norm <= kTiny) return false;
  const double eps = settings_.eps_prim_inf * norm;
  if (inf_norm((at_s_ * dy).cwiseQuotient(d_)) > eps) return false;
  double support = 0.0;
  for (Eigen::Index i = 0; i < delta.size(); ++i) {
    if (delta(i) > 0.0) {
      if (!std::isfinite(problem_.hi(i))) return false;
      support += problem_.hi(i) * delta(i);
    } else if (delta(i) < 0.0) {
      if (!std::isfinite(problem_.lo(i))) return false;
      support += problem_.lo(i) * delta(i);
    }
  }
  if (support >= -eps) return false;
  if (rows) {
    rows->clear();
    for (Eigen::Index i = 0; i < delta.size(); ++i) {
      if (std::abs(delta(i)) > 1e-6 * norm) rows->push_back(static_cast<int>(i));
    }
  }
  return true;
}

bool QpSolver::dual_infeasible(const Vector& dx) const {
  const Vector delta = dx.cwiseProduct(d_);
  const double norm = inf_norm(delta);
  if (norm <= kTiny) return false;
  const double eps = settings_.eps_dual_inf * norm;
  if (c_s_.dot(dx) / cost_scale_ >= -eps) return false;
  if (inf_norm((p_s_ * dx).cwiseQuotient(d_)) / cost_scale_ > eps) return false;
  const Vector ad = (a_s_ * dx).cwiseQuotient(e_);
  for (Eigen::Index i = 0; i < ad.size(); ++i) {
    if (std::isfinite(problem_.hi(i)) && ad(i) > eps) return false;
    if (std::isfinite(problem_.lo(i)) && ad(i) < -eps) return false;
  }
  return true;
}

// Solves the equality-constrained problem on the guessed active set with a
// regularized KKT system and iterative refinement.
std::optional<QpSolution> QpSolver::polish(const Vector& zs, const Vector& ys) const {
  const Eigen::Index n = problem_.num_variables();
  const Eigen::Index m = problem_.num_constraints();
  std::vector<int> index(m, -1);
  std::vector<int> kind;  // -1 lower, +1 upper, 0 equality
  std::vector<double> rhs_b;
  for (Eigen::Index i = 0; i < m; ++i) {
    int k = 2;
    if (is_equality(problem_.lo(i), problem_.hi(i))) k = 0;
    else if (zs(i) - lo_s_(i) < -ys(i)) k = -1;
    else if (hi_s_(i) - zs(i) < ys(i)) k = 1;
    if (k == 2) continue;
    index[i] = static_cast<int>(kind.size());
    kind.push_back(k);
    rhs_b.push_back(k == 1 ? hi_s_(i) : lo_s_(i));
  }
  const Eigen::Index na = static_cast<Eigen::Index>(kind.size());
  std::vector<Eigen::Triplet<double>> trips;
  for (int k = 0; k < a_s_.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(a_s_, k); it; ++it) {
      const int r = index[it.row()];
      if (r >= 0) trips.emplace_back(r, it.col(), it.value());
    }
  }
  SparseMatrix a_act(na, n);
  a_act.setFromTriplets(trips.begin(), trips.end());
  const SparseMatrix a_act_t = a_act.transpose();
  const double delta = settings_.polish_delta;
  // Regularized KKT [P + delta I, A'; A, -delta I], solved in reduced form
  // unless P comes factored.
  const bool factored = problem_.has_factor;
  const Eigen::Index nj = j_s_.rows();
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower> ldlt(
      factored ? quasi_definite_kkt(p_top_, j_s_, a_act, delta, Vector::Constant(na, delta))
               : SparseMatrix(p_s_ + identity(n, delta) + SparseMatrix(a_act_t * a_act) / delta));
  if (ldlt.info() != Eigen::Success) return std::nullopt;

  const Vector r1 = -c_s_;
  const Vector r2 = Eigen::Map<const Vector>(rhs_b.data(), na);
  Vector x = Vector::Zero(n);
  Vector y = Vector::Zero(na);
  for (int it = 0; it <= settings_.polish_refine_iterations; ++it) {
    const Vector e1 = r1 - (p_s_ * x + a_act_t * y);
    const Vector e2 = r2 - a_act * x;
    if (it > 0 && std::max(inf_norm(e1), inf_norm(e2)) <= 1e-13 * std::max(1.0, inf_norm(r1))) {
      break;
    }
    if (factored) {
      Vector e = Vector::Zero(n + nj + na);
      e.head(n) = e1;
      e.tail(na) = e2;
      const Vector d = ldlt.solve(e);
      x += d.head(n);
      y += d.tail(na);
    } else {
      const Vector dx = ldlt.solve(e1 + a_act_t * e2 / delta);
      x += dx;
      y += (a_act * dx - e2) / delta;
    }
  }
  if (!x.allFinite() || !y.allFinite()) return std::nullopt;

  Vector y_full = Vector::Zero(m);
  const double sign_tol = 1e-9 * std::max(1.0, inf_norm(y));
  for (Eigen::Index i = 0; i < m; ++i) {
    const int r = index[i];
    if (r < 0) continue;
    if (kind[r] == -1 && y(r) > sign_tol) return std::nullopt;
    if (kind[r] == 1 && y(r) < -sign_tol) return std::nullopt;
    y_full(i) = y(r);
  }
  const Vector z = (a_s_ * x).cwiseMax(lo_s_).cwiseMin(hi_s_);
  const Residuals r = residuals(x, z, y_full);
  if (!converged(r)) return std::nullopt;
  QpSolution sol = finish(x, y_full, QpStatus::kOptimal, 0, r);
  sol.polished = true;
  return sol;
}

QpSolution QpSolver::finish(const Vector& xs, const Vector& ys, QpStatus status, int iter,
                            const Residuals& r) const {
  QpSolution sol;
  sol.x = xs.cwiseProduct(d_);
  sol.y = ys.cwiseProduct(e_) / cost_scale_;
  sol.status = status;
  sol.iterations = iter;
  sol.primal_residual = r.prim;
  sol.dual_residual = r.dual;
  return sol;
}

QpSolution QpSolver::solve(const WarmStart* warm) {
  const auto start = std::chrono::steady_clock::now();
  const Eigen::Index n = problem_.num_variables();
  const Eigen::Index m = problem_.num_constraints();
  const double sigma = settings_.sigma;
  const double alpha = settings_.alpha;

  Vector x = Vector::Zero(n);
  Vector y = Vector::Zero(m);
  if (warm) {
    if (warm->x.size() == n) x = warm->x.cwiseQuotient(d_);
    if (warm->y.size() == m) y = cost_scale_ * warm->y.cwiseQuotient(e_);
  }
  Vector z = (a_s_ * x).cwiseMax(lo_s_).cwiseMin(hi_s_);

  auto stamp = [&](QpSolution sol) {
    sol.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return sol;
  };
  auto signature = [&]() {
    std::vector<signed char> sig(m, 0);
    for (Eigen::Index i = 0; i < m; ++i) {
      if (z(i) - lo_s_(i) < -y(i)) sig[i] = -1;
      else if (hi_s_(i) - z(i) < y(i)) sig[i] = 1;
    }
    return sig;
  };

  Vector x_prev, z_prev, y_prev, xt, z_relax;
  Vector rhs = Vector::Zero(problem_.has_factor ? n + j_s_.rows() + m : 0);
  std::vector<signed char> last_sig, tried_sig;
  Residuals r;
  int iter = 0;
  for (iter = 1; iter <= settings_.max_iter; ++iter) {
    x_prev = x;
    z_prev = z;
    y_prev = y;
    if (problem_.has_factor) {
      rhs.head(n) = sigma * x - c_s_;
      rhs.tail(m) = z - y.cwiseQuotient(rho_vec_);
      xt = solve_kkt(rhs).head(n);
    } else {
      xt = solve_kkt(sigma * x - c_s_ + at_s_ * (rho_vec_.cwiseProduct(z) - y));
    }
    z_relax = alpha * (a_s_ * xt) + (1.0 - alpha) * z_prev;
    x = alpha * xt + (1.0 - alpha) * x_prev;
    z = (z_relax + y.cwiseQuotient(rho_vec_)).cwiseMax(lo_s_).cwiseMin(hi_s_);
    y += rho_vec_.cwiseProduct(z_relax - z);

    if (iter % settings_.check_interval != 0 && iter != settings_.max_iter) continue;

    r = residuals(x, z, y);
    if (converged(r)) {
      if (settings_.polish) {
        if (auto p = polish(z, y)) {
          p->iterations = iter;
          return stamp(std::move(*p));
        }
      }
      return stamp(finish(x, y, QpStatus::kOptimal, iter, r));
    }
    std::vector<int> rows;
    if (primal_infeasible(y - y_prev, &rows)) {
      QpSolution sol = finish(x, y - y_prev, QpStatus::kPrimalInfeasible, iter, r);
      sol.certificate_rows = std::move(rows);
      return stamp(std::move(sol));
    }
    if (dual_infeasible(x - x_prev)) {
      return stamp(finish(x - x_prev, y, QpStatus::kDualInfeasible, iter, r));
    }
    if (settings_.polish) {
      auto sig = signature();
      if (sig == last_sig && sig != tried_sig) {
        tried_sig = sig;
        if (auto p = polish(z, y)) {
          p->iterations = iter;
          return stamp(std::move(*p));
        }
      }
      last_sig = std::move(sig);
    }
    if (settings_.adaptive_rho) {
      const double pn = r.prim / std::max(r.prim_scale, kTiny);
      const double dn = r.dual / std::max(r.dual_scale, kTiny);
      const double ratio = std::sqrt(std::max(pn, kTiny) / std::max(dn, kTiny));
      const double next = std::clamp(rho_ * ratio, kRhoMin, kRhoMax);
      if (next > 5.0 * rho_ || next < 0.2 * rho_) {
        rho_ = next;
        set_rho_vector(rho_);
        factorize();
      }
    }
  }
  return stamp(finish(x, y, QpStatus::kMaxIterations, settings_.max_iter, r));
}

QpSolution solve(const QpProblem& problem, const QpSettings& settings, const WarmStart* warm) {
  QpSolver solver(problem, settings);
  return solver.solve(warm);
}

}  // namespace ddopf
