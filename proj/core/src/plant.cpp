#include "ddopf/plant.hpp"

#include <Eigen/Eigenvalues>
#include <complex>

#include "ddopf/case_io.hpp"
#include "ddopf/errors.hpp"

namespace ddopf {

int nilpotency_index(const Matrix& n) {
  if (n.rows() != n.cols()) throw DimensionMismatch("nilpotency_index: N must be square");
  if (n.rows() == 0) return 1;
  Matrix power = n;
  for (int s = 1; s <= n.rows(); ++s) {
    if (power.cwiseAbs().maxCoeff() == 0.0) return s;
    power = power * n;
  }
  throw InvalidParameter("matrix is not nilpotent");
}

QuasiWeierstrass assemble_descriptor(const ReducedModel& model, double delta_hours) {
  const int q = model.num_storages();
  const int r = static_cast<int>(model.reduced_susceptance.rows());
  const int nu = model.num_inputs();
  const int nw = model.num_demands();
  const int ne = model.num_branches();

  QuasiWeierstrass sys;
  sys.delta_hours = delta_hours;
  sys.layout = {q, ne};
  const int ny = sys.layout.size();

  sys.a1 = Matrix::Identity(q, q);
  sys.b1 = -delta_hours * model.storage_selector;
  sys.f1 = Matrix::Zero(q, nw);
  sys.n = Matrix::Zero(r, r);
  if (r > 0) {
    sys.b2 = -model.factor.solve(model.gen_incidence);
    sys.f2 = model.factor.solve(model.demand_incidence);
  } else {
    sys.b2 = Matrix::Zero(0, nu);
    sys.f2 = Matrix::Zero(0, nw);
  }
  sys.c1 = Matrix::Zero(ny, q);
  sys.c1.topRows(q).setIdentity();
  sys.c2 = Matrix::Zero(ny, r);
  sys.c2.bottomRows(ne) = model.branch_susceptance;
  sys.d = Matrix::Zero(ny, nu);
  sys.d.row(q).setConstant(-1.0);
  sys.g = Matrix::Zero(ny, nw);
  sys.g.row(q).setConstant(1.0);
  sys.nilpotency_index = nilpotency_index(sys.n);
  return sys;
}

StepResult step(const QuasiWeierstrass& sys, const PlantState& state, const Vector& u,
                const Vector& w) {
  if (state.e.size() != sys.q() || u.size() != sys.num_inputs() ||
      w.size() != sys.num_disturbances()) {
    throw DimensionMismatch("plant step: dimension mismatch");
  }
  // N = 0 for the network, so the algebraic state is x2 = -(B2 u + F2 w).
  const Vector x2 = -(sys.b2 * u + sys.f2 * w);
  StepResult out;
  out.y = sys.c1 * state.e + sys.c2 * x2 + sys.d * u + sys.g * w;
  // Power balance is evaluated by summation so that it holds to rounding.
  out.y(sys.layout.slack_offset()) = w.sum() - u.sum();
  out.next.e = sys.a1 * state.e + sys.b1 * u + sys.f1 * w;
  return out;
}

TrajectoryLog simulate(const QuasiWeierstrass& sys, const Vector& e0, const Matrix& u_seq,
                       const Matrix& w_seq) {
  if (u_seq.rows() != w_seq.rows()) {
    throw DimensionMismatch("simulate: input and disturbance sequences differ in length");
  }
  const Eigen::Index t = u_seq.rows();
  TrajectoryLog log;
  log.u = u_seq;
  log.w = w_seq;
  log.y.resize(t, sys.num_outputs());
  PlantState state{e0};
  for (Eigen::Index k = 0; k < t; ++k) {
    auto res = step(sys, state, u_seq.row(k).transpose(), w_seq.row(k).transpose());
    log.y.row(k) = res.y.transpose();
    state = std::move(res.next);
  }
  return log;
}

namespace {

using ComplexMatrix = Eigen::MatrixXcd;

bool full_row_rank_at_eigenvalues(const Matrix& a, const Matrix& extra, double rel_tol) {
  const Eigen::Index q = a.rows();
  if (q == 0) return true;
  Eigen::EigenSolver<Matrix> eig(a, false);
  const Eigen::VectorXcd lambdas = eig.eigenvalues();
  for (Eigen::Index k = 0; k < lambdas.size(); ++k) {
    ComplexMatrix pencil(q, q + extra.cols());
    pencil.leftCols(q) = a.cast<std::complex<double>>() -
                         lambdas(k) * ComplexMatrix::Identity(q, q);
    pencil.rightCols(extra.cols()) = extra.cast<std::complex<double>>();
    Eigen::JacobiSVD<ComplexMatrix> svd(pencil);
    const auto& sv = svd.singularValues();
    if (sv.size() < q || sv(0) == 0.0) return false;
    if (sv(q - 1) <= rel_tol * sv(0)) return false;
  }
  return true;
}

}  // namespace

bool r_controllable(const QuasiWeierstrass& sys, double rel_tol) {
  Matrix extra(sys.q(), sys.b1.cols() + sys.f1.cols());
  extra << sys.b1, sys.f1;
  return full_row_rank_at_eigenvalues(sys.a1, extra, rel_tol);
}

bool r_observable(const QuasiWeierstrass& sys, double rel_tol) {
  return full_row_rank_at_eigenvalues(sys.a1.transpose(), sys.c1.transpose(), rel_tol);
}

void save_trajectory_csv(const TrajectoryLog& log, const std::filesystem::path& path) {
  const Eigen::Index t = log.length();
  const Eigen::Index width = 1 + log.u.cols() + log.w.cols() + log.y.cols();
  Matrix table(t, width);
  std::vector<std::string> header{"k"};
  for (Eigen::Index j = 0; j < log.u.cols(); ++j) header.push_back("u_" + std::to_string(j + 1));
  for (Eigen::Index j = 0; j < log.w.cols(); ++j) header.push_back("w_" + std::to_string(j + 1));
  for (Eigen::Index j = 0; j < log.y.cols(); ++j) header.push_back("y_" + std::to_string(j + 1));
  for (Eigen::Index k = 0; k < t; ++k) {
    table(k, 0) = static_cast<double>(k);
    table.row(k).segment(1, log.u.cols()) = log.u.row(k);
    table.row(k).segment(1 + log.u.cols(), log.w.cols()) = log.w.row(k);
    table.row(k).tail(log.y.cols()) = log.y.row(k);
  }
  write_matrix_csv(table, header, path);
}

TrajectoryLog load_trajectory_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  Eigen::Index nu = 0, nw = 0, ny = 0;
  for (std::size_t c = 1; c < table.header.size(); ++c) {
    const auto& h = table.header[c];
    const char kind = h.empty() ? '?' : h[0];
    const bool ordered = (kind == 'u' && nw == 0 && ny == 0) || (kind == 'w' && ny == 0) ||
                         kind == 'y';
    if (h.size() < 3 || h[1] != '_' || !ordered) {
      throw AlignmentError(path.string() + ": unexpected trajectory column '" + h + "'");
    }
    if (kind == 'u') ++nu;
    else if (kind == 'w') ++nw;
    else ++ny;
  }
  if (table.header.empty() || table.header[0] != "k") {
    throw AlignmentError(path.string() + ": trajectory CSV must start with column 'k'");
  }
  TrajectoryLog log;
  log.u = table.values.middleCols(1, nu);
  log.w = table.values.middleCols(1 + nu, nw);
  log.y = table.values.middleCols(1 + nu + nw, ny);
  return log;
}

}  // namespace ddopf
