#include "ddopf/linalg.hpp"

#include <Eigen/SVD>

#include "ddopf/errors.hpp"

namespace ddopf {
namespace {

Eigen::BDCSVD<Matrix> thin_svd(const Matrix& m) {
  return Eigen::BDCSVD<Matrix>(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
}

int rank_from(const Vector& sv, double rel_tol) {
  if (sv.size() == 0 || sv(0) <= 0.0) return 0;
  const double cut = rel_tol * sv(0);
  int r = 0;
  while (r < sv.size() && sv(r) > cut) ++r;
  return r;
}

}  // namespace

int numeric_rank(const Matrix& m, double rel_tol) {
  if (m.size() == 0) return 0;
  Eigen::BDCSVD<Matrix> svd(m);
  return rank_from(svd.singularValues(), rel_tol);
}

Matrix pseudo_inverse(const Matrix& m, double rel_tol) {
  if (m.size() == 0) return Matrix::Zero(m.cols(), m.rows());
  const auto svd = thin_svd(m);
  const int r = rank_from(svd.singularValues(), rel_tol);
  const Vector inv = svd.singularValues().head(r).cwiseInverse();
  return svd.matrixV().leftCols(r) * inv.asDiagonal() *
         svd.matrixU().leftCols(r).transpose();
}

Matrix null_space(const Matrix& m, double rel_tol) {
  const Eigen::Index n = m.cols();
  if (m.rows() == 0) return Matrix::Identity(n, n);
  // Full V is needed for the complement of the row space.
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullV);
  const int r = rank_from(svd.singularValues(), rel_tol);
  return svd.matrixV().rightCols(n - r);
}

Matrix vstack(std::initializer_list<const Matrix*> blocks) {
  Eigen::Index rows = 0;
  Eigen::Index cols = -1;
  for (const Matrix* b : blocks) {
    if (cols >= 0 && b->cols() != cols && b->rows() > 0) {
      throw DimensionMismatch("vstack: column counts differ");
    }
    if (b->rows() > 0 || cols < 0) cols = b->cols();
    rows += b->rows();
  }
  Matrix out(rows, std::max<Eigen::Index>(cols, 0));
  Eigen::Index at = 0;
  for (const Matrix* b : blocks) {
    if (b->rows() == 0) continue;
    out.middleRows(at, b->rows()) = *b;
    at += b->rows();
  }
  return out;
}

}  // namespace ddopf
