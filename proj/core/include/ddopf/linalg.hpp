#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace ddopf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

inline constexpr double kDefaultRankTolerance = 1e-10;

// Number of singular values above rel_tol * sigma_max.
int numeric_rank(const Matrix& m, double rel_tol = kDefaultRankTolerance);

// Moore-Penrose pseudoinverse with singular values below rel_tol * sigma_max
// treated as zero.
Matrix pseudo_inverse(const Matrix& m, double rel_tol = kDefaultRankTolerance);

// Orthonormal basis (columns) of the null space of m.
Matrix null_space(const Matrix& m, double rel_tol = kDefaultRankTolerance);

// Vertical concatenation; all blocks must share a column count.
Matrix vstack(std::initializer_list<const Matrix*> blocks);

}  // namespace ddopf
