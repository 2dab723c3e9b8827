#pragma once

#include <Eigen/Dense>

namespace borisk::linalg {

// Symmetric eigendecomposition via LAPACK dsyevd. Eigenvalues ascending,
// A = evecs * diag(evals) * evecs^T. Throws on LAPACK failure.
void sym_eig(const Eigen::MatrixXd& A, Eigen::VectorXd& evals, Eigen::MatrixXd& evecs);

// Largest |eigenvalue| of a symmetric matrix (operator norm).
double sym_op_norm(const Eigen::MatrixXd& A);

// Deterministic pairwise summation over a value vector, reduction tree
// fixed by index so results do not depend on accumulation schedule.
double pairwise_sum(const std::vector<double>& v);

}  // namespace borisk::linalg
