#include "borisk/linalg.hpp"

#include <lapacke.h>

#include <stdexcept>
#include <vector>

namespace borisk::linalg {

void sym_eig(const Eigen::MatrixXd& A, Eigen::VectorXd& evals, Eigen::MatrixXd& evecs) {
  if (A.rows() != A.cols()) throw std::invalid_argument("sym_eig: matrix not square");
  const lapack_int n = static_cast<lapack_int>(A.rows());
  evecs = A;
  evals.resize(n);
  lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, evecs.data(), n, evals.data());
  if (info != 0) throw std::runtime_error("sym_eig: dsyevd failed, info=" + std::to_string(info));
}

double sym_op_norm(const Eigen::MatrixXd& A) {
  if (A.rows() != A.cols()) throw std::invalid_argument("sym_op_norm: matrix not square");
  const lapack_int n = static_cast<lapack_int>(A.rows());
  Eigen::MatrixXd work = A;
  Eigen::VectorXd w(n);
  lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'N', 'L', n, work.data(), n, w.data());
  if (info != 0) throw std::runtime_error("sym_op_norm: dsyevd failed");
  return std::max(std::abs(w(0)), std::abs(w(n - 1)));
}

double pairwise_sum(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  std::vector<double> level(v);
  while (level.size() > 1) {
    std::vector<double> next((level.size() + 1) / 2);
    for (std::size_t i = 0; i < next.size(); ++i) {
      const std::size_t a = 2 * i, b = 2 * i + 1;
      next[i] = (b < level.size()) ? level[a] + level[b] : level[a];
    }
    level.swap(next);
  }
  return level[0];
}

}  // namespace borisk::linalg
