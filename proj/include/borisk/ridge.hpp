#pragma once

#include <Eigen/Dense>

#include <vector>

namespace borisk::ridge {

// Relative eigenvalue cutoff for the pseudoinverse at lambda = 0.
inline constexpr double kPinvCutoff = 1e-12;

struct RidgeFit {
  Eigen::VectorXd theta_hat;
  double lambda = 0.0;
  double residual_norm = 0.0;   // ||X theta_hat - y||
  double gram_condition = 0.0;  // mu_1 / mu_n of (XX^T + n lambda I)
  double solver_tolerance = kPinvCutoff;
};

// Shared symmetric eigendecomposition of XX^T; one factorization serves a
// whole lambda grid. Immutable after construction.
class GramEigen {
 public:
  explicit GramEigen(const Eigen::MatrixXd& X);

  RidgeFit fit(const Eigen::VectorXd& y, double lambda) const;

  const Eigen::VectorXd& gram_eigenvalues() const { return d_; }
  const Eigen::MatrixXd& gram_eigenvectors() const { return U_; }
  int n() const { return static_cast<int>(X_.rows()); }
  int p() const { return static_cast<int>(X_.cols()); }

 private:
  Eigen::MatrixXd X_;
  Eigen::MatrixXd U_;  // eigenvectors of XX^T
  Eigen::VectorXd d_;  // eigenvalues, ascending
};

// theta_hat = X^T (XX^T + n lambda I)^dagger y.
RidgeFit fit_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda);

// Ridgeless / min-norm estimator (lambda = 0).
RidgeFit fit_minnorm(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

// One fit per grid value, sharing a single factorization.
std::vector<RidgeFit> ridge_path(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                 const std::vector<double>& lambda_grid);

}  // namespace borisk::ridge
