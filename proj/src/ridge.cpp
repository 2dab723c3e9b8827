#include "borisk/ridge.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "borisk/linalg.hpp"

namespace borisk::ridge {

GramEigen::GramEigen(const Eigen::MatrixXd& X) : X_(X) {
  if (X_.rows() < 1) throw std::invalid_argument("GramEigen: X has no rows");
  if (!X_.allFinite()) throw std::invalid_argument("GramEigen: non-finite entries in X");
  Eigen::MatrixXd A = X_ * X_.transpose();
  linalg::sym_eig(A, d_, U_);
}

RidgeFit GramEigen::fit(const Eigen::VectorXd& y, double lambda) const {
  if (lambda < 0) throw std::invalid_argument("fit: lambda must be >= 0");
  if (y.size() != X_.rows()) throw std::invalid_argument("fit: y dimension mismatch");
  if (!y.allFinite()) throw std::invalid_argument("fit: non-finite entries in y");

  const int n = static_cast<int>(X_.rows());
  const double nl = n * lambda;
  const double dmax = std::max(d_(n - 1), 0.0);

  Eigen::VectorXd proj = U_.transpose() * y;
  Eigen::VectorXd g(n);
  for (int i = 0; i < n; ++i) {
    const double denom = d_(i) + nl;
    if (lambda == 0.0 && d_(i) <= kPinvCutoff * dmax) {
      g(i) = 0.0;  // pseudoinverse cutoff
    } else {
      g(i) = proj(i) / denom;
    }
  }
  Eigen::VectorXd c = U_ * g;

  RidgeFit fit;
  fit.theta_hat = X_.transpose() * c;
  fit.lambda = lambda;
  fit.residual_norm = (X_ * fit.theta_hat - y).norm();
  const double mu_min = d_(0) + nl;
  const double mu_max = dmax + nl;
  fit.gram_condition = (mu_min > 0) ? mu_max / mu_min : std::numeric_limits<double>::infinity();
  return fit;
}

RidgeFit fit_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda) {
  return GramEigen(X).fit(y, lambda);
}

RidgeFit fit_minnorm(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  return fit_ridge(X, y, 0.0);
}

std::vector<RidgeFit> ridge_path(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                 const std::vector<double>& lambda_grid) {
  if (lambda_grid.empty()) throw std::invalid_argument("ridge_path: empty grid");
  for (std::size_t i = 1; i < lambda_grid.size(); ++i)
    if (lambda_grid[i] < lambda_grid[i - 1])
      throw std::invalid_argument("ridge_path: grid must be sorted ascending");
  GramEigen factor(X);
  std::vector<RidgeFit> fits;
  fits.reserve(lambda_grid.size());
  for (double lam : lambda_grid) fits.push_back(factor.fit(y, lam));
  return fits;
}

}  // namespace borisk::ridge
