#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>

#include "borisk/datagen.hpp"
#include "borisk/spectra.hpp"

namespace borisk::risk {

struct McStat {
  double mean = 0.0;
  double std_error = 0.0;
  long trials = 0;
};

// Exact conditional (given X) risk decomposition plus adversarial sandwich.
// std_total = std_bias + sigma^2 * V-term; norm_total likewise.
// adv_lower = budget^2 * norm_total + std_total, adv_upper = 2 * adv_lower.
struct RiskReport {
  double std_bias = 0.0;
  double std_variance = 0.0;
  double std_total = 0.0;
  double norm_bias = 0.0;
  double norm_variance = 0.0;
  double norm_total = 0.0;
  double adv_lower = 0.0;
  double adv_upper = 0.0;
  std::optional<double> adv_exact_gaussian;
  double budget = 0.0;
  std::optional<McStat> mc_std;
  std::optional<McStat> mc_adv;
  std::optional<McStat> mc_norm;
};

// Eigen-coordinate cache for a fixed design X: one symmetric factorization of
// A = XX^T serves every lambda on a grid, conditional moments, and per-trial
// ridge solves. Immutable after construction.
class EigenbasisCache {
 public:
  EigenbasisCache(const Eigen::MatrixXd& X, const spectra::Spectrum& spec,
                  const spectra::ParameterWeights& w);

  RiskReport conditional_moments(double lambda, double sigma2, double budget) const;

  // theta_hat = X^T (A + n lambda I)^dagger y using the cached factorization.
  Eigen::VectorXd theta_hat(const Eigen::VectorXd& y, double lambda) const;

  // Per-index variance decomposition (validation path, O(n^3) per index):
  // sum_i lambda_i^2 z_i^T (A_{-i} + n lambda I)^{-2} z_i
  //        / (1 + lambda_i z_i^T (A_{-i} + n lambda I)^{-1} z_i)^2.
  double woodbury_variance_sum(double lambda) const;
  // Direct trace tr{X Sigma X^T (A + n lambda I)^{-2}} the sum must match.
  double direct_variance_trace(double lambda) const;

  // Reconstruction error ||sum_i lambda_i z_i z_i^T - A|| / ||A||.
  double gram_reconstruction_error() const;

  int n() const { return static_cast<int>(X_.rows()); }
  int p() const { return static_cast<int>(X_.cols()); }
  const Eigen::MatrixXd& X() const { return X_; }
  const Eigen::VectorXd& gram_eigs() const { return d_; }
  const spectra::Spectrum& spectrum() const { return spec_; }
  const spectra::ParameterWeights& weights() const { return w_; }

 private:
  Eigen::VectorXd resolvent_diag(double lambda) const;  // 1/(d_t + n lambda) with cutoff

  Eigen::MatrixXd X_;
  spectra::Spectrum spec_;
  spectra::ParameterWeights w_;
  Eigen::MatrixXd U_;     // eigenvectors of A = XX^T
  Eigen::VectorXd d_;     // eigenvalues of A, ascending
  Eigen::MatrixXd P2_;    // (U^T X) squared entrywise, n x p
  Eigen::VectorXd Ctil_diag_;   // diag of U^T (X Lambda X^T) U
  Eigen::VectorXd B2til_diag_;  // diag of U^T (X diag(w) X^T) U
  Eigen::MatrixXd CB_;    // (U^T C U) .* (U^T B2 U), for the bias cross term
};

// Standalone conditional moments; builds a one-shot factorization. Prefers a
// Cholesky solve (cheaper than the eigendecomposition) and falls back to the
// eigen path when the Gram matrix is numerically singular at lambda = 0.
RiskReport conditional_moments(const Eigen::MatrixXd& X, double lambda,
                               const spectra::Spectrum& spec,
                               const spectra::ParameterWeights& w, double sigma2,
                               double budget = 0.0);

// Exact pointwise sup over the l2 ball: (|x^T(theta_hat-theta)| + alpha ||theta_hat||)^2.
double adversarial_sup(const Eigen::VectorXd& theta_hat, const Eigen::VectorXd& theta,
                       const Eigen::VectorXd& x, double alpha);

// Closed-form expectation over Gaussian x of the sup:
// alpha^2 ||th||^2 + 2 alpha ||th|| sqrt(2/pi) ||th - theta||_Sigma + ||th - theta||^2_Sigma.
double adversarial_risk_gaussian(const Eigen::VectorXd& theta_hat,
                                 const Eigen::VectorXd& theta,
                                 const spectra::Spectrum& spec, double alpha);

struct McRisks {
  McStat std_mc;
  McStat adv_mc;        // Monte Carlo over the exact pointwise sup
  McStat norm_mc;       // ||theta_hat||^2 over (theta, y) draws
  McStat adv_exact_mc;  // Gaussian closed form averaged over (theta, y)
};

// Monte Carlo risks on a fixed design (cache). Fresh theta sign-flips, noise
// and test points per trial; deterministic given seed; pairwise-sum reduction.
McRisks mc_risks(const EigenbasisCache& cache, double sigma2, double lambda,
                 double alpha, long trials, std::uint64_t seed,
                 datagen::DesignDist dist = datagen::DesignDist::Gaussian);

// Convenience: draws X internally from (spec, n, dist, seed stream 0).
McRisks mc_risks(const spectra::Spectrum& spec, const spectra::ParameterWeights& w,
                 double sigma2, int n, double lambda, double alpha, long trials,
                 std::uint64_t seed, datagen::DesignDist dist = datagen::DesignDist::Gaussian);

}  // namespace borisk::risk
