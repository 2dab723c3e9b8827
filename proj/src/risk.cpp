#include "borisk/risk.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "borisk/linalg.hpp"
#include "borisk/ridge.hpp"
#include "borisk/rng.hpp"

namespace borisk::risk {

namespace {

void check_spec_dims(const Eigen::MatrixXd& X, const spectra::Spectrum& spec,
                     const spectra::ParameterWeights& w) {
  if (X.cols() != spec.truncation_dim)
    throw std::invalid_argument("risk: design/spectrum dimension mismatch");
  if (w.weights_sq.size() != spec.truncation_dim)
    throw std::invalid_argument("risk: weights/spectrum dimension mismatch");
}

RiskReport assemble(double B, double V, double Nb, double Nv, double sigma2,
                    double budget) {
  RiskReport rep;
  rep.std_bias = std::max(B, 0.0);
  rep.std_variance = sigma2 * std::max(V, 0.0);
  rep.std_total = rep.std_bias + rep.std_variance;
  rep.norm_bias = std::max(Nb, 0.0);
  rep.norm_variance = sigma2 * std::max(Nv, 0.0);
  rep.norm_total = rep.norm_bias + rep.norm_variance;
  rep.budget = budget;
  rep.adv_lower = budget * budget * rep.norm_total + rep.std_total;
  rep.adv_upper = 2.0 * rep.adv_lower;
  return rep;
}

McStat finalize_stat(const std::vector<double>& values) {
  McStat s;
  s.trials = static_cast<long>(values.size());
  if (s.trials == 0) return s;
  s.mean = linalg::pairwise_sum(values) / s.trials;
  std::vector<double> sq(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - s.mean;
    sq[i] = d * d;
  }
  if (s.trials > 1)
    s.std_error = std::sqrt(linalg::pairwise_sum(sq) / (s.trials - 1) /
                            static_cast<double>(s.trials));
  return s;
}

}  // namespace

EigenbasisCache::EigenbasisCache(const Eigen::MatrixXd& X, const spectra::Spectrum& spec,
                                 const spectra::ParameterWeights& w)
    : X_(X), spec_(spec), w_(w) {
  check_spec_dims(X_, spec_, w_);
  if (!X_.allFinite()) throw std::invalid_argument("EigenbasisCache: non-finite X");
  const int n = static_cast<int>(X_.rows());

  Eigen::MatrixXd A = X_ * X_.transpose();
  linalg::sym_eig(A, d_, U_);
  A.resize(0, 0);

  {
    Eigen::MatrixXd P = U_.transpose() * X_;
    P2_ = P.array().square();
  }
  {
    Eigen::MatrixXd Y = X_ * spec_.eigenvalues.cwiseSqrt().asDiagonal();
    Eigen::MatrixXd C = Y * Y.transpose();
    Y.resize(0, 0);
    Eigen::MatrixXd Ctil = U_.transpose() * C * U_;
    C.resize(0, 0);
    Eigen::MatrixXd Y2 = X_ * w_.weights_sq.cwiseSqrt().asDiagonal();
    Eigen::MatrixXd B2 = Y2 * Y2.transpose();
    Y2.resize(0, 0);
    Eigen::MatrixXd B2til = U_.transpose() * B2 * U_;
    B2.resize(0, 0);
    Ctil_diag_ = Ctil.diagonal();
    B2til_diag_ = B2til.diagonal();
    CB_ = Ctil.cwiseProduct(B2til);
  }
}

Eigen::VectorXd EigenbasisCache::resolvent_diag(double lambda) const {
  const int n = this->n();
  const double nl = n * lambda;
  const double dmax = std::max(d_(n - 1), 0.0);
  Eigen::VectorXd g(n);
  for (int t = 0; t < n; ++t) {
    if (lambda == 0.0) {
      g(t) = (d_(t) > ridge::kPinvCutoff * dmax) ? 1.0 / d_(t) : 0.0;
    } else {
      g(t) = 1.0 / (d_(t) + nl);
    }
  }
  return g;
}

RiskReport EigenbasisCache::conditional_moments(double lambda, double sigma2,
                                                double budget) const {
  if (lambda < 0) throw std::invalid_argument("conditional_moments: lambda < 0");
  const Eigen::VectorXd g = resolvent_diag(lambda);
  const Eigen::VectorXd g2 = g.cwiseProduct(g);

  const double V = Ctil_diag_.dot(g2);
  const double Nv = d_.cwiseProduct(g2).dot(Eigen::VectorXd::Ones(n()));
  const double Nb = (d_.cwiseProduct(g2)).dot(B2til_diag_);

  // u_i = lambda_i z_i^T H z_i = x_i^T H x_i (columnwise).
  Eigen::VectorXd u = P2_.transpose() * g;
  double B_diag = 0.0;
  for (int i = 0; i < p(); ++i) {
    const double wi = w_.weights_sq(i);
    const double li = spec_.eigenvalues(i);
    const double ui = u(i);
    B_diag += wi * li * ((1.0 - ui) * (1.0 - ui) - ui * ui);
  }
  const double B_cross = g.dot(CB_ * g);
  const double B = B_diag + B_cross;

  return assemble(B, V, Nb, Nv, sigma2, budget);
}

Eigen::VectorXd EigenbasisCache::theta_hat(const Eigen::VectorXd& y, double lambda) const {
  if (y.size() != n()) throw std::invalid_argument("theta_hat: y dimension mismatch");
  const Eigen::VectorXd g = resolvent_diag(lambda);
  Eigen::VectorXd c = U_ * (g.cwiseProduct(U_.transpose() * y));
  return X_.transpose() * c;
}

double EigenbasisCache::woodbury_variance_sum(double lambda) const {
  const int nn = n();
  const double nl = nn * lambda;
  Eigen::MatrixXd A = U_ * d_.asDiagonal() * U_.transpose();
  double total = 0.0;
  for (int i = 0; i < p(); ++i) {
    const double li = spec_.eigenvalues(i);
    Eigen::VectorXd zi = X_.col(i) / std::sqrt(li);
    Eigen::MatrixXd Bm = A - li * (zi * zi.transpose());
    Bm.diagonal().array() += nl;
    Eigen::MatrixXd Binv = Bm.ldlt().solve(Eigen::MatrixXd::Identity(nn, nn));
    const Eigen::VectorXd bz = Binv * zi;
    const double quad1 = zi.dot(bz);       // z^T (A_{-i}+nl)^{-1} z
    const double quad2 = bz.squaredNorm(); // z^T (A_{-i}+nl)^{-2} z
    const double denom = 1.0 + li * quad1;
    total += li * li * quad2 / (denom * denom);
  }
  return total;
}

double EigenbasisCache::direct_variance_trace(double lambda) const {
  const Eigen::VectorXd g = resolvent_diag(lambda);
  return Ctil_diag_.dot(g.cwiseProduct(g));
}

double EigenbasisCache::gram_reconstruction_error() const {
  Eigen::MatrixXd A = X_ * X_.transpose();
  Eigen::MatrixXd R = U_ * d_.asDiagonal() * U_.transpose();
  return (A - R).norm() / A.norm();
}

RiskReport conditional_moments(const Eigen::MatrixXd& X, double lambda,
                               const spectra::Spectrum& spec,
                               const spectra::ParameterWeights& w, double sigma2,
                               double budget) {
  check_spec_dims(X, spec, w);
  if (lambda < 0) throw std::invalid_argument("conditional_moments: lambda < 0");
  if (!X.allFinite()) throw std::invalid_argument("conditional_moments: non-finite X");
  const int n = static_cast<int>(X.rows());
  const double nl = n * lambda;

  Eigen::MatrixXd A = X * X.transpose();
  Eigen::MatrixXd Areg = A;
  Areg.diagonal().array() += nl;
  Eigen::LLT<Eigen::MatrixXd> llt(Areg);
  if (llt.info() != Eigen::Success) {
    // Degenerate Gram matrix: use the eigen path with pseudoinverse cutoff.
    return EigenbasisCache(X, spec, w).conditional_moments(lambda, sigma2, budget);
  }
  Eigen::MatrixXd M = llt.solve(Eigen::MatrixXd::Identity(n, n));

  Eigen::MatrixXd C;
  {
    Eigen::MatrixXd Y = X * spec.eigenvalues.cwiseSqrt().asDiagonal();
    C = Y * Y.transpose();
  }
  Eigen::MatrixXd B2;
  {
    Eigen::MatrixXd Y2 = X * w.weights_sq.cwiseSqrt().asDiagonal();
    B2 = Y2 * Y2.transpose();
  }

  Eigen::MatrixXd T = M * C * M;  // H C H
  const double V = T.trace();
  const double B_cross = T.cwiseProduct(B2).sum();
  T.resize(0, 0);

  double Nb, Nv;
  if (lambda > 0) {
    Eigen::MatrixXd M2 = M * M;
    Nb = M.cwiseProduct(B2).sum() - nl * M2.cwiseProduct(B2).sum();
    Nv = M.trace() - nl * M2.trace();
  } else {
    Nb = M.cwiseProduct(B2).sum();
    Nv = M.trace();
  }

  Eigen::MatrixXd WX = M * X;
  double B_diag = 0.0;
  for (int i = 0; i < X.cols(); ++i) {
    const double ui = X.col(i).dot(WX.col(i));  // x_i^T H x_i
    B_diag += w.weights_sq(i) * spec.eigenvalues(i) *
              ((1.0 - ui) * (1.0 - ui) - ui * ui);
  }
  return assemble(B_diag + B_cross, V, Nb, Nv, sigma2, budget);
}

double adversarial_sup(const Eigen::VectorXd& theta_hat, const Eigen::VectorXd& theta,
                       const Eigen::VectorXd& x, double alpha) {
  if (alpha < 0) throw std::invalid_argument("adversarial_sup: alpha < 0");
  const double err = std::abs(x.dot(theta_hat - theta));
  const double v = err + alpha * theta_hat.norm();
  return v * v;
}

double adversarial_risk_gaussian(const Eigen::VectorXd& theta_hat,
                                 const Eigen::VectorXd& theta,
                                 const spectra::Spectrum& spec, double alpha) {
  if (theta_hat.size() != spec.truncation_dim || theta.size() != spec.truncation_dim)
    throw std::invalid_argument("adversarial_risk_gaussian: dimension mismatch");
  const Eigen::VectorXd diff = theta_hat - theta;
  const double sig_norm_sq = spec.eigenvalues.dot(diff.cwiseProduct(diff));
  const double sig_norm = std::sqrt(sig_norm_sq);
  const double tn = theta_hat.norm();
  const double half_normal = std::sqrt(2.0 / std::numbers::pi);
  return alpha * alpha * tn * tn + 2.0 * alpha * tn * half_normal * sig_norm + sig_norm_sq;
}

McRisks mc_risks(const EigenbasisCache& cache, double sigma2, double lambda,
                 double alpha, long trials, std::uint64_t seed,
                 datagen::DesignDist dist) {
  if (trials < 2) throw std::invalid_argument("mc_risks: trials must be >= 2");
  const auto& spec = cache.spectrum();
  const auto& w = cache.weights();
  const bool gaussian = dist == datagen::DesignDist::Gaussian;

  std::vector<double> se_vals, adv_vals, norm_vals, exact_vals;
  se_vals.reserve(trials);
  adv_vals.reserve(trials);
  norm_vals.reserve(trials);
  if (gaussian) exact_vals.reserve(trials);

  for (long t = 0; t < trials; ++t) {
    const std::uint64_t st = rng::derive_stream(seed, static_cast<std::uint64_t>(t));
    const Eigen::VectorXd theta = datagen::sample_theta(w, rng::derive_stream(st, 0));
    Eigen::VectorXd y = cache.X() * theta;
    if (sigma2 > 0) {
      auto eng = rng::make_engine(rng::derive_stream(st, 1));
      std::normal_distribution<double> gauss(0.0, std::sqrt(sigma2));
      for (int i = 0; i < y.size(); ++i) y(i) += gauss(eng);
    }
    const Eigen::VectorXd th = cache.theta_hat(y, lambda);
    const Eigen::VectorXd xstar =
        datagen::sample_design(spec, 1, dist, rng::derive_stream(st, 2)).X.row(0).transpose();

    const double err = xstar.dot(th - theta);
    se_vals.push_back(err * err);
    adv_vals.push_back(adversarial_sup(th, theta, xstar, alpha));
    norm_vals.push_back(th.squaredNorm());
    if (gaussian) exact_vals.push_back(adversarial_risk_gaussian(th, theta, spec, alpha));
  }

  McRisks out;
  out.std_mc = finalize_stat(se_vals);
  out.adv_mc = finalize_stat(adv_vals);
  out.norm_mc = finalize_stat(norm_vals);
  out.adv_exact_mc = finalize_stat(exact_vals);
  return out;
}

McRisks mc_risks(const spectra::Spectrum& spec, const spectra::ParameterWeights& w,
                 double sigma2, int n, double lambda, double alpha, long trials,
                 std::uint64_t seed, datagen::DesignDist dist) {
  const auto design = datagen::sample_design(spec, n, dist, rng::derive_stream(seed, 1u << 20));
  EigenbasisCache cache(design.X, spec, w);
  return mc_risks(cache, sigma2, lambda, alpha, trials, seed, dist);
}

}  // namespace borisk::risk
