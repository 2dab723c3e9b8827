#include "borisk/bounds.hpp"

#include <cmath>
#include <stdexcept>

namespace borisk::bounds {

namespace {

struct Ranks {
  int kstar;
  double r;       // r_{k*}
  double R;       // R_{k*}
  double lam_next;  // lambda_{k*+1}
  double boundary;  // lam_next * r / n
};

Ranks resolve_ranks(const spectra::Spectrum& spec, double b, int n) {
  const auto ks = spectra::critical_index(spec, b, n);
  if (!ks) throw std::invalid_argument("bounds: critical index k* does not exist");
  const auto [r, R] = spectra::effective_ranks(spec, *ks);
  const double lam_next = spec.eigenvalues(*ks);
  return {*ks, r, R, lam_next, lam_next * r / n};
}

double head_inv_norm(const spectra::Spectrum& spec, const spectra::ParameterWeights& w,
                     int k) {
  long double s = 0;
  for (int i = 0; i < k; ++i) s += w.weights_sq(i) / spec.eigenvalues(i);
  return static_cast<double>(s);
}

double tail_sigma_norm(const spectra::Spectrum& spec, const spectra::ParameterWeights& w,
                       int k) {
  long double s = 0;
  for (int i = spec.truncation_dim - 1; i >= k; --i)
    s += w.weights_sq(i) * spec.eigenvalues(i);
  return static_cast<double>(s);
}

double tail_sigma_sq_norm(const spectra::Spectrum& spec,
                          const spectra::ParameterWeights& w, int k) {
  long double s = 0;
  for (int i = spec.truncation_dim - 1; i >= k; --i) {
    const double li = spec.eigenvalues(i);
    s += w.weights_sq(i) * li * li;
  }
  return static_cast<double>(s);
}

}  // namespace

void BoundConstants::validate() const {
  for (double v : {C1, C2, C3, C4, C5, C6, C7, C8, C9, c, b})
    if (!(v > 0)) throw std::invalid_argument("BoundConstants: all multipliers must be > 0");
}

std::string regime_name(Regime r) {
  switch (r) {
    case Regime::SmallReg: return "small";
    case Regime::Intermediate: return "intermediate";
    case Regime::LargeReg: return "large";
  }
  return "small";
}

BoundReport thm_ridge_bounds(const spectra::Spectrum& spec,
                             const spectra::ParameterWeights& w, double sigma2,
                             int n, double lambda, const BoundConstants& consts) {
  consts.validate();
  if (lambda < 0) throw std::invalid_argument("thm_ridge_bounds: lambda < 0");
  const Ranks rk = resolve_ranks(spec, consts.b, n);

  const double lr = rk.lam_next * rk.r;
  const double nl = n * lambda;

  const double srisk =
      tail_sigma_norm(spec, w, rk.kstar) +
      ((lr * lr + nl * nl) / (static_cast<double>(n) * n)) *
          head_inv_norm(spec, w, rk.kstar) +
      sigma2 * (static_cast<double>(rk.kstar) / n +
                n * spec.tail_sq_from(rk.kstar) / ((lr + nl) * (lr + nl)));

  long double head = 0;
  for (int i = 0; i < rk.kstar; ++i) {
    const double li = spec.eigenvalues(i);
    const double cap = std::min(1.0 / n, n * li * li / ((lr + nl) * (lr + nl)));
    head += (sigma2 / li + n * w.weights_sq(i)) * cap;
  }
  const double norm =
      static_cast<double>(head) +
      (n * sigma2 * lr + static_cast<double>(n) * n * tail_sigma_sq_norm(spec, w, rk.kstar)) /
          (lr * lr + nl * nl);

  BoundReport rep;
  rep.srisk_upper = consts.C1 * srisk;
  rep.norm_lower = consts.C2 * norm;
  rep.small_boundary = rk.boundary;
  rep.regime = (lambda <= rk.boundary) ? Regime::SmallReg : Regime::Intermediate;
  return rep;
}

BoundReport small_reg_bounds(const spectra::Spectrum& spec,
                             const spectra::ParameterWeights& w, double sigma2,
                             int n, const BoundConstants& consts, double lambda) {
  consts.validate();
  const Ranks rk = resolve_ranks(spec, consts.b, n);
  if (lambda > rk.boundary)
    throw std::invalid_argument("small_reg_bounds: lambda above small-regime boundary " +
                                std::to_string(rk.boundary));

  const double lr = rk.lam_next * rk.r;
  const double srisk =
      tail_sigma_norm(spec, w, rk.kstar) +
      (lr / n) * (lr / n) * head_inv_norm(spec, w, rk.kstar) +
      sigma2 * (static_cast<double>(rk.kstar) / n + n / rk.R);

  long double head = 0;
  for (int i = 0; i < rk.kstar; ++i) {
    const double li = spec.eigenvalues(i);
    const double cap = std::min(1.0 / n, n * li * li / (lr * lr));
    head += (sigma2 / li + n * w.weights_sq(i)) * cap;
  }
  const double norm = static_cast<double>(head) + n * sigma2 / lr +
                      static_cast<double>(n) * n * tail_sigma_sq_norm(spec, w, rk.kstar) /
                          (lr * lr);

  BoundReport rep;
  rep.srisk_upper = consts.C3 * srisk;
  rep.norm_lower = consts.C4 * norm;
  rep.small_boundary = rk.boundary;
  rep.regime = Regime::SmallReg;
  return rep;
}

BoundReport large_reg_lower(const spectra::Spectrum& spec,
                            const spectra::ParameterWeights& w, double sigma2,
                            int n, double lambda, const BoundConstants& consts) {
  consts.validate();
  const Ranks rk = resolve_ranks(spec, consts.b, n);
  if (lambda < rk.boundary)
    throw std::invalid_argument("large_reg_lower: lambda below large-regime boundary " +
                                std::to_string(rk.boundary));

  long double srisk = 0, norm = 0, srisk_var = 0, norm_var = 0;
  for (int i = 0; i < spec.truncation_dim; ++i) {
    const double li = spec.eigenvalues(i);
    const double wi = w.weights_sq(i);
    if (li >= lambda) {
      srisk += wi * lambda * lambda / li;
      norm += wi;
      srisk_var += 1.0;
      norm_var += 1.0 / li;
    } else {
      srisk += wi * li;
      norm += wi * li * li / (lambda * lambda);
      srisk_var += li * li / (lambda * lambda);
      norm_var += li / (lambda * lambda);
    }
  }

  BoundReport rep;
  rep.srisk_lower =
      consts.C5 * (static_cast<double>(srisk) + sigma2 / n * static_cast<double>(srisk_var));
  rep.norm_lower =
      consts.C6 * (static_cast<double>(norm) + sigma2 / n * static_cast<double>(norm_var));
  rep.srisk_upper = 0.0;
  rep.small_boundary = rk.boundary;
  rep.regime = (lambda >= spec.eigenvalues(0)) ? Regime::LargeReg : Regime::Intermediate;
  return rep;
}

BoundReport regime_classify(const spectra::Spectrum& spec,
                            const spectra::ParameterWeights& w, double sigma2,
                            int n, double lambda, double alpha,
                            const BoundConstants& consts, double minnorm_srisk_ref,
                            double adv_risk_ref) {
  consts.validate();
  const Ranks rk = resolve_ranks(spec, consts.b, n);
  BoundReport rep = thm_ridge_bounds(spec, w, sigma2, n, lambda, consts);

  if (lambda <= rk.boundary) {
    rep.regime = Regime::SmallReg;
    return rep;
  }

  const auto wstar = spectra::tradeoff_index(spec, w, n, consts.b);
  double lam_w;
  if (!wstar || *wstar == 0) {
    lam_w = spec.eigenvalues(0);
    rep.note = wstar ? "w*=0; using lambda_1 as intermediate-regime ceiling"
                     : "w* missing; intermediate regime unavailable, using lambda_1";
  } else {
    lam_w = spec.eigenvalues(*wstar - 1);
  }

  if (lambda >= lam_w) {
    rep.regime = Regime::LargeReg;
    return rep;
  }

  rep.regime = Regime::Intermediate;
  // Delta(lambda): floor on srisk / (C9 ||theta||^2 srisk(lambda=0)).
  long double num = 0;
  for (int i = 0; i < spec.truncation_dim; ++i) {
    const double li = spec.eigenvalues(i);
    const double wi = w.weights_sq(i);
    num += (li > lambda) ? wi * lambda * lambda / li : wi * li;
  }
  const double den = w.norm_sq() * (rk.lam_next * rk.lam_next * head_inv_norm(spec, w, rk.kstar) +
                                    tail_sigma_norm(spec, w, rk.kstar));
  const double first = static_cast<double>(num) / den;
  const double root = std::sqrt(std::max(static_cast<double>(rk.kstar) / n, n / rk.R));
  const double second = alpha * alpha / (adv_risk_ref * root);
  rep.delta_lambda = std::min(first, second);
  (void)minnorm_srisk_ref;
  return rep;
}

}  // namespace borisk::bounds
