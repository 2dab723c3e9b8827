#pragma once

#include <optional>
#include <string>

#include "borisk/spectra.hpp"

namespace borisk::bounds {

// Multipliers standing in for the non-explicit constants of the bound
// statements. Default 1; calibrated empirically per spectrum family when a
// dominance check is wanted.
struct BoundConstants {
  double C1 = 1, C2 = 1, C3 = 1, C4 = 1, C5 = 1, C6 = 1, C7 = 1, C8 = 1, C9 = 1;
  double c = 1;
  double b = 2;
  void validate() const;
};

enum class Regime { SmallReg, Intermediate, LargeReg };
std::string regime_name(Regime r);

struct BoundReport {
  double srisk_upper = 0.0;
  std::optional<double> srisk_lower;
  double norm_lower = 0.0;
  Regime regime = Regime::SmallReg;
  std::optional<double> delta_lambda;
  double small_boundary = 0.0;  // lambda_{k*+1} r_{k*} / n
  std::string note;
};

// Upper bound on standard risk and lower bound on E||theta_hat||^2, any
// lambda >= 0.
BoundReport thm_ridge_bounds(const spectra::Spectrum& spec,
                             const spectra::ParameterWeights& w, double sigma2,
                             int n, double lambda, const BoundConstants& consts);

// Small-regularization shapes; requires lambda <= lambda_{k*+1} r_{k*} / n.
BoundReport small_reg_bounds(const spectra::Spectrum& spec,
                             const spectra::ParameterWeights& w, double sigma2,
                             int n, const BoundConstants& consts, double lambda = 0.0);

// Large-regularization lower bounds; requires lambda >= lambda_{k*+1} r_{k*} / n.
BoundReport large_reg_lower(const spectra::Spectrum& spec,
                            const spectra::ParameterWeights& w, double sigma2,
                            int n, double lambda, const BoundConstants& consts);

// Classifies lambda into the three regimes and evaluates the intermediate
// trade-off floor Delta(lambda). `minnorm_srisk_ref` is the measured standard
// risk of the lambda=0 fit, `adv_risk_ref` a measured adversarial risk value
// (the sandwich lower bound of the same fit).
BoundReport regime_classify(const spectra::Spectrum& spec,
                            const spectra::ParameterWeights& w, double sigma2,
                            int n, double lambda, double alpha,
                            const BoundConstants& consts, double minnorm_srisk_ref,
                            double adv_risk_ref);

}  // namespace borisk::bounds
