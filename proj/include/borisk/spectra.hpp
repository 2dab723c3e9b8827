#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace borisk::spectra {

enum class Family { Example1, Example2, NtkExample, PolyDecay, Isotropic, Custom };

std::string family_name(Family f);
Family family_from_name(const std::string& name);

// Covariance eigenvalue sequence, materialized to `truncation_dim` entries,
// non-increasing and strictly positive. Families with an infinite (or very
// long) tail carry analytic corrections for sum(lambda_i) and sum(lambda_i^2)
// beyond the truncation, obtained by integral bracketing.
struct Spectrum {
  Eigen::VectorXd eigenvalues;
  int truncation_dim = 0;
  std::optional<double> tail_sum;
  std::optional<double> tail_sum_sq;
  Family family = Family::Custom;
  int family_n = 0;        // sample size the family was instantiated for
  double family_param = 0; // decay exponent / NTK s parameter / unused

  // sum_{i>k} lambda_i including the analytic tail (k is 0-based count of
  // leading eigenvalues excluded; k may equal truncation_dim only when an
  // analytic tail is present).
  double tail_from(int k) const;
  double tail_sq_from(int k) const;
  void validate() const;
  std::string describe() const;
};

// Squared eigenbasis weights of the ground-truth parameter, aligned with the
// Spectrum indices. `tail_norm_sq` is the analytic mass beyond truncation.
struct ParameterWeights {
  Eigen::VectorXd weights_sq;
  double tail_norm_sq = 0.0;
  double norm_sq() const { return weights_sq.sum() + tail_norm_sq; }
  void validate(const Spectrum& spec) const;
};

struct SpectrumBundle {
  Spectrum spectrum;
  ParameterWeights weights;
  double noise_variance = 1.0;
};

struct RankReport {
  int k = 0;
  double r_k = 0;
  double R_k = 0;
  std::optional<double> s_k;
  std::optional<int> k_star;
  std::optional<int> w_star;
  double b = 0;
};

enum class ConditionId { Benign, TradeOff, NtkBenign, NtkHighDim };
enum class Verdict { TrendsToZero, Violated, Inconclusive };

std::string condition_name(ConditionId id);
std::string verdict_name(Verdict v);

struct ConditionTerm {
  std::string name;
  std::vector<double> values;    // one per grid point
  double loglog_slope = 0.0;     // least-squares slope of log(value) vs log(n)
  bool decreasing = false;       // monotone non-increasing with overall decrease
};

struct ConditionReport {
  ConditionId condition = ConditionId::Benign;
  std::vector<int> n_grid;
  std::vector<ConditionTerm> terms;
  Verdict verdict = Verdict::Inconclusive;
  std::string note;
};

// Builtin spectrum/weight/noise families. `param` is the decay exponent for
// PolyDecay and the s parameter for NtkExample (0 < s < 1); ignored otherwise.
// Isotropic uses p as the ambient dimension d.
SpectrumBundle make_spectrum(Family family, int n, int p, double param = 0.0);

SpectrumBundle make_custom(Eigen::VectorXd eigenvalues, Eigen::VectorXd weights_sq,
                           double noise_variance);

// r_k and R_k per the tail-ratio definitions, with analytic tail corrections.
std::pair<double, double> effective_ranks(const Spectrum& spec, int k);

// Smallest k with r_k >= b*n, or nullopt when no materialized k qualifies.
std::optional<int> critical_index(const Spectrum& spec, double b, int n);

// s_k = (sum_{i>k} lambda_i w_i^2 * sum_{i>k} lambda_i) / (||theta||^2 lambda_{k+1}^2)
double cross_effective_rank(const Spectrum& spec, const ParameterWeights& w, int k);

// Smallest w with s_w >= n*sqrt(max{k*/n, n/R_{k*}}), or nullopt.
std::optional<int> tradeoff_index(const Spectrum& spec, const ParameterWeights& w,
                                  int n, double b);

RankReport rank_report(const Spectrum& spec, const ParameterWeights& w, int k,
                       int n, double b);

// Dimensions entering the NTK high-dimension checks; m may be huge so it is a
// double (e.g. e^n).
struct NtkDims {
  double p = 0;
  double m = 0;
};

// Evaluates every term of the named condition at each n in the grid. The
// bundle for each n comes from `bundle_at` because builtin families depend on
// n; pass a constant-returning callable for a fixed custom spectrum.
// `ntk_dims_at` is required for NtkHighDim (and ignored otherwise).
ConditionReport check_conditions(
    ConditionId kind, const std::function<SpectrumBundle(int)>& bundle_at,
    const std::vector<int>& n_grid, double b,
    const std::function<NtkDims(int)>& ntk_dims_at = nullptr);

// Convenience overload for builtin families; p per n is p_factor*n (clamped
// to family-specific caps).
ConditionReport check_conditions(ConditionId kind, Family family, double param,
                                 const std::vector<int>& n_grid, double b,
                                 int p_factor = 2);

// Default truncation used when instantiating a builtin family at sample size
// n with target oversampling p_factor.
int default_truncation(Family family, int n, int p_factor);

}  // namespace borisk::spectra
