#include "borisk/datagen.hpp"

#include <cmath>
#include <stdexcept>

#include "borisk/rng.hpp"

namespace borisk::datagen {

DesignDist design_dist_from_name(const std::string& name) {
  if (name == "gaussian") return DesignDist::Gaussian;
  if (name == "rademacher") return DesignDist::Rademacher;
  if (name == "uniform") return DesignDist::Uniform;
  throw std::invalid_argument("unknown design distribution: " + name);
}

std::string design_dist_name(DesignDist d) {
  switch (d) {
    case DesignDist::Gaussian: return "gaussian";
    case DesignDist::Rademacher: return "rademacher";
    case DesignDist::Uniform: return "uniform";
  }
  return "gaussian";
}

DesignSample sample_design(const spectra::Spectrum& spec, int n, DesignDist dist,
                           std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_design: n must be >= 1");
  const int p = spec.truncation_dim;
  DesignSample out;
  out.X.resize(n, p);
  out.n = n;
  out.spectrum_ref = spec.describe();
  out.seed = seed;

  Eigen::VectorXd sqrt_lam = spec.eigenvalues.cwiseSqrt();
  auto eng = rng::make_engine(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(-std::sqrt(3.0), std::sqrt(3.0));
  std::bernoulli_distribution coin(0.5);

  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) {
      double eta;
      switch (dist) {
        case DesignDist::Gaussian: eta = gauss(eng); break;
        case DesignDist::Rademacher: eta = coin(eng) ? 1.0 : -1.0; break;
        case DesignDist::Uniform: eta = unif(eng); break;
        default: eta = 0.0;
      }
      out.X(i, j) = sqrt_lam(j) * eta;
    }
  }
  return out;
}

Eigen::VectorXd sample_theta(const spectra::ParameterWeights& w, std::uint64_t seed) {
  auto eng = rng::make_engine(seed);
  std::bernoulli_distribution coin(0.5);
  Eigen::VectorXd theta(w.weights_sq.size());
  for (int i = 0; i < theta.size(); ++i) {
    const double mag = std::sqrt(w.weights_sq(i));
    theta(i) = coin(eng) ? mag : -mag;
  }
  return theta;
}

LabeledSample sample_labels(const DesignSample& design, const Eigen::VectorXd& theta,
                            double sigma2, std::uint64_t seed) {
  if (sigma2 < 0) throw std::invalid_argument("sample_labels: negative noise variance");
  if (theta.size() != design.X.cols())
    throw std::invalid_argument("sample_labels: theta dimension mismatch");
  LabeledSample out;
  out.design = design;
  out.theta_true = theta;
  out.noise_variance = sigma2;
  out.y = design.X * theta;
  if (sigma2 > 0) {
    auto eng = rng::make_engine(seed);
    std::normal_distribution<double> gauss(0.0, std::sqrt(sigma2));
    for (int i = 0; i < out.y.size(); ++i) out.y(i) += gauss(eng);
  }
  return out;
}

}  // namespace borisk::datagen
