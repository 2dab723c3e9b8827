#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>

#include "borisk/spectra.hpp"

namespace borisk::datagen {

enum class DesignDist { Gaussian, Rademacher, Uniform };

DesignDist design_dist_from_name(const std::string& name);
std::string design_dist_name(DesignDist d);

struct DesignSample {
  Eigen::MatrixXd X;  // n x p, rows are observations in the eigenbasis
  int n = 0;
  std::string spectrum_ref;
  std::uint64_t seed = 0;
};

struct LabeledSample {
  DesignSample design;
  Eigen::VectorXd y;
  Eigen::VectorXd theta_true;
  double noise_variance = 0.0;
};

// Row i = Lambda^{1/2} eta_i with unit-variance i.i.d. eta entries drawn from
// `dist` (Uniform is scaled to unit variance). Deterministic given
// (seed, n, spec); eta draws do not depend on the eigenvalues, so scaling the
// spectrum rescales entries exactly.
DesignSample sample_design(const spectra::Spectrum& spec, int n, DesignDist dist,
                           std::uint64_t seed);

// Coordinate i = +-sqrt(w_i^2) with independent fair signs.
Eigen::VectorXd sample_theta(const spectra::ParameterWeights& w, std::uint64_t seed);

// y = X theta + eps with i.i.d. Gaussian noise of variance sigma2.
LabeledSample sample_labels(const DesignSample& design, const Eigen::VectorXd& theta,
                            double sigma2, std::uint64_t seed);

}  // namespace borisk::datagen
