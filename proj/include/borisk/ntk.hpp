#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "borisk/risk.hpp"
#include "borisk/spectra.hpp"

namespace borisk::ntk {

// Two-layer ReLU network f(w,x) = (1/sqrt(mp)) sum_j u_j relu(theta_j^T x).
// Parameters are flattened neuron-major: neuron j occupies the slice
// [j*(p+1), (j+1)*(p+1)) as [theta_j (p entries); u_j]. Initialization is
// i.i.d. standard normal from `seed`. Immutable after construction.
struct NtkModel {
  int m = 0;
  int p = 0;
  Eigen::VectorXd w0;
  std::uint64_t seed = 0;
  double R = 1.0;  // parameter-neighborhood radius for synthetic targets

  int dim() const { return m * (p + 1); }
};

struct KernelTriple {
  Eigen::MatrixXd K_emp;  // feature Gram at initialization
  Eigen::MatrixXd K_arc;  // width-limit arccos kernel
  Eigen::MatrixXd K_lin;  // rank-one + Gram + ridge surrogate
  double err_emp_arc = 0.0;  // ||K_emp - K_arc||_2
  double err_arc_lin = 0.0;  // ||K_arc - K_lin||_2
};

struct NtkFit {
  Eigen::VectorXd w_hat;
  double solve_residual = 0.0;     // ||K c - (y - F)||
  double gamma = 0.0;              // learning rate (0 for the closed form)
  std::vector<double> gd_trace;    // ||w_t - w_hat_closed|| per logged step
};

enum class ForwardMode { NN, NTK };

NtkModel init_network(int m, int p, std::uint64_t seed, double R = 1.0);

double forward(const NtkModel& model, const Eigen::VectorXd& w,
               const Eigen::VectorXd& x, ForwardMode mode);

// Gradient of f(., x) at w0: u-coordinate relu(theta0_j^T x)/sqrt(mp),
// theta-coordinates u0_j * 1{theta0_j^T x > 0} * x / sqrt(mp). The ReLU
// derivative at exactly 0 is taken to be 0.
Eigen::VectorXd ntk_features(const NtkModel& model, const Eigen::VectorXd& x);

// Input gradient of the linearized predictor at parameters w.
Eigen::VectorXd input_gradient(const NtkModel& model, const Eigen::VectorXd& w,
                               const Eigen::VectorXd& x);

KernelTriple kernels(const NtkModel& model, const Eigen::MatrixXd& X,
                     const spectra::Spectrum& spec);

// Minimum-parameter-norm interpolant of the linearized model:
// w_hat = w0 + gradF^T (gradF gradF^T)^{-1} (y - F).
NtkFit ntk_fixed_point(const NtkModel& model, const Eigen::MatrixXd& X,
                       const Eigen::VectorXd& y);

// Gradient descent on the linearized squared loss with step gamma/n. Stable
// iff gamma < n / lambda_max(K); divergence (10 consecutive growing logged
// distances) raises an error naming that threshold.
NtkFit gd_train(const NtkModel& model, const Eigen::MatrixXd& X,
                const Eigen::VectorXd& y, double gamma, int steps);

// w_star = w0 + R u with u a unit vector in the span of held-out feature
// rows, so the target is realizable inside the R-neighborhood.
Eigen::VectorXd synthetic_target(const NtkModel& model, const spectra::Spectrum& spec,
                                 std::uint64_t seed);

// Monte Carlo standard risk E(f_NTK(w_hat,x) - f_NTK(w_star,x))^2 plus the
// adversarial gradient-norm proxy alpha^2 E||grad_x f_NTK(w_hat,x)||^2 over
// fresh x drawn from `spec`. sigma2 is recorded for provenance only; the
// population risks are noise-free.
risk::RiskReport ntk_risks(const NtkModel& model, const NtkFit& fit,
                           const Eigen::VectorXd& w_star, double sigma2,
                           double alpha, long trials, std::uint64_t seed,
                           const spectra::Spectrum& spec);

// Validation-only empirical sup of (f_NTK(w_hat,x+delta) - f_NTK(w_star,x+delta))^2
// over ||delta|| <= alpha via projected gradient ascent (50 steps, step alpha/10).
double pga_sup(const NtkModel& model, const Eigen::VectorXd& w_hat,
               const Eigen::VectorXd& w_star, const Eigen::VectorXd& x,
               double alpha, int steps = 50);

}  // namespace borisk::ntk
