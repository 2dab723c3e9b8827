#include "borisk/ntk.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "borisk/datagen.hpp"
#include "borisk/linalg.hpp"
#include "borisk/rng.hpp"

namespace borisk::ntk {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Column j of the (p+1) x m view is [theta_j; u_j].
Eigen::Map<const MatrixXd> neuron_view(const VectorXd& w, int m, int p) {
  return Eigen::Map<const MatrixXd>(w.data(), p + 1, m);
}

VectorXd relu(const VectorXd& s) { return s.cwiseMax(0.0); }

VectorXd relu_prime(const VectorXd& s) {
  return (s.array() > 0.0).cast<double>().matrix();
}

void check_dims(const NtkModel& model, const VectorXd& w, const VectorXd& x) {
  if (x.size() != model.p) throw std::invalid_argument("ntk: x dimension != p");
  if (w.size() != model.dim())
    throw std::invalid_argument("ntk: w dimension != m(p+1)");
}

// Linearized correction grad_w f(w0,x)^T delta without materializing features.
double feature_dot(const NtkModel& model, const VectorXd& delta, const VectorXd& x,
                   const VectorXd& s0) {
  const auto W0 = neuron_view(model.w0, model.m, model.p);
  const auto D = neuron_view(delta, model.m, model.p);
  const VectorXd h = relu(s0);
  const VectorXd hp_u0 = relu_prime(s0).cwiseProduct(W0.row(model.p).transpose());
  const double scale = 1.0 / std::sqrt(static_cast<double>(model.m) * model.p);
  const double theta_part = hp_u0.dot(D.topRows(model.p).transpose() * x);
  const double u_part = h.dot(D.row(model.p).transpose());
  return scale * (theta_part + u_part);
}

// Gradient wrt x of grad_w f(w0,x)^T delta (the h'' = 0 a.e. convention).
VectorXd grad_gap(const NtkModel& model, const VectorXd& delta, const VectorXd& x) {
  const auto W0 = neuron_view(model.w0, model.m, model.p);
  const auto D = neuron_view(delta, model.m, model.p);
  const VectorXd s0 = W0.topRows(model.p).transpose() * x;
  const VectorXd hp = relu_prime(s0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(model.m) * model.p);
  const VectorXd a = hp.cwiseProduct(D.row(model.p).transpose());          // h' du
  const VectorXd b = hp.cwiseProduct(W0.row(model.p).transpose());        // h' u0
  return scale * (W0.topRows(model.p) * a + D.topRows(model.p) * b);
}

// Per-design machinery shared by the fixed point and gradient descent:
// S = X Theta0 (n x m pre-activations), K = empirical feature Gram,
// F = network outputs at w0.
struct Assembly {
  MatrixXd S, H, Hpu;  // Hpu = h'(S) scaled columnwise by u0_j
  MatrixXd K;
  VectorXd F;
  VectorXd evals;
  MatrixXd evecs;
};

Assembly assemble(const NtkModel& model, const MatrixXd& X) {
  if (X.cols() != model.p) throw std::invalid_argument("ntk: X columns != p");
  Assembly a;
  const auto W0 = neuron_view(model.w0, model.m, model.p);
  const VectorXd u0 = W0.row(model.p).transpose();
  const double mp = static_cast<double>(model.m) * model.p;
  a.S = X * W0.topRows(model.p);
  a.H = a.S.cwiseMax(0.0);
  a.Hpu = (a.S.array() > 0.0).cast<double>().matrix() * u0.asDiagonal();
  a.K = (a.H * a.H.transpose() +
         (a.Hpu * a.Hpu.transpose()).cwiseProduct(X * X.transpose())) /
        mp;
  a.F = (a.H * u0) / std::sqrt(mp);
  linalg::sym_eig(a.K, a.evals, a.evecs);
  return a;
}

VectorXd solve_kernel(const Assembly& a, const VectorXd& rhs) {
  const int n = static_cast<int>(rhs.size());
  const double mu1 = a.evals(n - 1);
  if (!(a.evals(0) >= 1e-12 * mu1))
    throw std::runtime_error("ntk: singular kernel (mu_n < 1e-12 mu_1)");
  VectorXd g = a.evecs.transpose() * rhs;
  for (int i = 0; i < n; ++i) g(i) /= a.evals(i);
  return a.evecs * g;
}

// w = w0 + gradF^T c, streamed per neuron block.
VectorXd lift_coefficients(const NtkModel& model, const MatrixXd& X,
                           const Assembly& a, const VectorXd& c) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(model.m) * model.p);
  const MatrixXd M = a.Hpu.array().colwise() * c.array();  // n x m
  const MatrixXd dTheta = (X.transpose() * M) * scale;     // p x m
  const VectorXd du = (a.H.transpose() * c) * scale;       // m
  VectorXd w = model.w0;
  Eigen::Map<MatrixXd> W(w.data(), model.p + 1, model.m);
  W.topRows(model.p) += dTheta;
  W.row(model.p) += du.transpose();
  return w;
}

double kernel_distance(const Assembly& a, const VectorXd& dc) {
  // ||gradF^T dc|| = sqrt(dc^T K dc)
  return std::sqrt(std::max(0.0, dc.dot(a.K * dc)));
}

}  // namespace

NtkModel init_network(int m, int p, std::uint64_t seed, double R) {
  if (m < 1 || p < 1) throw std::invalid_argument("init_network: m, p must be >= 1");
  const double dim = static_cast<double>(m) * (p + 1);
  if (dim > 4e8) throw std::invalid_argument("init_network: m(p+1) exceeds memory budget");
  NtkModel model;
  model.m = m;
  model.p = p;
  model.seed = seed;
  model.R = R;
  model.w0.resize(m * (p + 1));
  auto eng = rng::make_engine(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (Eigen::Index i = 0; i < model.w0.size(); ++i) model.w0(i) = gauss(eng);
  return model;
}

double forward(const NtkModel& model, const VectorXd& w, const VectorXd& x,
               ForwardMode mode) {
  check_dims(model, w, x);
  const double scale = 1.0 / std::sqrt(static_cast<double>(model.m) * model.p);
  if (mode == ForwardMode::NN) {
    const auto W = neuron_view(w, model.m, model.p);
    const VectorXd s = W.topRows(model.p).transpose() * x;
    return scale * relu(s).dot(W.row(model.p).transpose());
  }
  const auto W0 = neuron_view(model.w0, model.m, model.p);
  const VectorXd s0 = W0.topRows(model.p).transpose() * x;
  const double f0 = scale * relu(s0).dot(W0.row(model.p).transpose());
  return f0 + feature_dot(model, w - model.w0, x, s0);
}

VectorXd ntk_features(const NtkModel& model, const VectorXd& x) {
  if (x.size() != model.p) throw std::invalid_argument("ntk_features: x dimension != p");
  const auto W0 = neuron_view(model.w0, model.m, model.p);
  const VectorXd s0 = W0.topRows(model.p).transpose() * x;
  const double scale = 1.0 / std::sqrt(static_cast<double>(model.m) * model.p);
  VectorXd g = VectorXd::Zero(model.dim());
  Eigen::Map<MatrixXd> G(g.data(), model.p + 1, model.m);
  for (int j = 0; j < model.m; ++j) {
    const double u0j = W0(model.p, j);
    if (s0(j) > 0.0) G.col(j).head(model.p) = scale * u0j * x;
    G(model.p, j) = scale * std::max(s0(j), 0.0);
  }
  return g;
}

VectorXd input_gradient(const NtkModel& model, const VectorXd& w, const VectorXd& x) {
  check_dims(model, w, x);
  const auto W0 = neuron_view(model.w0, model.m, model.p);
  const auto W = neuron_view(w, model.m, model.p);
  const VectorXd s0 = W0.topRows(model.p).transpose() * x;
  const VectorXd hp = relu_prime(s0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(model.m) * model.p);
  const VectorXd a = hp.cwiseProduct(W.row(model.p).transpose());   // h' u_j
  const VectorXd b = hp.cwiseProduct(W0.row(model.p).transpose());  // h' u0_j
  return scale * (W0.topRows(model.p) * a +
                  (W.topRows(model.p) - W0.topRows(model.p)) * b);
}

KernelTriple kernels(const NtkModel& model, const MatrixXd& X,
                     const spectra::Spectrum& spec) {
  const int n = static_cast<int>(X.rows());
  if (X.cols() != model.p) throw std::invalid_argument("kernels: X columns != p");
  VectorXd norms(n);
  for (int i = 0; i < n; ++i) {
    norms(i) = X.row(i).norm();
    if (norms(i) == 0.0) throw std::invalid_argument("kernels: zero-norm row " + std::to_string(i));
  }

  KernelTriple out;
  out.K_emp = assemble(model, X).K;

  const double p = model.p;
  out.K_arc.resize(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double ip = X.row(i).dot(X.row(j));
      const double nn = norms(i) * norms(j);
      const double cosv = std::clamp(ip / nn, -1.0, 1.0);
      const double v = ip / (M_PI * p) * std::acos(-cosv) +
                       nn / (2.0 * M_PI * p) * std::sqrt(std::max(0.0, 1.0 - cosv * cosv));
      out.K_arc(i, j) = v;
      out.K_arc(j, i) = v;
    }
  }

  const double l = spec.tail_from(0);
  const double t2 = spec.tail_sq_from(0);  // trace of Sigma^2
  out.K_lin = (l / p) * (1.0 / (2.0 * M_PI) + 3.0 * t2 / (4.0 * M_PI * l * l)) *
                  MatrixXd::Ones(n, n) +
              (X * X.transpose()) / (2.0 * p) +
              (l / p) * (0.5 - 1.0 / (2.0 * M_PI)) * MatrixXd::Identity(n, n);

  out.err_emp_arc = linalg::sym_op_norm(out.K_emp - out.K_arc);
  out.err_arc_lin = linalg::sym_op_norm(out.K_arc - out.K_lin);
  return out;
}

NtkFit ntk_fixed_point(const NtkModel& model, const MatrixXd& X, const VectorXd& y) {
  if (y.size() != X.rows()) throw std::invalid_argument("ntk_fixed_point: y size mismatch");
  const Assembly a = assemble(model, X);
  const VectorXd r = y - a.F;
  const VectorXd c = solve_kernel(a, r);
  NtkFit fit;
  fit.w_hat = lift_coefficients(model, X, a, c);
  fit.solve_residual = (a.K * c - r).norm();
  return fit;
}

NtkFit gd_train(const NtkModel& model, const MatrixXd& X, const VectorXd& y,
                double gamma, int steps) {
  if (gamma <= 0) throw std::invalid_argument("gd_train: gamma must be > 0");
  if (steps < 0) throw std::invalid_argument("gd_train: steps must be >= 0");
  if (y.size() != X.rows()) throw std::invalid_argument("gd_train: y size mismatch");
  const int n = static_cast<int>(X.rows());
  const Assembly a = assemble(model, X);
  const VectorXd r = y - a.F;
  const VectorXd c_closed = solve_kernel(a, r);
  const double gamma_max = n / a.evals(n - 1);

  const int log_every = std::max(1, steps / 1000);
  NtkFit fit;
  fit.gamma = gamma;
  VectorXd c = VectorXd::Zero(n);
  fit.gd_trace.push_back(kernel_distance(a, c - c_closed));
  int growing = 0;
  for (int t = 1; t <= steps; ++t) {
    c += (gamma / n) * (r - a.K * c);
    if (t % log_every == 0 || t == steps) {
      const double d = kernel_distance(a, c - c_closed);
      growing = (d > fit.gd_trace.back()) ? growing + 1 : 0;
      fit.gd_trace.push_back(d);
      if (growing >= 10)
        throw std::runtime_error(
            "gd_train: diverging; stability requires gamma < n/lambda_max(K) = " +
            std::to_string(gamma_max));
    }
  }
  fit.w_hat = lift_coefficients(model, X, a, c);
  fit.solve_residual = (a.K * c - r).norm();
  return fit;
}

VectorXd synthetic_target(const NtkModel& model, const spectra::Spectrum& spec,
                          std::uint64_t seed) {
  if (spec.truncation_dim != model.p)
    throw std::invalid_argument("synthetic_target: spectrum dimension != p");
  for (std::uint64_t attempt = 0; attempt < 16; ++attempt) {
    const VectorXd x =
        datagen::sample_design(spec, 1, datagen::DesignDist::Gaussian,
                               rng::derive_stream(seed, attempt))
            .X.row(0)
            .transpose();
    const VectorXd phi = ntk_features(model, x);
    const double nrm = phi.norm();
    if (nrm > 1e-12) return model.w0 + (model.R / nrm) * phi;
  }
  throw std::runtime_error("synthetic_target: could not find a nonzero feature vector");
}

risk::RiskReport ntk_risks(const NtkModel& model, const NtkFit& fit,
                           const VectorXd& w_star, double sigma2, double alpha,
                           long trials, std::uint64_t seed,
                           const spectra::Spectrum& spec) {
  if (trials < 2) throw std::invalid_argument("ntk_risks: trials must be >= 2");
  if (spec.truncation_dim != model.p)
    throw std::invalid_argument("ntk_risks: spectrum dimension != p");
  if (w_star.size() != model.dim())
    throw std::invalid_argument("ntk_risks: w_star dimension mismatch");
  if ((w_star - model.w0).norm() > model.R * (1.0 + 1e-9))
    throw std::invalid_argument("ntk_risks: w_star outside the R-neighborhood");

  const auto W0 = neuron_view(model.w0, model.m, model.p);
  const VectorXd delta = fit.w_hat - w_star;
  std::vector<double> sq_gaps(static_cast<std::size_t>(trials));
  std::vector<double> grad_norms(static_cast<std::size_t>(trials));
  for (long t = 0; t < trials; ++t) {
    const std::uint64_t st = rng::derive_stream(seed, static_cast<std::uint64_t>(t));
    const VectorXd x =
        datagen::sample_design(spec, 1, datagen::DesignDist::Gaussian, st)
            .X.row(0)
            .transpose();
    const VectorXd s0 = W0.topRows(model.p).transpose() * x;
    const double gap = feature_dot(model, delta, x, s0);
    sq_gaps[t] = gap * gap;
    grad_norms[t] = input_gradient(model, fit.w_hat, x).squaredNorm();
  }

  auto stat = [](const std::vector<double>& v) {
    risk::McStat s;
    s.trials = static_cast<long>(v.size());
    s.mean = linalg::pairwise_sum(v) / s.trials;
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double d = v[i] - s.mean;
      sq[i] = d * d;
    }
    s.std_error =
        std::sqrt(linalg::pairwise_sum(sq) / (s.trials - 1) / static_cast<double>(s.trials));
    return s;
  };

  risk::RiskReport rep;
  rep.budget = alpha;
  rep.mc_std = stat(sq_gaps);
  rep.mc_norm = stat(grad_norms);
  rep.std_total = rep.mc_std->mean;
  rep.norm_total = rep.mc_norm->mean;  // E||grad_x f||^2
  rep.adv_lower = alpha * alpha * rep.norm_total;
  rep.adv_upper = rep.adv_lower;  // proxy, not a sandwich
  risk::McStat adv = *rep.mc_norm;
  adv.mean *= alpha * alpha;
  adv.std_error *= alpha * alpha;
  rep.mc_adv = adv;
  (void)sigma2;
  return rep;
}

double pga_sup(const NtkModel& model, const VectorXd& w_hat, const VectorXd& w_star,
               const VectorXd& x, double alpha, int steps) {
  const VectorXd delta_w = w_hat - w_star;
  const auto W0 = neuron_view(model.w0, model.m, model.p);
  auto gap_at = [&](const VectorXd& pt) {
    const VectorXd s0 = W0.topRows(model.p).transpose() * pt;
    return feature_dot(model, delta_w, pt, s0);
  };
  VectorXd d = VectorXd::Zero(model.p);
  double best = gap_at(x);
  best *= best;
  const double step = alpha / 10.0;
  for (int t = 0; t < steps; ++t) {
    const VectorXd pt = x + d;
    const double g = gap_at(pt);
    const VectorXd grad = 2.0 * g * grad_gap(model, delta_w, pt);
    const double gn = grad.norm();
    if (gn > 0) d += step * grad / gn;
    const double nd = d.norm();
    if (nd > alpha) d *= alpha / nd;
    const double val = gap_at(x + d);
    best = std::max(best, val * val);
  }
  return best;
}

}  // namespace borisk::ntk
