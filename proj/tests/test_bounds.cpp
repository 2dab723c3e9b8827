#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "borisk/bounds.hpp"
#include "borisk/datagen.hpp"
#include "borisk/risk.hpp"
#include "borisk/spectra.hpp"

using namespace borisk;
using namespace borisk::bounds;

namespace {

struct Oracle {
  double srisk_upper, norm_lower;
};

// Independent transcription of the ridge bound shapes, assembled forward and
// in plain double arithmetic (the library sums tails backward in long double).
Oracle oracle_ridge(const spectra::Spectrum& spec, const spectra::ParameterWeights& w,
                    double sigma2, int n, double lambda, double b) {
  const int k = *spectra::critical_index(spec, b, n);
  const auto [r, R] = spectra::effective_ranks(spec, k);
  const double lr = spec.eigenvalues(k) * r;
  const double nl = n * lambda;
  const int p = spec.truncation_dim;

  double tail_sig = 0, tail_sig2 = 0, head_inv = 0;
  for (int i = 0; i < p; ++i) {
    if (i < k) {
      head_inv += w.weights_sq(i) / spec.eigenvalues(i);
    } else {
      tail_sig += w.weights_sq(i) * spec.eigenvalues(i);
      tail_sig2 += w.weights_sq(i) * spec.eigenvalues(i) * spec.eigenvalues(i);
    }
  }
  Oracle o;
  o.srisk_upper = tail_sig + (lr * lr + nl * nl) / (double(n) * n) * head_inv +
                  sigma2 * (double(k) / n +
                            n * spec.tail_sq_from(k) / ((lr + nl) * (lr + nl)));
  double head = 0;
  for (int i = 0; i < k; ++i) {
    const double li = spec.eigenvalues(i);
    head += (sigma2 / li + n * w.weights_sq(i)) *
            std::min(1.0 / n, n * li * li / ((lr + nl) * (lr + nl)));
  }
  o.norm_lower = head + (n * sigma2 * lr + double(n) * n * tail_sig2) /
                            (lr * lr + nl * nl);
  return o;
}

Oracle oracle_large(const spectra::Spectrum& spec, const spectra::ParameterWeights& w,
                    double sigma2, int n, double lambda) {
  double sr = 0, nr = 0, srv = 0, nrv = 0;
  for (int i = 0; i < spec.truncation_dim; ++i) {
    const double li = spec.eigenvalues(i), wi = w.weights_sq(i);
    if (li >= lambda) {
      sr += wi * lambda * lambda / li;
      nr += wi;
      srv += 1.0;
      nrv += 1.0 / li;
    } else {
      sr += wi * li;
      nr += wi * li * li / (lambda * lambda);
      srv += li * li / (lambda * lambda);
      nrv += li / (lambda * lambda);
    }
  }
  return {sr + sigma2 / n * srv, nr + sigma2 / n * nrv};
}

}  // namespace

TEST_CASE("constant multipliers must be positive and act linearly") {
  BoundConstants bad;
  bad.C1 = 0.0;
  CHECK_THROWS(bad.validate());
  bad.C1 = -1.0;
  CHECK_THROWS(bad.validate());

  auto b = spectra::make_spectrum(spectra::Family::Example1, 128, 4096);
  BoundConstants one, two;
  two.C1 = 2.0;
  two.C2 = 3.0;
  auto r1 = thm_ridge_bounds(b.spectrum, b.weights, b.noise_variance, 128, 0.01, one);
  auto r2 = thm_ridge_bounds(b.spectrum, b.weights, b.noise_variance, 128, 0.01, two);
  CHECK(r2.srisk_upper == doctest::Approx(2.0 * r1.srisk_upper).epsilon(1e-14));
  CHECK(r2.norm_lower == doctest::Approx(3.0 * r1.norm_lower).epsilon(1e-14));
}

TEST_CASE("ridge bounds match an independent transcription of the formulas") {
  BoundConstants consts;
  for (auto fam : {spectra::Family::Example1, spectra::Family::Example2}) {
    const int n = fam == spectra::Family::Example1 ? 128 : 64;
    const int p = fam == spectra::Family::Example1 ? 4096 : 2048;
    auto b = spectra::make_spectrum(fam, n, p);
    auto rep0 = thm_ridge_bounds(b.spectrum, b.weights, b.noise_variance, n, 0.0, consts);
    for (double lam : {0.0, rep0.small_boundary / 2, 3 * rep0.small_boundary, 1.0}) {
      auto rep = thm_ridge_bounds(b.spectrum, b.weights, b.noise_variance, n, lam, consts);
      auto o = oracle_ridge(b.spectrum, b.weights, b.noise_variance, n, lam, consts.b);
      CHECK(rep.srisk_upper == doctest::Approx(o.srisk_upper).epsilon(1e-12));
      CHECK(rep.norm_lower == doctest::Approx(o.norm_lower).epsilon(1e-12));
    }
    CHECK_THROWS(thm_ridge_bounds(b.spectrum, b.weights, b.noise_variance, n, -1.0, consts));
  }
}

TEST_CASE("large-regime lower bounds match an independent transcription") {
  BoundConstants consts;
  auto b = spectra::make_spectrum(spectra::Family::Example1, 128, 4096);
  auto rep0 = small_reg_bounds(b.spectrum, b.weights, b.noise_variance, 128, consts);
  for (double mult : {1.0, 10.0, 1000.0}) {
    const double lam = rep0.small_boundary * mult;
    auto rep = large_reg_lower(b.spectrum, b.weights, b.noise_variance, 128, lam, consts);
    auto o = oracle_large(b.spectrum, b.weights, b.noise_variance, 128, lam);
    REQUIRE(rep.srisk_lower.has_value());
    CHECK(*rep.srisk_lower == doctest::Approx(o.srisk_upper).epsilon(1e-12));
    CHECK(rep.norm_lower == doctest::Approx(o.norm_lower).epsilon(1e-12));
  }
}

TEST_CASE("null model: no signal and no noise means zero bounds") {
  auto b = spectra::make_spectrum(spectra::Family::Example1, 64, 2048);
  auto zero = spectra::make_custom(b.spectrum.eigenvalues,
                                   Eigen::VectorXd::Zero(b.spectrum.truncation_dim), 1.0);
  BoundConstants consts;
  auto t = thm_ridge_bounds(zero.spectrum, zero.weights, 0.0, 64, 0.01, consts);
  CHECK(t.srisk_upper == 0.0);
  CHECK(t.norm_lower == 0.0);
  auto s = small_reg_bounds(zero.spectrum, zero.weights, 0.0, 64, consts);
  CHECK(s.srisk_upper == 0.0);
  CHECK(s.norm_lower == 0.0);
  auto l = large_reg_lower(zero.spectrum, zero.weights, 0.0, 64, 2.0, consts);
  CHECK(*l.srisk_lower == 0.0);
  CHECK(l.norm_lower == 0.0);
}

TEST_CASE("noise terms scale exactly linearly in the noise variance") {
  auto b = spectra::make_spectrum(spectra::Family::Example2, 64, 2048);
  BoundConstants consts;
  const double s2 = 0.37, t = 5.0;
  for (double lam : {0.0, 0.02, 0.9}) {
    auto base = thm_ridge_bounds(b.spectrum, b.weights, 0.0, 64, lam, consts);
    auto a = thm_ridge_bounds(b.spectrum, b.weights, s2, 64, lam, consts);
    auto c = thm_ridge_bounds(b.spectrum, b.weights, t * s2, 64, lam, consts);
    CHECK(c.srisk_upper - base.srisk_upper ==
          doctest::Approx(t * (a.srisk_upper - base.srisk_upper)).epsilon(1e-10));
    CHECK(c.norm_lower - base.norm_lower ==
          doctest::Approx(t * (a.norm_lower - base.norm_lower)).epsilon(1e-10));
  }
}

TEST_CASE("regime mismatch is rejected and the boundary is named") {
  auto b = spectra::make_spectrum(spectra::Family::Example1, 128, 4096);
  BoundConstants consts;
  const double boundary =
      small_reg_bounds(b.spectrum, b.weights, b.noise_variance, 128, consts).small_boundary;
  try {
    small_reg_bounds(b.spectrum, b.weights, b.noise_variance, 128, consts, 2 * boundary);
    FAIL("expected a regime mismatch error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("boundary") != std::string::npos);
  }
  try {
    large_reg_lower(b.spectrum, b.weights, b.noise_variance, 128, boundary / 2, consts);
    FAIL("expected a regime mismatch error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("boundary") != std::string::npos);
  }
  // missing critical index propagates as an error
  auto iso = spectra::make_spectrum(spectra::Family::Isotropic, 64, 32);
  CHECK_THROWS(thm_ridge_bounds(iso.spectrum, iso.weights, 1.0, 64, 0.0, consts));
}

TEST_CASE("small and large shapes agree within a factor of 4 at the boundary") {
  for (auto fam : {spectra::Family::Example1, spectra::Family::Example2}) {
    const int n = 128;
    auto b = spectra::make_spectrum(fam, n, fam == spectra::Family::Example1 ? 4096 : 2048);
    BoundConstants consts;
    auto s = small_reg_bounds(b.spectrum, b.weights, b.noise_variance, n, consts,
                              /*lambda=*/0.0);
    auto l = large_reg_lower(b.spectrum, b.weights, b.noise_variance, n,
                             s.small_boundary, consts);
    CHECK(l.norm_lower <= 4.0 * s.norm_lower);
    CHECK(s.norm_lower <= 4.0 * l.norm_lower);
  }
}

TEST_CASE("benign family trend: risk bound falls while the norm bound grows") {
  BoundConstants consts;
  double prev_srisk = std::numeric_limits<double>::infinity();
  double prev_norm = 0.0;
  for (int n : {256, 1024, 4096}) {
    auto b = spectra::make_spectrum(spectra::Family::Example1, n, 16 * n);
    auto rep = small_reg_bounds(b.spectrum, b.weights, b.noise_variance, n, consts);
    CHECK(rep.srisk_upper < prev_srisk);
    CHECK(rep.norm_lower > prev_norm);
    prev_srisk = rep.srisk_upper;
    prev_norm = rep.norm_lower;
  }

  // the lambda = 0 norm bound dominates its noise-driven core term
  auto b = spectra::make_spectrum(spectra::Family::Example1, 4096, 65536);
  auto rep = thm_ridge_bounds(b.spectrum, b.weights, b.noise_variance, 4096, 0.0, consts);
  const int k = *spectra::critical_index(b.spectrum, consts.b, 4096);
  const auto [r, R] = spectra::effective_ranks(b.spectrum, k);
  CHECK(rep.norm_lower >=
        4096.0 * b.noise_variance / (b.spectrum.eigenvalues(k) * r) * (1 - 1e-12));
}

TEST_CASE("benign-like isotropic overparameterization yields a positive norm floor") {
  const int n = 64;
  auto iso = spectra::make_spectrum(spectra::Family::Isotropic, n, 10 * n);
  BoundConstants consts;
  auto rep = small_reg_bounds(iso.spectrum, iso.weights, 1.0, n, consts);
  CHECK(rep.norm_lower > 0.0);
  CHECK(rep.srisk_upper > 0.0);
}

TEST_CASE("ceiling regularization keeps at least the signal energy") {
  auto b = spectra::make_spectrum(spectra::Family::Example1, 128, 4096);
  BoundConstants consts;
  const double lam1 = b.spectrum.eigenvalues(0);
  const double sig_energy =
      b.spectrum.eigenvalues.dot(b.weights.weights_sq);
  for (double lam : {lam1, 2 * lam1, 10 * lam1}) {
    auto rep = large_reg_lower(b.spectrum, b.weights, b.noise_variance, 128, lam, consts);
    CHECK(*rep.srisk_lower >= sig_energy * (1 - 1e-12));
  }

  // signal on a single coordinate below lambda
  Eigen::VectorXd ev(3), wq = Eigen::VectorXd::Zero(3);
  ev << 0.5, 0.53, 0.52;  // descending after family sort? keep custom-valid order
  std::sort(ev.data(), ev.data() + 3, std::greater<double>());
  wq(0) = 2.0;
  auto single = spectra::make_custom(ev, wq, 0.0);
  // critical index may not exist for a 3-point spectrum; evaluate the sum directly
  auto o = oracle_large(single.spectrum, single.weights, 0.0, 16, 1.0);
  CHECK(o.srisk_upper == doctest::Approx(wq(0) * ev(0)).epsilon(1e-14));
}

TEST_CASE("regime classification across the lambda axis") {
  const int n = 256;
  auto b = spectra::make_spectrum(spectra::Family::Example2, n, 4096);
  BoundConstants consts;
  const double ref_srisk = 1.0, ref_adv = 2.0, alpha = 0.5;

  auto zero = regime_classify(b.spectrum, b.weights, b.noise_variance, n, 0.0, alpha,
                              consts, ref_srisk, ref_adv);
  CHECK(zero.regime == Regime::SmallReg);
  CHECK(!zero.delta_lambda.has_value());

  const double lam1 = b.spectrum.eigenvalues(0);
  auto big = regime_classify(b.spectrum, b.weights, b.noise_variance, n, 2 * lam1, alpha,
                             consts, ref_srisk, ref_adv);
  CHECK(big.regime == Regime::LargeReg);

  const auto wstar = spectra::tradeoff_index(b.spectrum, b.weights, n, consts.b);
  REQUIRE(wstar.has_value());
  const double lam_w = *wstar == 0 ? lam1 : b.spectrum.eigenvalues(*wstar - 1);
  const double boundary = zero.small_boundary;
  if (boundary < lam_w) {
    const double lam = std::sqrt(boundary * lam_w);
    auto mid = regime_classify(b.spectrum, b.weights, b.noise_variance, n, lam, alpha,
                               consts, ref_srisk, ref_adv);
    CHECK(mid.regime == Regime::Intermediate);
    REQUIRE(mid.delta_lambda.has_value());
    CHECK(*mid.delta_lambda > 0.0);

    // re-derive Delta(lambda) from its definition
    const int k = *spectra::critical_index(b.spectrum, consts.b, n);
    const auto [r, R] = spectra::effective_ranks(b.spectrum, k);
    double num = 0, head_inv = 0, tail_sig = 0;
    for (int i = 0; i < b.spectrum.truncation_dim; ++i) {
      const double li = b.spectrum.eigenvalues(i), wi = b.weights.weights_sq(i);
      num += (li > lam) ? wi * lam * lam / li : wi * li;
      if (i < k)
        head_inv += wi / li;
      else
        tail_sig += wi * li;
    }
    const double lk1 = b.spectrum.eigenvalues(k);
    const double den = b.weights.weights_sq.sum() * (lk1 * lk1 * head_inv + tail_sig);
    const double second =
        alpha * alpha / (ref_adv * std::sqrt(std::max(double(k) / n, n / R)));
    CHECK(*mid.delta_lambda ==
          doctest::Approx(std::min(num / den, second)).epsilon(1e-10));
  }
}

TEST_CASE("calibrated once, the bounds dominate measured risks at larger n") {
  BoundConstants consts;
  auto calib = spectra::make_spectrum(spectra::Family::Example1, 64, 1024);
  auto d0 = datagen::sample_design(calib.spectrum, 64, datagen::DesignDist::Gaussian, 404);
  auto m0 = risk::conditional_moments(d0.X, 0.0, calib.spectrum, calib.weights,
                                      calib.noise_variance);
  auto b0 = thm_ridge_bounds(calib.spectrum, calib.weights, calib.noise_variance, 64, 0.0,
                             consts);
  const double C1 = std::max(1.0, m0.std_total / b0.srisk_upper) * 1.5;
  const double C2 = std::max(1.0, b0.norm_lower / m0.norm_total) * 1.5;

  for (int n : {128, 256}) {
    auto b = spectra::make_spectrum(spectra::Family::Example1, n, 16 * n);
    auto d = datagen::sample_design(b.spectrum, n, datagen::DesignDist::Gaussian, 404 + n);
    auto m = risk::conditional_moments(d.X, 0.0, b.spectrum, b.weights, b.noise_variance);
    auto rep = thm_ridge_bounds(b.spectrum, b.weights, b.noise_variance, n, 0.0, consts);
    CHECK(C1 * rep.srisk_upper >= m.std_total);
    CHECK(rep.norm_lower <= C2 * m.norm_total);
  }
}
