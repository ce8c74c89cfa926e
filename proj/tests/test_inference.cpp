#include <doctest.h>

#include <cmath>
#include <random>

#include "hbt/inference.hpp"

using namespace hbt;

namespace {

Eigen::VectorXd bin_centers(double width, double range) {
  const auto n = static_cast<Index>(std::llround(2.0 * range / width));
  Eigen::VectorXd tau(n);
  for (Index i = 0; i < n; ++i) tau[i] = -range + (static_cast<double>(i) + 0.5) * width;
  return tau;
}

Eigen::VectorXd noiseless(const Eigen::VectorXd& tau, double a, double b, double tau_c) {
  Eigen::VectorXd y(tau.size());
  for (Index i = 0; i < tau.size(); ++i) y[i] = a + b * std::exp(-std::abs(2.0 * tau[i] / tau_c));
  return y;
}

Eigen::VectorXd poisson_sample(const Eigen::VectorXd& mean, std::mt19937_64& rng) {
  Eigen::VectorXd y(mean.size());
  for (Index i = 0; i < mean.size(); ++i) y[i] = static_cast<double>(std::poisson_distribution<long long>(mean[i])(rng));
  return y;
}

}  // namespace

TEST_SUITE("inference") {

TEST_CASE("noiseless data are recovered exactly") {
  const auto tau = bin_centers(16e-12, 5.008e-9);
  const auto y = noiseless(tau, 1000.0, 800.0, 0.436e-9);
  const auto fit = fit_bunching(tau, y);
  CHECK(fit.converged);
  CHECK(fit.a == doctest::Approx(1000.0).epsilon(1e-8));
  CHECK(fit.b == doctest::Approx(800.0).epsilon(1e-8));
  CHECK(fit.tau_c == doctest::Approx(0.436e-9).epsilon(1e-8));
  CHECK(fit.chi2_reduced < 1e-12);
  CHECK(fit.dof == tau.size() - 3);
  CHECK(chi2_reduced(tau, y, fit) < 1e-12);
  CHECK((model_counts(tau, {fit.a, fit.b, fit.tau_c}) - y).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("g2(0) and its propagated error") {
  const auto tau = bin_centers(16e-12, 5.008e-9);
  std::mt19937_64 rng(3);
  const auto y = poisson_sample(noiseless(tau, 400.0, 300.0, 0.4e-9), rng);
  const auto fit = fit_bunching(tau, y);
  const auto [g0, err] = g2_zero(fit);
  CHECK(g0 == doctest::Approx(1.0 + fit.b / fit.a));
  CHECK(fit.g2_zero == doctest::Approx(g0));
  // First-order propagation written out by hand.
  const Eigen::Matrix3d& c = fit.covariance;
  const double da = -fit.b / (fit.a * fit.a);
  const double db = 1.0 / fit.a;
  const double var = da * da * c(0, 0) + db * db * c(1, 1) + 2.0 * da * db * c(0, 1);
  CHECK(err == doctest::Approx(std::sqrt(var)));
  CHECK(fit.g2_zero_err == doctest::Approx(err));
  CHECK(c.isApprox(c.transpose()));
  CHECK(fit.a_err() > 0.0);
}

TEST_CASE("flat and empty histograms are degenerate") {
  const auto tau = bin_centers(16e-12, 5.008e-9);
  const Eigen::VectorXd flat = Eigen::VectorXd::Constant(tau.size(), 500.0);
  try {
    (void)fit_bunching(tau, flat);
    FAIL("expected DegenerateFitError");
  } catch (const DegenerateFitError& e) {
    CHECK(e.baseline() == doctest::Approx(500.0));
  }
  CHECK_THROWS_AS(fit_bunching(tau, Eigen::VectorXd::Zero(tau.size())), DegenerateFitError);
  CHECK_THROWS_AS(fit_bunching(tau.head(5), flat.head(5)), DomainError);
}

TEST_CASE("mirror symmetry and scale equivariance") {
  const auto tau = bin_centers(20e-12, 4e-9);
  std::mt19937_64 rng(8);
  const auto y = poisson_sample(noiseless(tau, 300.0, 150.0, 0.5e-9), rng);
  const auto fit = fit_bunching(tau, y);

  const Eigen::VectorXd mirrored = y.reverse();
  const auto fit_m = fit_bunching(tau, mirrored);
  CHECK(fit_m.tau_c == doctest::Approx(fit.tau_c).epsilon(1e-7));
  CHECK(fit_m.b == doctest::Approx(fit.b).epsilon(1e-7));

  const Eigen::VectorXd stretched = 3.0 * tau;
  const auto fit_s = fit_bunching(stretched, y);
  CHECK(fit_s.tau_c == doctest::Approx(3.0 * fit.tau_c).epsilon(1e-7));
  CHECK(fit_s.a == doctest::Approx(fit.a).epsilon(1e-7));

  // Scaling noiseless counts scales a and b and leaves tau_c alone.
  const auto clean = noiseless(tau, 300.0, 150.0, 0.5e-9);
  const auto f1 = fit_bunching(tau, clean);
  const auto f7 = fit_bunching(tau, 7.0 * clean);
  CHECK(f7.a == doctest::Approx(7.0 * f1.a).epsilon(1e-8));
  CHECK(f7.b == doctest::Approx(7.0 * f1.b).epsilon(1e-8));
  CHECK(f7.tau_c == doctest::Approx(f1.tau_c).epsilon(1e-8));
}

TEST_CASE("converges from scattered starting points") {
  const auto tau = bin_centers(16e-12, 5.008e-9);
  std::mt19937_64 rng(12);
  const auto y = poisson_sample(noiseless(tau, 250.0, 200.0, 0.436e-9), rng);
  const auto ref = fit_bunching(tau, y);
  std::uniform_real_distribution<double> factor(std::log(0.5), std::log(2.0));
  for (int i = 0; i < 25; ++i) {
    FitOptions opts;
    opts.initial_guess = BunchingParameters{250.0 * std::exp(factor(rng)), 200.0 * std::exp(factor(rng)),
                                            0.436e-9 * std::exp(factor(rng))};
    const auto fit = fit_bunching(tau, y, opts);
    CHECK(fit.converged);
    CHECK(fit.tau_c == doctest::Approx(ref.tau_c).epsilon(1e-6));
  }
}

TEST_CASE("default initial guess is in the right neighbourhood") {
  const auto tau = bin_centers(16e-12, 5.008e-9);
  const auto y = noiseless(tau, 100.0, 90.0, 0.4e-9);
  const auto g = default_initial_guess(tau, y);
  CHECK(g.a == doctest::Approx(100.0).epsilon(1e-3));
  CHECK(g.b == doctest::Approx(90.0).epsilon(0.05));
  CHECK(g.tau_c == doctest::Approx(0.4e-9).epsilon(0.1));
}

TEST_CASE("excluding the centre drops bins from the fit") {
  const auto tau = bin_centers(16e-12, 5.008e-9);
  Eigen::VectorXd y = noiseless(tau, 1000.0, 800.0, 0.436e-9);
  const Index mid = tau.size() / 2;
  y[mid] += 5000.0;  // crosstalk spike
  y[mid - 1] += 5000.0;
  FitOptions opts;
  opts.exclude_center = 20e-12;
  const auto fit = fit_bunching(tau, y, opts);
  CHECK(fit.dof == tau.size() - 2 - 3);
  CHECK(fit.tau_c == doctest::Approx(0.436e-9).epsilon(1e-7));
}

TEST_CASE("Monte Carlo: error bars cover and chi2 is near one") {
  const auto tau = bin_centers(32e-12, 4e-9);
  const double tau_c = 0.436e-9;
  const auto mean = noiseless(tau, 400.0, 200.0, tau_c);
  std::mt19937_64 rng(77);
  const int trials = 300;
  int covered = 0;
  double chi2 = 0.0;
  for (int t = 0; t < trials; ++t) {
    const auto fit = fit_bunching(tau, poisson_sample(mean, rng));
    if (std::abs(fit.tau_c - tau_c) <= fit.tau_c_err()) ++covered;
    chi2 += fit.chi2_reduced;
  }
  const double fraction = static_cast<double>(covered) / trials;
  // 68.3% expected; binomial sd ~ 2.7% at 300 trials.
  CHECK(fraction > 0.60);
  CHECK(fraction < 0.77);
  CHECK(chi2 / trials == doctest::Approx(1.0).epsilon(0.05));
}

}  // TEST_SUITE
