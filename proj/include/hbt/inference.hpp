#pragma once

// Weighted least-squares fit of the bunching model N(tau) = a + b exp(-|2 tau / tau_c|)
// to coincidence histograms.

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <utility>

#include "hbt/correlator.hpp"

namespace hbt {

template <class Scalar>
Scalar bunching_model(Scalar tau, Scalar a, Scalar b, Scalar tau_c) {
  using std::abs;
  using std::exp;
  return a + b * exp(-abs(Scalar(2) * tau / tau_c));
}

struct BunchingParameters {
  double a = 0.0;
  double b = 0.0;
  double tau_c = 0.0;  // s
};

struct FitOptions {
  std::optional<BunchingParameters> initial_guess;
  /// Bins with |tau| below this are left out (crosstalk-contaminated data). Off by default.
  double exclude_center = 0.0;
  int max_iterations = 200;
  double tolerance = 1e-10;
};

struct FitResult {
  double a = 0.0;
  double b = 0.0;
  double tau_c = 0.0;
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();  // (a, b, tau_c)
  double g2_zero = 1.0;
  double g2_zero_err = 0.0;
  double chi2_reduced = 0.0;
  int dof = 0;
  int iterations = 0;
  bool converged = false;

  double a_err() const { return std::sqrt(covariance(0, 0)); }
  double b_err() const { return std::sqrt(covariance(1, 1)); }
  double tau_c_err() const { return std::sqrt(covariance(2, 2)); }
};

/// Singular normal matrix: the peak is not identifiable. Carries the
/// weighted-mean baseline as a fallback.
class DegenerateFitError : public NumericalError {
 public:
  DegenerateFitError(const std::string& what, double baseline) : NumericalError(what), baseline_(baseline) {}
  double baseline() const noexcept { return baseline_; }

 private:
  double baseline_;
};

class NonConvergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// a0 = mean of the outer 20% of bins, b0 = max(peak - a0, a0 / 100),
/// tau_c0 = 2 * |tau| where the excess first drops below b0 / e.
BunchingParameters default_initial_guess(const Eigen::VectorXd& tau, const Eigen::VectorXd& counts);

/// Damped Gauss-Newton (Levenberg-Marquardt) on (a, b, log tau_c) with Poisson
/// weights w_i = max(N_i, 1). Counts may be non-integer (noiseless model data).
FitResult fit_bunching(const Eigen::VectorXd& tau, const Eigen::VectorXd& counts, const FitOptions& opts = {});
FitResult fit_bunching(const CoincidenceHistogram& h, const FitOptions& opts = {});

/// (1 + b / a, first-order propagated error).
std::pair<double, double> g2_zero(const FitResult& fit);

/// sum (N_i - model_i)^2 / max(N_i, 1) over dof = bins - 3.
double chi2_reduced(const Eigen::VectorXd& tau, const Eigen::VectorXd& counts, const FitResult& fit,
                    double exclude_center = 0.0);
double chi2_reduced(const CoincidenceHistogram& h, const FitResult& fit, double exclude_center = 0.0);

/// Expected (noiseless) counts of the model at the histogram bin centres.
Eigen::VectorXd model_counts(const Eigen::VectorXd& tau, const BunchingParameters& p);

}  // namespace hbt
