#pragma once

// Theory layer: complex degree of coherence from a spectrum, g2 = 1 + |gamma|^2,
// coherence time, detector-response smearing, and mode dilution.

#include <Eigen/Dense>

#include <complex>

#include "hbt/spectral.hpp"

namespace hbt {

/// Samples on a symmetric delay grid tau_i = (i - center) * tau_step, odd length.
template <class Vector>
struct DelayCurve {
  double tau_step = 0.0;
  Vector values;

  Index size() const { return values.size(); }
  Index center() const { return (values.size() - 1) / 2; }
  double tau(Index i) const { return static_cast<double>(i - center()) * tau_step; }
  double tau_max() const { return static_cast<double>(center()) * tau_step; }
};

/// gamma(tau), normalized so gamma(0) = 1, Hermitian: gamma(-tau) = conj(gamma(tau)).
using ComplexCoherence = DelayCurve<Eigen::VectorXcd>;
/// Real, even g2(tau).
using G2Curve = DelayCurve<Eigen::VectorXd>;

/// Timing response of one detector: Gaussian core plus, with probability
/// tail_weight, an extra one-sided exponential delay (mean tail_decay).
/// A zero core FWHM and zero tail weight is the ideal (delta) response.
struct DetectorResponse {
  double core_fwhm = 0.0;   // s
  double tail_weight = 0.0;
  double tail_decay = 0.0;  // s

  double core_weight() const { return 1.0 - tail_weight; }
  double core_sigma() const { return core_fwhm / constants::gaussian_fwhm_per_sigma; }
  bool is_ideal() const { return core_fwhm == 0.0 && (tail_weight == 0.0 || tail_decay == 0.0); }

  /// Per-detector response whose pair (difference) core has FWHM `pair_fwhm`.
  static DetectorResponse from_pair_fwhm(double pair_fwhm, double tail_weight = 0.10, double tail_decay = 150e-12);
};

void validate(const DetectorResponse& r);

/// Cumulative distribution of the response delay.
double response_cdf(const DetectorResponse& r, double t);

/// Default delay step: tau_c_estimate / 100, tau_c_estimate = 1 / (pi * half-max width of S).
double default_tau_step(const SpectralDensity& s);

/// gamma(tau) = sum_i w_i S_i exp(-i 2 pi nu_i tau) / sum_i w_i S_i (trapezoidal weights),
/// evaluated directly on the requested delay grid. Requires tau_max * nu_step <= 0.1
/// so the periodic image of the discrete transform stays outside the grid.
ComplexCoherence gamma_from_spectrum(const SpectralDensity& s, double tau_max, double tau_step);

/// Pointwise 1 + |gamma|^2.
G2Curve g2_theory(const ComplexCoherence& gamma);

/// Equivalent width: integral of |gamma|^2 over the full grid (trapezoidal).
/// Throws if |gamma|^2 has not decayed below 1e-3 at the grid edge.
double coherence_time(const ComplexCoherence& gamma);

/// Same definition evaluated from the spectrum alone by Parseval:
/// integral S^2 / (integral S)^2.
double coherence_time_from_spectrum(const SpectralDensity& s);

/// Discrete density of (jitter_B - jitter_A) on a grid of step `step`,
/// offsets -half..half. Sums to exactly 1.
Eigen::VectorXd pair_kernel(const DetectorResponse& a, const DetectorResponse& b, double step, Index half);

/// 1 + [(g2 - 1) conv x](tau) with x the density of jitter_B - jitter_A.
G2Curve convolve_detector(const G2Curve& g2, const DetectorResponse& a, const DetectorResponse& b);

/// Zero-delay excess g2(0) - 1 of exp(-|2 tau / tau_c|) smeared by a Gaussian
/// pair response of FWHM tau_t. Evaluated by quadrature.
double scarl_contrast(double tau_c, double tau_t);

/// 1 + (g2 - 1) / modes.
G2Curve mode_dilute(const G2Curve& g2, int modes);

}  // namespace hbt
