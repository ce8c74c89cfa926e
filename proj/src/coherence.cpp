#include "hbt/coherence.hpp"

#include <algorithm>
#include <cmath>

namespace hbt {

namespace {

constexpr double two_pi = 2.0 * constants::pi;

double normal_cdf(double u) { return 0.5 * std::erfc(-u / std::sqrt(2.0)); }

double log_normal_cdf(double u) {
  if (u > -30.0) return std::log(normal_cdf(u));
  // Mills-ratio asymptotic expansion for the far left tail.
  const double u2 = u * u;
  return -0.5 * u2 - std::log(-u) - 0.5 * std::log(two_pi) + std::log1p(-1.0 / u2 + 3.0 / (u2 * u2));
}

double core_cdf(double sigma, double t) {
  if (sigma == 0.0) return t >= 0.0 ? 1.0 : 0.0;
  return normal_cdf(t / sigma);
}

// Gaussian(sigma) + Exp(tau) delay.
double exgauss_cdf(double sigma, double tau, double t) {
  if (sigma == 0.0) return t >= 0.0 ? -std::expm1(-t / tau) : 0.0;
  const double z = t / sigma;
  const double r = sigma / tau;
  const double log_term = -t / tau + 0.5 * r * r + log_normal_cdf(z - r);
  return std::clamp(normal_cdf(z) - std::exp(log_term), 0.0, 1.0);
}

struct Pmf {
  Index offset = 0;  // grid index of values[0]
  Eigen::VectorXd values;
};

// Bin masses on bins centred at j * step.
Pmf response_pmf(const DetectorResponse& r, double step) {
  if (r.is_ideal()) return {0, Eigen::VectorXd::Ones(1)};
  const double sigma = r.core_sigma();
  const double tail = r.tail_weight > 0.0 ? r.tail_decay : 0.0;
  const auto lo = -static_cast<Index>(std::ceil(9.0 * sigma / step)) - 1;
  const auto hi = static_cast<Index>(std::ceil((9.0 * sigma + 40.0 * tail) / step)) + 1;
  Pmf p{lo, Eigen::VectorXd(hi - lo + 1)};
  double prev = response_cdf(r, (static_cast<double>(lo) - 0.5) * step);
  for (Index j = lo; j <= hi; ++j) {
    const double next = response_cdf(r, (static_cast<double>(j) + 0.5) * step);
    p.values[j - lo] = std::max(next - prev, 0.0);
    prev = next;
  }
  p.values /= p.values.sum();
  return p;
}

}  // namespace

DetectorResponse DetectorResponse::from_pair_fwhm(double pair_fwhm, double tail_weight, double tail_decay) {
  return {pair_fwhm / std::sqrt(2.0), tail_weight, tail_decay};
}

void validate(const DetectorResponse& r) {
  if (!(r.core_fwhm >= 0.0) || !std::isfinite(r.core_fwhm)) throw DomainError("detector response: core FWHM must be >= 0");
  if (!(r.tail_weight >= 0.0 && r.tail_weight <= 1.0))
    throw DomainError("detector response: tail weight must lie in [0, 1]");
  if (!(r.tail_decay >= 0.0) || !std::isfinite(r.tail_decay))
    throw DomainError("detector response: tail decay must be >= 0");
}

double response_cdf(const DetectorResponse& r, double t) {
  const double sigma = r.core_sigma();
  const double core = core_cdf(sigma, t);
  if (r.tail_weight == 0.0 || r.tail_decay == 0.0) return core;
  return r.core_weight() * core + r.tail_weight * exgauss_cdf(sigma, r.tail_decay, t);
}

double default_tau_step(const SpectralDensity& s) {
  double width = 0.0;
  try {
    width = half_max_width(s);
  } catch (const NumericalError&) {
    width = s.grid().span();
  }
  return 1.0 / (constants::pi * width) / 100.0;
}

ComplexCoherence gamma_from_spectrum(const SpectralDensity& s, double tau_max, double tau_step) {
  if (!(tau_step > 0.0) || !(tau_max >= tau_step))
    throw DomainError("gamma_from_spectrum: need tau_max >= tau_step > 0");
  if (tau_max * s.nu_step() > 0.1)
    throw DomainError("gamma_from_spectrum: spectral grid too coarse for tau_max (need tau_max * nu_step <= 0.1)");

  const Index n = s.size();
  Eigen::VectorXd w = s.values();
  w[0] *= 0.5;
  w[n - 1] *= 0.5;
  const double norm = w.sum();
  if (!(norm > 0.0)) throw DegenerateSpectrumError("gamma_from_spectrum: spectrum has no power");
  w /= norm;

  const auto half = static_cast<Index>(std::floor(tau_max / tau_step + 1e-9));
  ComplexCoherence gamma{tau_step, Eigen::VectorXcd(2 * half + 1)};
  gamma.values[half] = 1.0;

  constexpr Index resync = 256;
  const double nu0 = s.nu_start();
  const double dnu = s.nu_step();
  for (Index k = 1; k <= half; ++k) {
    const double tau = static_cast<double>(k) * tau_step;
    const double cycles_step = dnu * tau;
    const std::complex<double> rot = std::polar(1.0, -two_pi * std::fmod(cycles_step, 1.0));
    std::complex<double> acc = 0.0;
    std::complex<double> phase;
    for (Index i = 0; i < n; ++i) {
      if (i % resync == 0) phase = std::polar(1.0, -two_pi * std::fmod(static_cast<double>(i) * cycles_step, 1.0));
      acc += w[i] * phase;
      phase *= rot;
    }
    const std::complex<double> carrier = std::polar(1.0, -two_pi * std::fmod(nu0 * tau, 1.0));
    const std::complex<double> g = carrier * acc;
    gamma.values[half + k] = g;
    gamma.values[half - k] = std::conj(g);
  }
  return gamma;
}

G2Curve g2_theory(const ComplexCoherence& gamma) {
  return {gamma.tau_step, (1.0 + gamma.values.array().abs2()).matrix()};
}

double coherence_time(const ComplexCoherence& gamma) {
  const Eigen::ArrayXd p = gamma.values.array().abs2();
  const Index n = p.size();
  if (n < 3) throw DomainError("coherence_time: delay grid too short");
  if (p[0] >= 1e-3 || p[n - 1] >= 1e-3)
    throw NumericalError("coherence_time: |gamma|^2 has not decayed below 1e-3 at the grid edge; increase tau_max");
  return gamma.tau_step * (p.sum() - 0.5 * (p[0] + p[n - 1]));
}

double coherence_time_from_spectrum(const SpectralDensity& s) {
  const Eigen::ArrayXd v = s.values().array();
  const Index n = v.size();
  const double sq = s.nu_step() * ((v * v).sum() - 0.5 * (v[0] * v[0] + v[n - 1] * v[n - 1]));
  const double total = s.integral();
  return sq / (total * total);
}

Eigen::VectorXd pair_kernel(const DetectorResponse& a, const DetectorResponse& b, double step, Index half) {
  validate(a);
  validate(b);
  if (!(step > 0.0)) throw DomainError("pair_kernel: step must be positive");
  const Pmf pa = response_pmf(a, step);
  const Pmf pb = response_pmf(b, step);
  // x[d] = sum_j pb[j + d] pa[j], d = jB - jA.
  const Index d_lo = pb.offset - (pa.offset + pa.values.size() - 1);
  const Index d_hi = (pb.offset + pb.values.size() - 1) - pa.offset;
  Eigen::VectorXd full = Eigen::VectorXd::Zero(d_hi - d_lo + 1);
  for (Index ia = 0; ia < pa.values.size(); ++ia) {
    const double wa = pa.values[ia];
    if (wa == 0.0) continue;
    const Index ja = pa.offset + ia;
    for (Index ib = 0; ib < pb.values.size(); ++ib) {
      full[(pb.offset + ib - ja) - d_lo] += wa * pb.values[ib];
    }
  }
  double outside = 0.0;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(2 * half + 1);
  for (Index d = d_lo; d <= d_hi; ++d) {
    const double m = full[d - d_lo];
    if (d < -half || d > half) {
      outside += m;
    } else {
      x[d + half] = m;
    }
  }
  if (outside > 1e-9) throw DomainError("detector response is wider than the delay grid span");
  return x / x.sum();
}

G2Curve convolve_detector(const G2Curve& g2, const DetectorResponse& a, const DetectorResponse& b) {
  const Index n = g2.size();
  if (n < 3 || n % 2 == 0) throw DomainError("convolve_detector: g2 must live on an odd symmetric grid");
  const Index half = n - 1;
  const Eigen::VectorXd x = pair_kernel(a, b, g2.tau_step, half);

  // Only the non-negligible part of the kernel is applied.
  Index k_lo = 0;
  Index k_hi = x.size() - 1;
  while (k_lo < k_hi && x[k_lo] == 0.0) ++k_lo;
  while (k_hi > k_lo && x[k_hi] == 0.0) --k_hi;

  const Eigen::VectorXd excess = g2.values.array() - 1.0;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (Index k = k_lo; k <= k_hi; ++k) {
    const double w = x[k];
    if (w == 0.0) continue;
    const Index shift = k - half;  // out[i] += w * excess[i - shift]
    const Index i_lo = std::max<Index>(0, shift);
    const Index i_hi = std::min<Index>(n - 1, n - 1 + shift);
    if (i_lo > i_hi) continue;
    out.segment(i_lo, i_hi - i_lo + 1) += w * excess.segment(i_lo - shift, i_hi - i_lo + 1);
  }
  return {g2.tau_step, (out.array() + 1.0).matrix()};
}

double scarl_contrast(double tau_c, double tau_t) {
  if (!(tau_c > 0.0) || !(tau_t >= 0.0)) throw DomainError("scarl_contrast: tau_c must be > 0 and tau_t >= 0");
  if (tau_t == 0.0) return 1.0;
  // excess = integral exp(-2|s|/tau_c) phi_sigma(s) ds; with u = 2 s / tau_c and
  // q = 2 sigma / tau_c: (2 / (q sqrt(2 pi))) integral_0^inf exp(-u - u^2 / (2 q^2)) du.
  const double sigma = tau_t / constants::gaussian_fwhm_per_sigma;
  const double q = 2.0 * sigma / tau_c;
  const double upper = std::min(60.0, 12.0 * q);
  constexpr int intervals = 20000;
  const double h = upper / intervals;
  auto f = [q](double u) { return std::exp(-u - u * u / (2.0 * q * q)); };
  double sum = f(0.0) + f(upper);
  for (int i = 1; i < intervals; ++i) sum += (i % 2 ? 4.0 : 2.0) * f(i * h);
  const double integral = sum * h / 3.0;
  return 2.0 / (q * std::sqrt(two_pi)) * integral;
}

G2Curve mode_dilute(const G2Curve& g2, int modes) {
  if (modes < 1) throw DomainError("mode_dilute: number of modes must be >= 1");
  return {g2.tau_step, (1.0 + (g2.values.array() - 1.0) / static_cast<double>(modes)).matrix()};
}

}  // namespace hbt
