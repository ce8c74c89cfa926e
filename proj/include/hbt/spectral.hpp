#pragma once

// Source spectra and the optical filter chain (bandpass, grating monochromator,
// temperature-tuned etalon). Frequencies in Hz, wavelengths in m, temperatures
// in K. Spectral densities are in relative units: only the shape matters.

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "hbt/constants.hpp"
#include "hbt/errors.hpp"

namespace hbt {

using Eigen::Index;

/// Uniform frequency grid nu_i = nu_start + i * nu_step, i in [0, size).
struct FrequencyGrid {
  double nu_start = 0.0;
  double nu_step = 0.0;
  Index size = 0;

  double nu(Index i) const { return nu_start + static_cast<double>(i) * nu_step; }
  double nu_end() const { return nu(size - 1); }
  double span() const { return nu_step * static_cast<double>(size - 1); }
  Eigen::VectorXd nodes() const;

  /// Grid centred on `center` covering at least [center - half_span, center + half_span].
  static FrequencyGrid centered(double center, double half_span, double step);
};

/// Sampled optical power spectrum S(nu) on a uniform grid.
///
/// Invariants (checked on construction): at least two points, strictly
/// increasing grid, all values finite and >= 0, positive finite integral.
class SpectralDensity {
 public:
  SpectralDensity(FrequencyGrid grid, Eigen::VectorXd values);

  const FrequencyGrid& grid() const { return grid_; }
  const Eigen::VectorXd& values() const { return values_; }
  Index size() const { return grid_.size; }
  double nu(Index i) const { return grid_.nu(i); }
  double nu_start() const { return grid_.nu_start; }
  double nu_step() const { return grid_.nu_step; }

  /// Trapezoidal integral over the grid.
  double integral() const;
  /// Power-weighted mean frequency.
  double centroid() const;
  /// Linear interpolation; zero outside the grid.
  double operator()(double nu) const;

 private:
  FrequencyGrid grid_;
  Eigen::VectorXd values_;
};

// ---------------------------------------------------------------------------
// Pointwise physics kernels.

/// Relative Planck density x^3/(e^x - 1) with x = h nu / (k T), i.e. proportional
/// to nu^3/(exp(h nu/kT) - 1) at fixed T.
template <class Scalar>
Scalar planck_density(Scalar temperature, Scalar nu) {
  using std::expm1;
  if (!(temperature > Scalar(0)) || !(nu > Scalar(0)))
    throw DomainError("planck_density: temperature and frequency must be positive");
  const Scalar x = Scalar(constants::planck) * nu / (Scalar(constants::boltzmann) * temperature);
  return x * x * x / expm1(x);
}

/// Gaussian Doppler FWHM nu0 * sqrt(8 k T ln2 / (m c^2)).
double doppler_fwhm(double nu0, double temperature, double atomic_mass);

enum class LineShape { Gaussian, Lorentzian };

struct LineComponent {
  double center = 0.0;  // Hz
  double fwhm = 0.0;    // Hz
  double weight = 1.0;
  LineShape shape = LineShape::Gaussian;
};

/// Unit-area line profile evaluated at nu.
template <class Scalar>
Scalar line_profile(LineShape shape, Scalar center, Scalar fwhm, Scalar nu) {
  using std::exp;
  using std::sqrt;
  const Scalar d = nu - center;
  if (shape == LineShape::Gaussian) {
    const Scalar sigma = fwhm / Scalar(constants::gaussian_fwhm_per_sigma);
    return exp(-d * d / (Scalar(2) * sigma * sigma)) / (sigma * sqrt(Scalar(2) * Scalar(constants::pi)));
  }
  const Scalar hw = fwhm / Scalar(2);
  return hw / (Scalar(constants::pi) * (d * d + hw * hw));
}

/// Gaussian transmission profile in wavelength: peak * exp(-4 ln2 (l - l0)^2 / fwhm^2).
template <class Scalar>
Scalar gaussian_passband(Scalar peak, Scalar center, Scalar fwhm, Scalar wavelength) {
  using std::exp;
  const Scalar d = (wavelength - center) / fwhm;
  return peak * exp(Scalar(-4) * Scalar(constants::ln2) * d * d);
}

// ---------------------------------------------------------------------------
// Filters.

struct BandpassFilter {
  double center_wavelength = 546.1e-9;
  double fwhm_wavelength = 3e-9;
  double peak_transmission = 1.0;
};

struct GratingFilter {
  double center_wavelength = 546.1e-9;
  double fwhm_wavelength = 0.122e-9;
  double peak_transmission = 0.15;
};

struct EtalonFilter {
  double thickness = 0.5e-3;
  double refractive_index = 1.46;
  double reflectivity = 0.97;
  double set_temperature = 293.15;
  double reference_temperature = 293.15;
  double tuning_rate = -4.1e9;  // Hz/K
  double loss_factor = 1.0;     // peak transmission; lossless by default
};

using Filter = std::variant<BandpassFilter, GratingFilter, EtalonFilter>;

void validate(const BandpassFilter& f);
void validate(const GratingFilter& f);
void validate(const EtalonFilter& f);

double bandpass_transmission(const BandpassFilter& f, double wavelength);
double grating_transmission(const GratingFilter& f, double wavelength);

/// Free spectral range c / (2 n d).
double etalon_fsr(const EtalonFilter& f);
/// Reflective finesse pi sqrt(R) / (1 - R).
double etalon_finesse(const EtalonFilter& f);
/// Exact FWHM of one Airy peak, (2 FSR / pi) asin(pi / (2 F)).
double etalon_fwhm(const EtalonFilter& f);
/// Rigid comb shift tuning_rate * (set - reference temperature).
double etalon_shift(const EtalonFilter& f);

/// Airy transmission loss / (1 + (2F/pi)^2 sin^2(pi (nu - shift) / FSR)).
template <class Scalar>
Scalar airy_transmission(Scalar fsr, Scalar finesse, Scalar shift, Scalar nu) {
  using std::sin;
  const Scalar coeff = Scalar(2) * finesse / Scalar(constants::pi);
  const Scalar s = sin(Scalar(constants::pi) * (nu - shift) / fsr);
  return Scalar(1) / (Scalar(1) + coeff * coeff * s * s);
}

double etalon_transmission(const EtalonFilter& f, double nu);

/// Copy of `f` with set_temperature chosen (smallest |dT|) so that a
/// transmission peak sits exactly on nu_target.
EtalonFilter tuned_to(const EtalonFilter& f, double nu_target);

/// Transmission of any filter at optical frequency nu.
double transmission(const Filter& f, double nu);

// ---------------------------------------------------------------------------
// Spectra.

SpectralDensity planck_spectrum(double temperature, const FrequencyGrid& grid);

/// Sum of weighted unit-area profiles. The grid must cover every line centre
/// +/- 10 FWHM; otherwise throws DomainError naming the line.
SpectralDensity line_set_density(std::span<const LineComponent> lines, const FrequencyGrid& grid);

/// Flat (white) spectrum on the grid.
SpectralDensity flat_spectrum(const FrequencyGrid& grid);

/// Pointwise product of the source with every filter; grid unchanged.
/// Throws DegenerateSpectrumError when no power survives.
SpectralDensity compose_chain(const SpectralDensity& source, std::span<const Filter> filters);

/// Default grid for a grating + etalon chain: grating window +/- 5 grating FWHM,
/// step <= etalon FWHM / 50.
FrequencyGrid filter_chain_grid(const GratingFilter& grating, const EtalonFilter& etalon);

/// Full width at half maximum of the highest peak, linearly interpolated.
double half_max_width(const SpectralDensity& s);

inline double wavelength_to_frequency(double wavelength) { return constants::speed_of_light / wavelength; }
inline double frequency_to_wavelength(double nu) { return constants::speed_of_light / nu; }

}  // namespace hbt
