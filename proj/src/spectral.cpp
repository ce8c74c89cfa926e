#include "hbt/spectral.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

namespace hbt {

Eigen::VectorXd FrequencyGrid::nodes() const {
  return Eigen::VectorXd::LinSpaced(size, nu_start, nu_end());
}

FrequencyGrid FrequencyGrid::centered(double center, double half_span, double step) {
  if (!(step > 0.0) || !(half_span > 0.0))
    throw DomainError("FrequencyGrid::centered: step and half-span must be positive");
  const auto half = static_cast<Index>(std::ceil(half_span / step));
  return {center - static_cast<double>(half) * step, step, 2 * half + 1};
}

SpectralDensity::SpectralDensity(FrequencyGrid grid, Eigen::VectorXd values)
    : grid_(grid), values_(std::move(values)) {
  if (grid_.size < 2) throw DomainError("SpectralDensity: at least 2 grid points required");
  if (!(grid_.nu_step > 0.0) || !std::isfinite(grid_.nu_step))
    throw DomainError("SpectralDensity: grid step must be positive");
  if (values_.size() != grid_.size) throw DomainError("SpectralDensity: value count does not match grid");
  for (Index i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i]) || values_[i] < 0.0)
      throw DomainError("SpectralDensity: value at index " + std::to_string(i) + " is negative or non-finite");
  }
  const double total = integral();
  if (!(total > 0.0) || !std::isfinite(total))
    throw DegenerateSpectrumError("SpectralDensity: integral must be finite and positive");
}

double SpectralDensity::integral() const {
  const Index n = values_.size();
  return grid_.nu_step * (values_.sum() - 0.5 * (values_[0] + values_[n - 1]));
}

double SpectralDensity::centroid() const {
  const Eigen::VectorXd nu = grid_.nodes();
  Eigen::VectorXd w = values_;
  w[0] *= 0.5;
  w[w.size() - 1] *= 0.5;
  return nu.dot(w) / w.sum();
}

double SpectralDensity::operator()(double nu) const {
  const double x = (nu - grid_.nu_start) / grid_.nu_step;
  if (x < 0.0 || x > static_cast<double>(grid_.size - 1)) return 0.0;
  const auto i = std::min(static_cast<Index>(x), grid_.size - 2);
  const double f = x - static_cast<double>(i);
  return (1.0 - f) * values_[i] + f * values_[i + 1];
}

double doppler_fwhm(double nu0, double temperature, double atomic_mass) {
  if (!(nu0 > 0.0) || !(temperature > 0.0) || !(atomic_mass > 0.0))
    throw DomainError("doppler_fwhm: all inputs must be positive");
  const double c = constants::speed_of_light;
  return nu0 * std::sqrt(8.0 * constants::boltzmann * temperature * constants::ln2 / (atomic_mass * c * c));
}

void validate(const BandpassFilter& f) {
  if (!(f.center_wavelength > 0.0)) throw DomainError("bandpass: center wavelength must be positive");
  if (!(f.fwhm_wavelength > 0.0)) throw DomainError("bandpass: fwhm must be positive");
  if (!(f.peak_transmission >= 0.0 && f.peak_transmission <= 1.0))
    throw DomainError("bandpass: peak transmission must lie in [0, 1]");
}

void validate(const GratingFilter& f) {
  if (!(f.center_wavelength > 0.0)) throw DomainError("grating: center wavelength must be positive");
  if (!(f.fwhm_wavelength > 0.0)) throw DomainError("grating: fwhm must be positive");
  if (!(f.peak_transmission > 0.0 && f.peak_transmission <= 1.0))
    throw DomainError("grating: peak transmission must lie in (0, 1]");
}

void validate(const EtalonFilter& f) {
  if (!(f.reflectivity > 0.0 && f.reflectivity < 1.0)) throw DomainError("etalon: reflectivity must lie in (0, 1)");
  if (!(f.thickness > 0.0)) throw DomainError("etalon: thickness must be positive");
  if (!(f.refractive_index >= 1.0)) throw DomainError("etalon: refractive index must be >= 1");
  if (!(f.loss_factor > 0.0 && f.loss_factor <= 1.0)) throw DomainError("etalon: loss factor must lie in (0, 1]");
  if (!std::isfinite(f.tuning_rate) || !std::isfinite(f.set_temperature) || !std::isfinite(f.reference_temperature))
    throw DomainError("etalon: temperatures and tuning rate must be finite");
}

double bandpass_transmission(const BandpassFilter& f, double wavelength) {
  if (!(wavelength > 0.0)) throw DomainError("bandpass_transmission: wavelength must be positive");
  return gaussian_passband(f.peak_transmission, f.center_wavelength, f.fwhm_wavelength, wavelength);
}

double grating_transmission(const GratingFilter& f, double wavelength) {
  if (!(wavelength > 0.0)) throw DomainError("grating_transmission: wavelength must be positive");
  return gaussian_passband(f.peak_transmission, f.center_wavelength, f.fwhm_wavelength, wavelength);
}

double etalon_fsr(const EtalonFilter& f) {
  return constants::speed_of_light / (2.0 * f.refractive_index * f.thickness);
}

double etalon_finesse(const EtalonFilter& f) {
  return constants::pi * std::sqrt(f.reflectivity) / (1.0 - f.reflectivity);
}

double etalon_fwhm(const EtalonFilter& f) {
  return 2.0 * etalon_fsr(f) / constants::pi * std::asin(constants::pi / (2.0 * etalon_finesse(f)));
}

double etalon_shift(const EtalonFilter& f) {
  return f.tuning_rate * (f.set_temperature - f.reference_temperature);
}

double etalon_transmission(const EtalonFilter& f, double nu) {
  if (!(nu > 0.0)) throw DomainError("etalon_transmission: frequency must be positive");
  return f.loss_factor * airy_transmission(etalon_fsr(f), etalon_finesse(f), etalon_shift(f), nu);
}

EtalonFilter tuned_to(const EtalonFilter& f, double nu_target) {
  validate(f);
  if (f.tuning_rate == 0.0) throw DomainError("tuned_to: etalon tuning rate is zero");
  const double fsr = etalon_fsr(f);
  // Resonances sit at shift + m * FSR; pick the shift closest to zero.
  double shift = std::fmod(nu_target, fsr);
  if (shift > 0.5 * fsr) shift -= fsr;
  EtalonFilter out = f;
  out.set_temperature = f.reference_temperature + shift / f.tuning_rate;
  return out;
}

double transmission(const Filter& f, double nu) {
  return std::visit(
      [nu](const auto& filter) -> double {
        using T = std::decay_t<decltype(filter)>;
        if constexpr (std::is_same_v<T, EtalonFilter>) {
          return etalon_transmission(filter, nu);
        } else if constexpr (std::is_same_v<T, GratingFilter>) {
          return grating_transmission(filter, frequency_to_wavelength(nu));
        } else {
          return bandpass_transmission(filter, frequency_to_wavelength(nu));
        }
      },
      f);
}

SpectralDensity planck_spectrum(double temperature, const FrequencyGrid& grid) {
  Eigen::VectorXd v(grid.size);
  for (Index i = 0; i < grid.size; ++i) {
    const double nu = grid.nu(i);
    v[i] = nu > 0.0 ? planck_density(temperature, nu) : 0.0;
  }
  return {grid, std::move(v)};
}

SpectralDensity line_set_density(std::span<const LineComponent> lines, const FrequencyGrid& grid) {
  if (lines.empty()) throw DomainError("line_set_density: empty line list");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(grid.size);
  const Eigen::VectorXd nu = grid.nodes();
  for (std::size_t k = 0; k < lines.size(); ++k) {
    const LineComponent& line = lines[k];
    if (!(line.fwhm > 0.0) || !(line.weight >= 0.0)) {
      std::ostringstream msg;
      msg << "line_set_density: line " << k << " needs fwhm > 0 and weight >= 0";
      throw DomainError(msg.str());
    }
    if (line.center - 10.0 * line.fwhm < grid.nu_start || line.center + 10.0 * line.fwhm > grid.nu_end()) {
      std::ostringstream msg;
      msg.precision(10);
      msg << "line_set_density: grid too narrow for line " << k << " (center " << line.center
          << " Hz, fwhm " << line.fwhm << " Hz); grid must span center +/- 10 FWHM";
      throw DomainError(msg.str());
    }
    if (line.weight == 0.0) continue;
    v += line.weight * nu.unaryExpr([&](double x) { return line_profile(line.shape, line.center, line.fwhm, x); });
  }
  return {grid, std::move(v)};
}

SpectralDensity flat_spectrum(const FrequencyGrid& grid) {
  return {grid, Eigen::VectorXd::Ones(grid.size)};
}

SpectralDensity compose_chain(const SpectralDensity& source, std::span<const Filter> filters) {
  Eigen::VectorXd v = source.values();
  const FrequencyGrid& grid = source.grid();
  for (const Filter& f : filters) {
    std::visit([](const auto& filter) { validate(filter); }, f);
    for (Index i = 0; i < grid.size; ++i) {
      const double nu = grid.nu(i);
      if (!(nu > 0.0)) throw DomainError("compose_chain: filters need positive frequencies on the grid");
      v[i] *= transmission(f, nu);
    }
  }
  const double tol = std::numeric_limits<double>::epsilon() * source.integral();
  const double total = grid.nu_step * (v.sum() - 0.5 * (v[0] + v[v.size() - 1]));
  if (!(total > tol)) throw DegenerateSpectrumError("compose_chain: no power survives the filter chain");
  return {grid, std::move(v)};
}

FrequencyGrid filter_chain_grid(const GratingFilter& grating, const EtalonFilter& etalon) {
  validate(grating);
  validate(etalon);
  const double c = constants::speed_of_light;
  const double lambda0 = grating.center_wavelength;
  const double nu0 = c / lambda0;
  const double fwhm_nu = c * grating.fwhm_wavelength / (lambda0 * lambda0);
  return FrequencyGrid::centered(nu0, 5.0 * fwhm_nu, etalon_fwhm(etalon) / 50.0);
}

double half_max_width(const SpectralDensity& s) {
  const Eigen::VectorXd& v = s.values();
  Index peak = 0;
  const double vmax = v.maxCoeff(&peak);
  const double half = 0.5 * vmax;
  Index lo = peak;
  while (lo > 0 && v[lo - 1] >= half) --lo;
  Index hi = peak;
  while (hi < v.size() - 1 && v[hi + 1] >= half) ++hi;
  if (lo == 0 || hi == v.size() - 1) throw NumericalError("half_max_width: peak not resolved inside the grid");
  // Interpolate crossings between (lo-1, lo) and (hi, hi+1).
  const double left = static_cast<double>(lo) - (v[lo] - half) / (v[lo] - v[lo - 1]);
  const double right = static_cast<double>(hi) + (v[hi] - half) / (v[hi] - v[hi + 1]);
  return (right - left) * s.nu_step();
}

}  // namespace hbt
