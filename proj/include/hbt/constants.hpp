#pragma once

namespace hbt::constants {

// CODATA 2018 exact / recommended values, SI.
inline constexpr double speed_of_light = 299792458.0;
inline constexpr double planck = 6.62607015e-34;
inline constexpr double boltzmann = 1.380649e-23;
inline constexpr double atomic_mass_unit = 1.66053906660e-27;

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double ln2 = 0.69314718055994530942;

/// FWHM of a unit-variance Gaussian, 2·sqrt(2·ln2).
inline constexpr double gaussian_fwhm_per_sigma = 2.35482004503094938202;

/// Event-stream time resolution: 1 ps.
inline constexpr double timestamp_resolution = 1e-12;

}  // namespace hbt::constants
