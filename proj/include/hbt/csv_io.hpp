#pragma once

// Plot-ready text exports and their readers.
//
//   spectrum   nu_hz,density                 (decimal notation, no exponent)
//   gamma      tau_s,re,im
//   g2         tau_s,g2                      preceded by "# coherence_time_s=<value>"
//   histogram  tau_s,counts,g2,g2_err        preceded by "# key=value" metadata lines
//   line table center_nm,fwhm_ghz,weight,shape
//
// Numbers are written in the shortest form that reads back to the same
// double, so every file round-trips exactly. LF line endings throughout.

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "hbt/coherence.hpp"
#include "hbt/correlator.hpp"
#include "hbt/inference.hpp"
#include "hbt/spectral.hpp"

namespace hbt {

/// Shortest round-trip representation (may use an exponent).
std::string format_double(double v);
/// Shortest round-trip representation in plain decimal notation.
std::string format_decimal(double v);

void write_spectrum_csv(std::ostream& out, const SpectralDensity& s);
/// Rows must be evenly spaced in frequency (relative tolerance 1e-6).
SpectralDensity read_spectrum_csv(std::istream& in);

void write_gamma_csv(std::ostream& out, const ComplexCoherence& gamma);
void write_g2_csv(std::ostream& out, const G2Curve& g2, double coherence_time);

/// g2 columns are "nan" for start-stop histograms, which cannot be normalized.
void write_histogram_csv(std::ostream& out, const CoincidenceHistogram& h);
CoincidenceHistogram read_histogram_csv(std::istream& in);

/// shape is "gaussian" or "lorentzian"; '#' lines are comments.
std::vector<LineComponent> read_line_table_csv(std::istream& in);

std::string fit_to_json(const FitResult& fit);
FitResult fit_from_json(std::string_view text);

}  // namespace hbt
