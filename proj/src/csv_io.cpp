#include "hbt/csv_io.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <system_error>

namespace hbt {

namespace {

std::string to_text(double v, std::chars_format fmt) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[512];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, fmt);
  if (res.ec != std::errc()) throw Error("format_double: conversion failed");
  return std::string(buf, res.ptr);
}

// Line-oriented reader that remembers the byte offset of the current line.
class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  bool next(std::string& line) {
    offset_ = next_offset_;
    if (!std::getline(in_, line)) return false;
    next_offset_ += line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }
  std::uint64_t offset() const { return offset_; }

 private:
  std::istream& in_;
  std::uint64_t offset_ = 0;
  std::uint64_t next_offset_ = 0;
};

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  for (auto& f : out) {
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t')) f.remove_suffix(1);
  }
  return out;
}

double parse_double(std::string_view text, std::uint64_t offset, std::string_view what) {
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw FormatError("cannot parse " + std::string(what) + " '" + std::string(text) + "'", offset);
  return v;
}

std::uint64_t parse_u64(std::string_view text, std::uint64_t offset, std::string_view what) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw FormatError("cannot parse " + std::string(what) + " '" + std::string(text) + "'", offset);
  return v;
}

void expect_header(LineReader& r, std::string& line, std::string_view header) {
  while (r.next(line)) {
    if (line.empty() || line.front() == '#') continue;
    if (line != header) throw FormatError("expected header '" + std::string(header) + "'", r.offset());
    return;
  }
  throw FormatError("missing header '" + std::string(header) + "'", r.offset());
}

}  // namespace

std::string format_double(double v) { return to_text(v, std::chars_format::general); }
std::string format_decimal(double v) { return to_text(v, std::chars_format::fixed); }

void write_spectrum_csv(std::ostream& out, const SpectralDensity& s) {
  out << "nu_hz,density\n";
  for (Index i = 0; i < s.size(); ++i) out << format_decimal(s.nu(i)) << ',' << format_decimal(s.values()[i]) << '\n';
  if (!out) throw Error("write_spectrum_csv: stream write failed");
}

SpectralDensity read_spectrum_csv(std::istream& in) {
  LineReader r(in);
  std::string line;
  expect_header(r, line, "nu_hz,density");
  std::vector<double> nu;
  std::vector<double> density;
  std::vector<std::uint64_t> offsets;
  while (r.next(line)) {
    if (line.empty() || line.front() == '#') continue;
    const auto f = split(line);
    if (f.size() != 2) throw FormatError("spectrum row needs 2 fields", r.offset());
    nu.push_back(parse_double(f[0], r.offset(), "nu_hz"));
    density.push_back(parse_double(f[1], r.offset(), "density"));
    offsets.push_back(r.offset());
  }
  if (nu.size() < 2) throw FormatError("spectrum needs at least 2 rows", r.offset());
  const double step = (nu.back() - nu.front()) / static_cast<double>(nu.size() - 1);
  if (!(step > 0.0)) throw FormatError("spectrum frequencies must increase", offsets[1]);
  for (std::size_t i = 0; i < nu.size(); ++i) {
    const double expected = nu.front() + static_cast<double>(i) * step;
    if (std::abs(nu[i] - expected) > 1e-6 * step) throw FormatError("spectrum grid is not uniform", offsets[i]);
    if (!(density[i] >= 0.0) || !std::isfinite(density[i]))
      throw FormatError("spectral density must be finite and >= 0", offsets[i]);
  }
  FrequencyGrid grid{nu.front(), step, static_cast<Index>(nu.size())};
  return SpectralDensity(grid, Eigen::Map<const Eigen::VectorXd>(density.data(), grid.size));
}

void write_gamma_csv(std::ostream& out, const ComplexCoherence& gamma) {
  out << "tau_s,re,im\n";
  for (Index i = 0; i < gamma.size(); ++i)
    out << format_double(gamma.tau(i)) << ',' << format_double(gamma.values[i].real()) << ','
        << format_double(gamma.values[i].imag()) << '\n';
  if (!out) throw Error("write_gamma_csv: stream write failed");
}

void write_g2_csv(std::ostream& out, const G2Curve& g2, double coherence_time) {
  out << "# coherence_time_s=" << format_double(coherence_time) << '\n';
  out << "tau_s,g2\n";
  for (Index i = 0; i < g2.size(); ++i) out << format_double(g2.tau(i)) << ',' << format_double(g2.values[i]) << '\n';
  if (!out) throw Error("write_g2_csv: stream write failed");
}

void write_histogram_csv(std::ostream& out, const CoincidenceHistogram& h) {
  out << "# n_a=" << h.n_a << '\n'
      << "# n_b=" << h.n_b << '\n'
      << "# t_total_s=" << format_double(h.t_total) << '\n'
      << "# bin_width_s=" << format_double(h.bin_width) << '\n'
      << "# tau_min_s=" << format_double(h.tau_min) << '\n'
      << "# mode=" << h.mode.name() << '\n'
      << "# dead_time_s=" << format_double(h.mode.dead_time) << '\n'
      << "tau_s,counts,g2,g2_err\n";
  G2Estimate g;
  const bool normalized = h.mode.kind == CorrelatorMode::Kind::Full && h.n_a > 0 && h.n_b > 0 && h.t_total > 0.0;
  if (normalized) g = normalize_g2(h);
  for (Index i = 0; i < h.size(); ++i) {
    out << format_double(h.bin_center(i)) << ',' << h.counts[static_cast<std::size_t>(i)] << ',';
    if (normalized)
      out << format_double(g.g2[i]) << ',' << format_double(g.error[i]) << '\n';
    else
      out << "nan,nan\n";
  }
  if (!out) throw Error("write_histogram_csv: stream write failed");
}

CoincidenceHistogram read_histogram_csv(std::istream& in) {
  LineReader r(in);
  std::string line;
  CoincidenceHistogram h;
  bool have[6] = {};
  std::string mode = "full";
  double dead_time = 0.0;
  bool header = false;
  while (r.next(line)) {
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::string_view body(line);
      body.remove_prefix(1);
      while (!body.empty() && body.front() == ' ') body.remove_prefix(1);
      const std::size_t eq = body.find('=');
      if (eq == std::string_view::npos) continue;
      const std::string_view key = body.substr(0, eq);
      const std::string_view val = body.substr(eq + 1);
      if (key == "n_a") { h.n_a = parse_u64(val, r.offset(), key); have[0] = true; }
      else if (key == "n_b") { h.n_b = parse_u64(val, r.offset(), key); have[1] = true; }
      else if (key == "t_total_s") { h.t_total = parse_double(val, r.offset(), key); have[2] = true; }
      else if (key == "bin_width_s") { h.bin_width = parse_double(val, r.offset(), key); have[3] = true; }
      else if (key == "tau_min_s") { h.tau_min = parse_double(val, r.offset(), key); have[4] = true; }
      else if (key == "mode") { mode = std::string(val); have[5] = true; }
      else if (key == "dead_time_s") dead_time = parse_double(val, r.offset(), key);
      continue;
    }
    if (line != "tau_s,counts,g2,g2_err") throw FormatError("expected header 'tau_s,counts,g2,g2_err'", r.offset());
    header = true;
    break;
  }
  if (!header) throw FormatError("missing histogram header", r.offset());
  static const char* names[] = {"n_a", "n_b", "t_total_s", "bin_width_s", "tau_min_s", "mode"};
  for (int k = 0; k < 6; ++k)
    if (!have[k]) throw FormatError(std::string("missing metadata line '# ") + names[k] + "='", 0);
  if (mode == "full") h.mode = CorrelatorMode::full();
  else if (mode == "start_stop") h.mode = CorrelatorMode::start_stop(dead_time);
  else throw FormatError("unknown correlator mode '" + mode + "'", 0);
  if (!(h.bin_width > 0.0)) throw FormatError("bin width must be positive", 0);

  while (r.next(line)) {
    if (line.empty() || line.front() == '#') continue;
    const auto f = split(line);
    if (f.size() != 4) throw FormatError("histogram row needs 4 fields", r.offset());
    const double tau = parse_double(f[0], r.offset(), "tau_s");
    const auto i = static_cast<Index>(h.counts.size());
    const double expected = h.tau_min + (static_cast<double>(i) + 0.5) * h.bin_width;
    if (std::abs(tau - expected) > 1e-6 * h.bin_width)
      throw FormatError("bin centre does not match the declared binning", r.offset());
    h.counts.push_back(parse_u64(f[1], r.offset(), "counts"));
  }
  h.tau_max = h.tau_min + static_cast<double>(h.counts.size()) * h.bin_width;
  if (std::abs(h.tau_max + h.tau_min) > 1e-6 * h.bin_width)
    throw FormatError("histogram window is not symmetric about zero", r.offset());
  h.tau_max = -h.tau_min;
  return h;
}

std::vector<LineComponent> read_line_table_csv(std::istream& in) {
  LineReader r(in);
  std::string line;
  expect_header(r, line, "center_nm,fwhm_ghz,weight,shape");
  std::vector<LineComponent> lines;
  while (r.next(line)) {
    if (line.empty() || line.front() == '#') continue;
    const auto f = split(line);
    if (f.size() != 4) throw FormatError("line table row needs 4 fields", r.offset());
    LineComponent c;
    const double center_nm = parse_double(f[0], r.offset(), "center_nm");
    if (!(center_nm > 0.0)) throw FormatError("center_nm must be positive", r.offset());
    c.center = wavelength_to_frequency(center_nm * 1e-9);
    c.fwhm = parse_double(f[1], r.offset(), "fwhm_ghz") * 1e9;
    c.weight = parse_double(f[2], r.offset(), "weight");
    if (!(c.fwhm > 0.0) || !(c.weight >= 0.0)) throw FormatError("fwhm must be > 0 and weight >= 0", r.offset());
    if (f[3] == "gaussian") c.shape = LineShape::Gaussian;
    else if (f[3] == "lorentzian") c.shape = LineShape::Lorentzian;
    else throw FormatError("shape must be gaussian or lorentzian", r.offset());
    lines.push_back(c);
  }
  if (lines.empty()) throw FormatError("line table is empty", r.offset());
  return lines;
}

std::string fit_to_json(const FitResult& fit) {
  nlohmann::ordered_json j;
  j["a"] = fit.a;
  j["b"] = fit.b;
  j["tau_c_s"] = fit.tau_c;
  j["g2_zero"] = fit.g2_zero;
  j["g2_zero_err"] = fit.g2_zero_err;
  j["chi2_reduced"] = fit.chi2_reduced;
  j["dof"] = fit.dof;
  auto cov = nlohmann::ordered_json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) cov.push_back(fit.covariance(r, c));
  j["covariance"] = cov;
  j["iterations"] = fit.iterations;
  j["converged"] = fit.converged;
  return j.dump(2) + "\n";
}

FitResult fit_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("fit JSON: ") + e.what(), e.byte);
  }
  FitResult fit;
  try {
    fit.a = j.at("a").get<double>();
    fit.b = j.at("b").get<double>();
    fit.tau_c = j.at("tau_c_s").get<double>();
    fit.g2_zero = j.at("g2_zero").get<double>();
    fit.g2_zero_err = j.at("g2_zero_err").get<double>();
    fit.chi2_reduced = j.at("chi2_reduced").get<double>();
    fit.dof = j.at("dof").get<int>();
    const auto& cov = j.at("covariance");
    if (!cov.is_array() || cov.size() != 9) throw FormatError("fit JSON: covariance needs 9 entries", 0);
    for (int k = 0; k < 9; ++k) fit.covariance(k / 3, k % 3) = cov[static_cast<std::size_t>(k)].get<double>();
    fit.iterations = j.at("iterations").get<int>();
    fit.converged = j.at("converged").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("fit JSON: ") + e.what(), 0);
  }
  return fit;
}

}  // namespace hbt
