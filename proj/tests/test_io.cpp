#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

#include "hbt/config.hpp"
#include "hbt/csv_io.hpp"
#include "hbt/timetag_io.hpp"

using namespace hbt;

namespace {

std::string to_bytes(const EventStream& s) {
  std::ostringstream out(std::ios::binary);
  write_pbt1(out, s);
  return out.str();
}

EventStream from_bytes(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  return read_pbt1(in);
}

std::uint64_t offset_of(const std::string& bytes) {
  try {
    (void)from_bytes(bytes);
  } catch (const FormatError& e) {
    return e.offset();
  }
  FAIL("expected FormatError");
  return 0;
}

void put_u64(std::string& bytes, std::size_t at, std::uint64_t v) {
  for (int k = 0; k < 8; ++k) bytes[at + static_cast<std::size_t>(k)] = static_cast<char>((v >> (8 * k)) & 0xff);
}

const char* minimal_config = R"(
name: t
source: {type: lorentzian, center_nm: 546.1, fwhm_ghz: 2}
synthesis: {seed: 1, duration_s: 1.0e-4, rate_hz: 1.0e8}
correlator: {bin_width_ps: 16, range_ns: 2}
)";

}  // namespace

TEST_SUITE("io") {

TEST_CASE("PBT1 layout and round trip") {
  const EventStream s{7, {0, 1, 1, 5, 0x0102030405060708ULL}};
  const std::string bytes = to_bytes(s);
  REQUIRE(bytes.size() == 16 + 8 * 5);
  CHECK(bytes.substr(0, 4) == "PBT1");
  CHECK(static_cast<unsigned char>(bytes[4]) == 1);
  CHECK(static_cast<unsigned char>(bytes[5]) == 0);
  CHECK(static_cast<unsigned char>(bytes[6]) == 7);
  CHECK(static_cast<unsigned char>(bytes[8]) == 5);
  // Little-endian timestamp: least significant byte first.
  CHECK(static_cast<unsigned char>(bytes[16 + 8 * 4]) == 0x08);
  CHECK(static_cast<unsigned char>(bytes[16 + 8 * 4 + 7]) == 0x01);
  CHECK(from_bytes(bytes) == s);

  std::mt19937_64 rng(1);
  EventStream big{3, {}};
  std::uint64_t t = 0;
  for (int i = 0; i < 10000; ++i) big.timestamps.push_back(t += rng() % 100000);
  CHECK(from_bytes(to_bytes(big)) == big);
  CHECK(from_bytes(to_bytes(EventStream{})) == EventStream{});
}

TEST_CASE("PBT1 errors report the byte offset") {
  const EventStream s{0, {10, 20, 30}};
  const std::string good = to_bytes(s);

  std::string bad_magic = good;
  bad_magic[1] = 'X';
  CHECK(offset_of(bad_magic) == 0);

  std::string bad_version = good;
  bad_version[4] = 2;
  CHECK(offset_of(bad_version) == 4);

  CHECK(offset_of(good.substr(0, 10)) == 10);
  CHECK(offset_of(good.substr(0, good.size() - 3)) == 16 + 8 * 2);
  CHECK(offset_of(good + std::string(8, '\0')) == 16 + 8 * 3);

  std::string unsorted = good;
  put_u64(unsorted, 16 + 8 * 2, 5);
  CHECK(offset_of(unsorted) == 16 + 8 * 2);
}

TEST_CASE("number formatting round-trips") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  for (int i = 0; i < 2000; ++i) {
    const double v = std::pow(10.0, u(rng)) * (i % 2 ? 1.0 : -1.0);
    CHECK(std::stod(format_double(v)) == v);
    const std::string dec = format_decimal(v);
    CHECK(dec.find_first_of("eE") == std::string::npos);
    CHECK(std::stod(dec) == v);
  }
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_decimal(5.4897e14) == "548970000000000");
}

TEST_CASE("spectrum CSV round trip") {
  const auto grid = FrequencyGrid::centered(5.4897e14, 5e9, 1.234567e7);
  Eigen::VectorXd v(grid.size);
  for (Index i = 0; i < grid.size; ++i) v[i] = 1.0 / (1.0 + std::pow(static_cast<double>(i - grid.size / 2) / 50.0, 2));
  const SpectralDensity s(grid, v);
  std::stringstream io;
  write_spectrum_csv(io, s);
  CHECK(io.str().rfind("nu_hz,density\n", 0) == 0);
  const auto back = read_spectrum_csv(io);
  CHECK(back.size() == s.size());
  CHECK(back.values() == s.values());
  CHECK(back.nu_start() == s.nu_start());
  CHECK(back.nu_step() == doctest::Approx(s.nu_step()).epsilon(1e-9));

  std::istringstream uneven("nu_hz,density\n1,1\n2,1\n4,1\n");
  CHECK_THROWS_AS(read_spectrum_csv(uneven), FormatError);
  std::istringstream garbage("nu_hz,density\n1,1\n2,abc\n");
  try {
    (void)read_spectrum_csv(garbage);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.offset() == std::string("nu_hz,density\n1,1\n").size());
  }
}

TEST_CASE("histogram CSV round trip") {
  CoincidenceHistogram h;
  h.bin_width = 16e-12;
  h.tau_max = 313 * 16e-12;
  h.tau_min = -h.tau_max;
  h.counts.resize(626);
  std::mt19937_64 rng(9);
  for (auto& c : h.counts) c = rng() % 100000;
  h.n_a = 123456789;
  h.n_b = 98765432;
  h.t_total = 8.7e-4;
  std::stringstream io;
  write_histogram_csv(io, h);
  CHECK(io.str().find("tau_s,counts,g2,g2_err\n") != std::string::npos);
  CHECK(read_histogram_csv(io) == h);

  h.mode = CorrelatorMode::start_stop(100e-9);
  std::stringstream ss;
  write_histogram_csv(ss, h);
  CHECK(ss.str().find(",nan,nan\n") != std::string::npos);
  CHECK(read_histogram_csv(ss) == h);

  std::string text = ss.str();
  text.replace(text.find("# bin_width_s="), 14, "# bin_widthXs=");
  std::istringstream broken(text);
  CHECK_THROWS_AS(read_histogram_csv(broken), FormatError);
}

TEST_CASE("gamma and g2 CSV layout") {
  ComplexCoherence gamma{1e-12, Eigen::VectorXcd(3)};
  gamma.values << std::complex<double>(0.5, -0.25), 1.0, std::complex<double>(0.5, 0.25);
  std::ostringstream g;
  write_gamma_csv(g, gamma);
  CHECK(g.str() == "tau_s,re,im\n-1e-12,0.5,-0.25\n0,1,0\n1e-12,0.5,0.25\n");

  G2Curve g2{2e-12, Eigen::VectorXd(3)};
  g2.values << 1.25, 2.0, 1.25;
  std::ostringstream o;
  write_g2_csv(o, g2, 4.36e-10);
  CHECK(o.str() == "# coherence_time_s=4.36e-10\ntau_s,g2\n-2e-12,1.25\n0,2\n2e-12,1.25\n");
}

TEST_CASE("line table CSV") {
  std::istringstream in(
      "# comment\n"
      "center_nm,fwhm_ghz,weight,shape\n"
      "546.0735,0.55,1.0,gaussian\n"
      "546.1,2,0.5,lorentzian\n");
  const auto lines = read_line_table_csv(in);
  REQUIRE(lines.size() == 2);
  CHECK(lines[0].center == doctest::Approx(constants::speed_of_light / 546.0735e-9));
  CHECK(lines[0].fwhm == doctest::Approx(0.55e9));
  CHECK(lines[1].shape == LineShape::Lorentzian);
  CHECK(lines[1].weight == 0.5);
  std::istringstream bad("center_nm,fwhm_ghz,weight,shape\n546,1,1,voigt\n");
  CHECK_THROWS_AS(read_line_table_csv(bad), FormatError);
}

TEST_CASE("fit JSON round trip") {
  FitResult f;
  f.a = 1234.5;
  f.b = 987.25;
  f.tau_c = 4.36e-10;
  f.covariance << 1, 0.1, 1e-13, 0.1, 2, 2e-13, 1e-13, 2e-13, 1e-24;
  f.g2_zero = 1.8;
  f.g2_zero_err = 0.003;
  f.chi2_reduced = 1.02;
  f.dof = 623;
  f.iterations = 7;
  f.converged = true;
  const std::string text = fit_to_json(f);
  CHECK(text.back() == '\n');
  CHECK(text.find("\"tau_c_s\"") != std::string::npos);
  const FitResult back = fit_from_json(text);
  CHECK(back.a == f.a);
  CHECK(back.tau_c == f.tau_c);
  CHECK(back.covariance == f.covariance);
  CHECK(back.dof == f.dof);
  CHECK(back.converged);
  CHECK(fit_to_json(back) == text);
  CHECK_THROWS_AS(fit_from_json("{\"a\": 1,"), FormatError);
}

TEST_CASE("config parsing converts units") {
  const auto cfg = parse_config(minimal_config);
  CHECK(cfg.name == "t");
  CHECK(cfg.source.kind == SourceConfig::Kind::Lorentzian);
  CHECK(cfg.source.center == doctest::Approx(constants::speed_of_light / 546.1e-9));
  CHECK(cfg.source.fwhm == doctest::Approx(2e9));
  CHECK(cfg.bin_width == doctest::Approx(16e-12));
  CHECK(cfg.tau_range == doctest::Approx(2e-9));
  CHECK(cfg.synthesis.duration == doctest::Approx(1e-4));
  CHECK(cfg.split_ratio == 0.5);
  CHECK(cfg.mode == CorrelatorMode::full());

  const auto tau = parse_config(std::string(minimal_config) +
                                "detectors:\n  a: {pair_fwhm_ps: 40, dead_time_ns: 22}\n");
  CHECK(tau.detector_a.response.core_fwhm == doctest::Approx(40e-12 / std::sqrt(2.0)));
  CHECK(tau.detector_a.dead_time == doctest::Approx(22e-9));

  const auto by_tau = parse_config(R"(
source: {type: lorentzian, center_nm: 546.1, coherence_time_ns: 0.436}
synthesis: {seed: 1, duration_s: 1.0e-4, rate_hz: 1.0e8}
correlator: {bin_width_ps: 16, range_ns: 2, mode: start_stop, dead_time_ns: 100}
filters:
  - {type: etalon, thickness_mm: 0.5, refractive_index: 1.46, reflectivity: 0.97, tune_to_nm: 546.1}
)");
  CHECK(by_tau.source.fwhm == doctest::Approx(1.0 / (constants::pi * 0.436e-9)));
  CHECK(by_tau.mode.kind == CorrelatorMode::Kind::StartStop);
  CHECK(by_tau.mode.dead_time == doctest::Approx(100e-9));
  REQUIRE(by_tau.filters.size() == 1);
  const auto& et = std::get<EtalonFilter>(by_tau.filters[0]);
  CHECK(etalon_transmission(et, constants::speed_of_light / 546.1e-9) == doctest::Approx(1.0));
}

TEST_CASE("config errors name the key") {
  auto path_of = [](const std::string& text) -> std::string {
    try {
      (void)parse_config(text);
    } catch (const ConfigError& e) {
      return e.path();
    }
    return "<no error>";
  };
  CHECK(path_of(std::string(minimal_config) + "extra_key: 1\n") == "extra_key");
  CHECK(path_of(R"(
source: {type: lorentzian, center_nm: 546.1, fwhm_ghz: 2}
synthesis: {seed: 1, duration_s: 1.0e-4}
correlator: {bin_width_ps: 16, range_ns: 2}
)") == "synthesis.rate_hz");
  CHECK(path_of(std::string(minimal_config) +
                "filters:\n  - {type: bandpass, center_nm: 546, fwhm_nm: 3}\n  - {type: grating, center_nm: 546, fwhm_nm: -1}\n") ==
        "filters[1].fwhm_nm");
  CHECK(path_of(std::string(minimal_config) + "detectors:\n  b: {efficiency: 1.5}\n") == "detectors.b.efficiency");
  CHECK(path_of(R"(
source: {type: lorentzian, center_nm: 546.1, fwhm_ghz: 2}
synthesis: {seed: 1, duration_s: 1.0e-4, rate_hz: 1.0e8}
correlator: {bin_width_ps: 16, range_ns: 2, dead_time_ns: 5}
)") == "correlator.dead_time_ns");
  CHECK_THROWS_AS(parse_config("source: [unclosed"), ConfigError);
}

}  // TEST_SUITE
