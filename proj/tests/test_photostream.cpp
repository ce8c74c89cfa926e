#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "hbt/photostream.hpp"

using namespace hbt;

namespace {

constexpr double nu0 = constants::speed_of_light / 546.1e-9;

SpectralDensity lorentzian(double fwhm) {
  const auto grid = FrequencyGrid::centered(nu0, 100.0 * fwhm, fwhm / 200.0);
  const LineComponent line{nu0, fwhm, 1.0, LineShape::Lorentzian};
  return line_set_density(std::span(&line, 1), grid);
}

double fano(const std::vector<std::uint64_t>& ts, double window_ps, double duration_ps) {
  const auto bins = static_cast<std::size_t>(duration_ps / window_ps);
  std::vector<double> n(bins, 0.0);
  for (auto t : ts) {
    const auto k = static_cast<std::size_t>(static_cast<double>(t) / window_ps);
    if (k < bins) n[k] += 1.0;
  }
  const double mean = std::accumulate(n.begin(), n.end(), 0.0) / static_cast<double>(bins);
  double var = 0.0;
  for (double x : n) var += (x - mean) * (x - mean);
  var /= static_cast<double>(bins - 1);
  return var / mean;
}

}  // namespace

TEST_SUITE("photostream") {

TEST_CASE("seed derivation is deterministic and role dependent") {
  CHECK(derive_seed(42, "field", 0) == derive_seed(42, "field", 0));
  CHECK(derive_seed(42, "field", 0) != derive_seed(42, "events", 0));
  CHECK(derive_seed(42, "field", 0) != derive_seed(42, "field", 1));
  CHECK(derive_seed(42, "field", 0) != derive_seed(43, "field", 0));
  // FNV-1a 64 reference values.
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("thermal field has exponential intensity and the spectrum's coherence") {
  const double fwhm = 1e9;
  const double tau_c = 1.0 / (constants::pi * fwhm);
  const auto s = lorentzian(fwhm);
  SynthesisConfig cfg;
  cfg.master_seed = 17;
  cfg.dt = 20e-12;
  cfg.duration = 40e-6;
  const FieldTrace field = synthesize_field(s, cfg);
  const Index n = field.samples.size();
  REQUIRE(n == 2000000);

  const Eigen::VectorXd I = field.samples.cwiseAbs2();
  const double mean = I.mean();
  CHECK(I.array().square().mean() / (mean * mean) == doctest::Approx(2.0).epsilon(0.03));

  // Kolmogorov-Smirnov against Exp(mean) on samples spaced 20 coherence times apart.
  const auto stride = static_cast<Index>(std::ceil(20.0 * tau_c / cfg.dt));
  std::vector<double> x;
  for (Index k = 0; k < n; k += stride) x.push_back(I[k] / mean);
  std::sort(x.begin(), x.end());
  double d = 0.0;
  const auto m = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double cdf = 1.0 - std::exp(-x[i]);
    d = std::max({d, std::abs(cdf - static_cast<double>(i) / m), std::abs(cdf - static_cast<double>(i + 1) / m)});
  }
  CHECK(d < 1.63 / std::sqrt(m));  // 1% critical value

  // Normalized field autocovariance at lag ~ tau_c.
  const auto lag = static_cast<Index>(std::llround(tau_c / cfg.dt));
  std::complex<double> acc = 0.0;
  for (Index k = 0; k + lag < n; ++k) acc += field.samples[k + lag] * std::conj(field.samples[k]);
  acc /= static_cast<double>(n - lag) * mean;
  const double expected = std::exp(-constants::pi * fwhm * static_cast<double>(lag) * cfg.dt);
  CHECK(std::abs(acc) == doctest::Approx(expected).epsilon(0.08));
}

TEST_CASE("thermal event synthesis is reproducible and thread independent") {
  const auto s = lorentzian(2e9);
  SynthesisConfig cfg;
  cfg.master_seed = 5;
  cfg.dt = 10e-12;
  cfg.duration = 5e-5;
  cfg.mean_rate = 2e8;
  const auto a = synthesize_thermal_events(s, cfg);
  const auto b = synthesize_thermal_events(s, cfg);
  CHECK(a == b);
  CHECK(a.is_sorted());
  SynthesisConfig threaded = cfg;
  threaded.threads = 3;
  CHECK(synthesize_thermal_events(s, threaded) == a);
  SynthesisConfig other = cfg;
  other.master_seed = 6;
  CHECK_FALSE(synthesize_thermal_events(s, other) == a);
  CHECK(static_cast<double>(a.size()) == doctest::Approx(cfg.mean_rate * cfg.duration).epsilon(0.05));
  CHECK(a.timestamps.back() < static_cast<std::uint64_t>(cfg.duration * 1e12));
}

TEST_CASE("synthesis input validation") {
  const auto s = lorentzian(2e9);
  SynthesisConfig cfg;
  cfg.dt = 10e-12;
  cfg.mean_rate = 2e10;  // occupancy 0.2
  CHECK_THROWS_AS(synthesize_thermal_events(s, cfg), DomainError);
  cfg.mean_rate = 1e6;
  cfg.block_length = 1024;
  CHECK_THROWS_AS(synthesize_thermal_events(s, cfg), DomainError);
}

TEST_CASE("Fano factor: Poisson is 1, thermal light is 1 + rate * tau_c") {
  const double fwhm = 1e9;
  const double tau_c = 1.0 / (constants::pi * fwhm);
  const double window_ps = 100e3;

  const auto poisson = poisson_events(1e9, 2e-4, 3);
  CHECK(fano(poisson.timestamps, window_ps, 2e8) == doctest::Approx(1.0).epsilon(0.1));

  SynthesisConfig cfg;
  cfg.master_seed = 23;
  cfg.dt = 20e-12;
  cfg.duration = 2e-4;
  cfg.mean_rate = 1e9;
  const auto thermal = synthesize_thermal_events(lorentzian(fwhm), cfg);
  const double expected = 1.0 + cfg.mean_rate * tau_c;
  CHECK(fano(thermal.timestamps, window_ps, 2e8) == doctest::Approx(expected).epsilon(0.1));
}

TEST_CASE("beam splitter partitions the stream") {
  const auto events = poisson_events(1e8, 1e-3, 9);
  const auto [a, b] = beamsplit(events, 0.3, 10);
  CHECK(a.size() + b.size() == events.size());
  CHECK(a.channel_id == 0);
  CHECK(b.channel_id == 1);
  CHECK(a.is_sorted());
  CHECK(b.is_sorted());
  std::vector<std::uint64_t> merged(events.size());
  std::merge(a.timestamps.begin(), a.timestamps.end(), b.timestamps.begin(), b.timestamps.end(), merged.begin());
  CHECK(merged == events.timestamps);
  const double n = static_cast<double>(events.size());
  CHECK(std::abs(static_cast<double>(a.size()) - 0.3 * n) < 5.0 * std::sqrt(n * 0.3 * 0.7));
  CHECK_THROWS_AS(beamsplit(events, 1.0, 1), DomainError);
}

TEST_CASE("detector model") {
  const auto events = poisson_events(1e8, 1e-3, 31);

  SUBCASE("a perfect detector is the identity") {
    const auto out = apply_detector(events, DetectorModel{}, 1e-3, 1);
    CHECK(out == events);
  }
  SUBCASE("efficiency thins binomially") {
    DetectorModel d;
    d.efficiency = 0.25;
    const auto out = apply_detector(events, d, 1e-3, 2);
    const double n = static_cast<double>(events.size());
    CHECK(std::abs(static_cast<double>(out.size()) - 0.25 * n) < 5.0 * std::sqrt(n * 0.25 * 0.75));
    CHECK(std::includes(events.timestamps.begin(), events.timestamps.end(), out.timestamps.begin(), out.timestamps.end()));
  }
  SUBCASE("dead time enforces a minimum gap") {
    DetectorModel d;
    d.dead_time = 50e-9;
    const auto out = apply_detector(events, d, 1e-3, 3);
    for (std::size_t i = 1; i < out.size(); ++i) CHECK_UNARY(out.timestamps[i] - out.timestamps[i - 1] >= 50000);
    // Non-paralyzable throughput r / (1 + r D).
    const double r = 1e8;
    CHECK(static_cast<double>(out.size()) == doctest::Approx(r / (1.0 + r * 50e-9) * 1e-3).epsilon(0.02));
  }
  SUBCASE("dark counts add a uniform background") {
    DetectorModel d;
    d.dark_rate = 1e6;
    const auto none = EventStream{};
    const auto out = apply_detector(none, d, 1e-2, 4);
    CHECK(static_cast<double>(out.size()) == doctest::Approx(1e4).epsilon(0.05));
    CHECK(out.is_sorted());
  }
  SUBCASE("pair timing resolution of 1.2 ns") {
    // Identical arrival times on both channels; the jittered differences carry the pair response.
    EventStream pairs;
    for (std::uint64_t k = 0; k < 20000; ++k) pairs.timestamps.push_back(1000000 + k * 100000);
    DetectorModel d;
    d.response = DetectorResponse::from_pair_fwhm(1.2e-9, 0.0, 0.0);
    const auto a = apply_detector(pairs, d, 1e-2, 5);
    const auto b = apply_detector(pairs, d, 1e-2, 6);
    REQUIRE(a.size() == pairs.size());
    REQUIRE(b.size() == pairs.size());
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double diff = static_cast<double>(b.timestamps[i]) - static_cast<double>(a.timestamps[i]);
      sum += diff;
      sum2 += diff * diff;
    }
    const double n = static_cast<double>(a.size());
    const double sd = std::sqrt(sum2 / n - (sum / n) * (sum / n));
    CHECK(sd * constants::gaussian_fwhm_per_sigma * 1e-12 == doctest::Approx(1.2e-9).epsilon(0.05));
  }
}

TEST_CASE("crosstalk injection") {
  const auto a = poisson_events(1e7, 1e-2, 40);
  const auto b = poisson_events(1e7, 1e-2, 41);
  const auto [a0, b0] = crosstalk_inject(a, b, 0.0, 1e-9, 1);
  CHECK(a0 == a);
  CHECK(b0 == b);

  const auto [a1, b1] = crosstalk_inject(a, b, 0.01, 1e-9, 2);
  const double expected = 0.01 * static_cast<double>(a.size());
  const double extra_b = static_cast<double>(b1.size() - b.size());
  CHECK(std::abs(extra_b - expected) < 5.0 * std::sqrt(expected));
  CHECK(a1.is_sorted());
  CHECK(b1.is_sorted());
  CHECK(std::includes(b1.timestamps.begin(), b1.timestamps.end(), b.timestamps.begin(), b.timestamps.end()));
  CHECK_THROWS_AS(crosstalk_inject(a, b, 1.5, 1e-9, 3), DomainError);
}

}  // TEST_SUITE
