#include "hbt/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "hbt/timetag_io.hpp"

#ifndef HBT_VERSION
#define HBT_VERSION "0.0.0"
#endif

namespace hbt {

namespace {

template <class F>
const F* find_filter(const ScenarioConfig& cfg) {
  for (const auto& f : cfg.filters)
    if (const auto* p = std::get_if<F>(&f)) return p;
  return nullptr;
}

// Narrowest wavelength-domain filter as (centre Hz, FWHM Hz); none -> fwhm 0.
std::pair<double, double> narrowest_passband(const ScenarioConfig& cfg) {
  double center = 0.0;
  double width = 0.0;
  for (const auto& f : cfg.filters) {
    double l0 = 0.0;
    double dl = 0.0;
    if (const auto* g = std::get_if<GratingFilter>(&f)) {
      l0 = g->center_wavelength;
      dl = g->fwhm_wavelength;
    } else if (const auto* b = std::get_if<BandpassFilter>(&f)) {
      l0 = b->center_wavelength;
      dl = b->fwhm_wavelength;
    } else {
      continue;
    }
    const double w = constants::speed_of_light * dl / (l0 * l0);
    if (width == 0.0 || w < width) {
      width = w;
      center = wavelength_to_frequency(l0);
    }
  }
  return {center, width};
}

double detector_reach(const DetectorResponse& r) {
  double reach = 6.0 * r.core_sigma();
  if (r.tail_weight > 0.0) reach += 25.0 * r.tail_decay;
  return reach;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

}  // namespace

std::string version() { return HBT_VERSION; }

int exit_code_for(const std::exception& e) {
  if (const auto* s = dynamic_cast<const StageError*>(&e)) return s->exit_code();
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DomainError*>(&e)) return 2;
  if (dynamic_cast<const FormatError*>(&e)) return 3;
  if (dynamic_cast<const NumericalError*>(&e)) return 4;
  return 1;
}

FrequencyGrid default_grid(const ScenarioConfig& cfg) {
  if (cfg.grid) return *cfg.grid;
  const auto* grating = find_filter<GratingFilter>(cfg);
  const auto* etalon = find_filter<EtalonFilter>(cfg);
  if (grating && etalon) return filter_chain_grid(*grating, *etalon);

  const SourceConfig& src = cfg.source;
  switch (src.kind) {
    case SourceConfig::Kind::Lorentzian:
      return FrequencyGrid::centered(src.center, 100.0 * src.fwhm, src.fwhm / 200.0);
    case SourceConfig::Kind::Lines: {
      double lo = src.lines.front().center;
      double hi = lo;
      double step = src.lines.front().fwhm;
      for (const auto& l : src.lines) {
        const double reach = (l.shape == LineShape::Lorentzian ? 100.0 : 12.0) * l.fwhm;
        lo = std::min(lo, l.center - reach);
        hi = std::max(hi, l.center + reach);
        step = std::min(step, l.fwhm);
      }
      return FrequencyGrid::centered(0.5 * (lo + hi), 0.5 * (hi - lo), step / 40.0);
    }
    default:
      break;
  }
  const auto [center, width] = narrowest_passband(cfg);
  if (width > 0.0) {
    double step = width / 400.0;
    if (etalon) step = std::min(step, etalon_fwhm(*etalon) / 50.0);
    return FrequencyGrid::centered(center, 5.0 * width, step);
  }
  if (src.kind == SourceConfig::Kind::Blackbody) {
    const double top = 40.0 * constants::boltzmann * src.temperature / constants::planck;
    const double step = top / 200000.0;
    return {step, step, 200000};
  }
  throw ConfigError("grid", "a flat source needs an explicit grid or a wavelength filter");
}

SpectralDensity build_spectrum(const ScenarioConfig& cfg) {
  const FrequencyGrid grid = default_grid(cfg);
  const SourceConfig& src = cfg.source;
  SpectralDensity source = [&] {
    switch (src.kind) {
      case SourceConfig::Kind::Lorentzian: {
        const LineComponent line{src.center, src.fwhm, 1.0, LineShape::Lorentzian};
        return line_set_density(std::span<const LineComponent>(&line, 1), grid);
      }
      case SourceConfig::Kind::Blackbody:
        return planck_spectrum(src.temperature, grid);
      case SourceConfig::Kind::Lines:
        return line_set_density(src.lines, grid);
      case SourceConfig::Kind::Flat:
        break;
    }
    return flat_spectrum(grid);
  }();
  return compose_chain(source, cfg.filters);
}

TheoryProducts compute_theory(const SpectralDensity& s, const ScenarioConfig& cfg) {
  const double tau_c_est = coherence_time_from_spectrum(s);
  const double step = cfg.theory_tau_step > 0.0 ? cfg.theory_tau_step : default_tau_step(s);
  double tau_max = cfg.theory_tau_max;
  if (!(tau_max > 0.0)) {
    tau_max = 12.0 * tau_c_est + detector_reach(cfg.detector_a.response) + detector_reach(cfg.detector_b.response);
    tau_max = std::min(tau_max, 0.1 / s.nu_step());
    tau_max = std::max(tau_max, 10.0 * step);
  }
  TheoryProducts t;
  t.gamma = gamma_from_spectrum(s, tau_max, step);
  t.g2 = g2_theory(t.gamma);
  t.coherence_time = coherence_time(t.gamma);
  t.g2_detected = mode_dilute(convolve_detector(t.g2, cfg.detector_a.response, cfg.detector_b.response),
                              cfg.synthesis.modes);
  return t;
}

std::pair<EventStream, EventStream> synthesize_channels(const SpectralDensity& s, const ScenarioConfig& cfg,
                                                        int threads) {
  SynthesisConfig sc = cfg.synthesis;
  sc.threads = std::max(1, threads);
  const std::uint64_t seed = sc.master_seed;
  const EventStream photons = synthesize_thermal_events(s, sc);
  auto [a, b] = beamsplit(photons, cfg.split_ratio, derive_seed(seed, "beamsplit", 0));
  a = apply_detector(a, cfg.detector_a, sc.duration, derive_seed(seed, "detector_a", 0));
  b = apply_detector(b, cfg.detector_b, sc.duration, derive_seed(seed, "detector_b", 0));
  if (cfg.crosstalk_probability > 0.0)
    std::tie(a, b) = crosstalk_inject(a, b, cfg.crosstalk_probability, cfg.crosstalk_delay_mean,
                                      derive_seed(seed, "crosstalk", 0));
  a.channel_id = 0;
  b.channel_id = 1;
  return {std::move(a), std::move(b)};
}

CoincidenceHistogram correlate_channels(const EventStream& a, const EventStream& b, const ScenarioConfig& cfg,
                                        int threads) {
  CorrelateOptions opts;
  opts.t_total = cfg.synthesis.duration;
  opts.chunks = cfg.chunks;
  opts.threads = std::max(1, threads);
  return cross_correlate(a, b, cfg.bin_width, cfg.tau_range, cfg.mode, opts);
}

FitResult fit_histogram(const CoincidenceHistogram& h, const ScenarioConfig& cfg) { return fit_bunching(h, cfg.fit); }

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

std::string spectrum_text(const SpectralDensity& s) {
  std::ostringstream o;
  write_spectrum_csv(o, s);
  return o.str();
}

std::string histogram_text(const CoincidenceHistogram& h) {
  std::ostringstream o;
  write_histogram_csv(o, h);
  return o.str();
}

SpectralDensity load_spectrum(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  return read_spectrum_csv(in);
}

CoincidenceHistogram load_histogram(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  return read_histogram_csv(in);
}

PipelineReport run_pipeline(ScenarioConfig cfg, const PipelineOptions& opts) {
  if (opts.seed) cfg.synthesis.master_seed = *opts.seed;
  PipelineReport report;
  report.out_dir = opts.out_dir.empty() ? cfg.output_dir : opts.out_dir;
  if (report.out_dir.empty()) throw ConfigError("output.directory", "no output directory given (use --out)");
  std::filesystem::create_directories(report.out_dir);
  const auto& dir = report.out_dir;
  const std::uint64_t seed = cfg.synthesis.master_seed;

  nlohmann::ordered_json artifacts = nlohmann::ordered_json::array();
  auto record = [&](const std::string& name) {
    const std::string bytes = read_text_file(dir / name);
    artifacts.push_back({{"file", name}, {"bytes", bytes.size()}, {"fnv1a64", hex64(fnv1a64(bytes))}});
  };
  auto log = [&](const std::string& line) {
    if (opts.log) *opts.log << line << std::endl;
  };

  std::string failed_stage;
  std::string error_text;
  int exit_code = 0;
  std::string section;

  auto write_manifest = [&] {
    nlohmann::ordered_json m;
    m["name"] = cfg.name;
    m["version"] = version();
    m["config_hash"] = "fnv1a64:" + hex64(fnv1a64(cfg.source_text));
    m["master_seed"] = seed;
    m["seeds"] = {{"field", "derive_seed(master, \"field\", block)"},
                  {"events", "derive_seed(master, \"events\", block)"},
                  {"beamsplit", derive_seed(seed, "beamsplit", 0)},
                  {"detector_a", derive_seed(seed, "detector_a", 0)},
                  {"detector_b", derive_seed(seed, "detector_b", 0)},
                  {"crosstalk", derive_seed(seed, "crosstalk", 0)}};
    m["status"] = failed_stage.empty() ? "complete" : "partial";
    m["stages_completed"] = report.stages;
    if (!failed_stage.empty()) {
      m["failed_stage"] = failed_stage;
      m["error"] = error_text;
    }
    m["artifacts"] = artifacts;
    m["config"] = cfg.source_text;
    m["generated_at"] = utc_now();
    write_text_file(dir / "manifest.json", m.dump(2) + "\n");
  };

  auto stage = [&](const std::string& name, const std::string& cfg_section, auto&& body) {
    section = cfg_section;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      body();
    } catch (const std::exception& e) {
      failed_stage = name;
      error_text = e.what();
      exit_code = exit_code_for(e);
      write_manifest();
      throw StageError(name, cfg_section, e.what(), exit_code == 0 ? 1 : exit_code);
    }
    report.stages.push_back(name);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ostringstream msg;
    msg << "[" << name << "] done in " << std::fixed << std::setprecision(2) << secs << " s";
    log(msg.str());
  };

  std::optional<SpectralDensity> spectrum;
  stage("spectrum", "source/grid/filters", [&] {
    const std::string text = spectrum_text(build_spectrum(cfg));
    write_text_file(dir / "spectrum.csv", text);
    std::istringstream in(text);
    spectrum = read_spectrum_csv(in);
    record("spectrum.csv");
  });

  stage("theory", "theory/detectors", [&] {
    const TheoryProducts t = compute_theory(*spectrum, cfg);
    report.coherence_time = t.coherence_time;
    std::ostringstream g, g2, g2d;
    write_gamma_csv(g, t.gamma);
    write_g2_csv(g2, t.g2, t.coherence_time);
    write_g2_csv(g2d, t.g2_detected, t.coherence_time);
    write_text_file(dir / "gamma.csv", g.str());
    write_text_file(dir / "g2_theory.csv", g2.str());
    write_text_file(dir / "g2_detected.csv", g2d.str());
    record("gamma.csv");
    record("g2_theory.csv");
    record("g2_detected.csv");
  });

  EventStream a;
  EventStream b;
  stage("synth", "synthesis/detectors/crosstalk", [&] {
    std::tie(a, b) = synthesize_channels(*spectrum, cfg, opts.threads);
    write_pbt1(dir / "channel_a.pbt1", a);
    write_pbt1(dir / "channel_b.pbt1", b);
    record("channel_a.pbt1");
    record("channel_b.pbt1");
  });

  std::optional<CoincidenceHistogram> hist;
  stage("correlate", "correlator", [&] {
    const std::string text = histogram_text(correlate_channels(a, b, cfg, opts.threads));
    write_text_file(dir / "histogram.csv", text);
    std::istringstream in(text);
    hist = read_histogram_csv(in);
    record("histogram.csv");
  });
  a = {};
  b = {};

  stage("fit", "fit", [&] {
    report.fit = fit_histogram(*hist, cfg);
    write_text_file(dir / "fit.json", fit_to_json(report.fit));
    record("fit.json");
  });

  write_manifest();
  return report;
}

}  // namespace hbt
