// hbtlab: spectra, theory curves, synthetic time tags, correlation and fits
// from scenario configs or externally supplied files.
//
// Exit status: 0 success, 2 configuration error, 3 data-format error,
// 4 numerical failure, 1 anything else.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "hbt/acceptance.hpp"
#include "hbt/pipeline.hpp"
#include "hbt/timetag_io.hpp"

namespace fs = std::filesystem;
using namespace hbt;

namespace {

struct Common {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  int threads = 1;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config) {
  auto* opt = cmd->add_option("--config", c.config, "Scenario config (YAML)");
  if (needs_config) opt->required();
  cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
  cmd->add_option("--seed", c.seed, "Master seed (overrides synthesis.seed)");
  cmd->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_flag("--quiet", c.quiet, "Suppress progress output");
}

ScenarioConfig load(const Common& c) {
  ScenarioConfig cfg = load_config(c.config);
  if (c.seed) cfg.synthesis.master_seed = *c.seed;
  return cfg;
}

fs::path out_dir(const Common& c) {
  fs::create_directories(c.out);
  return c.out;
}

void say(const Common& c, const std::string& line) {
  if (!c.quiet) std::cout << line << '\n';
}

std::string g2_text(const G2Curve& g2, double tau_c) {
  std::ostringstream s;
  write_g2_csv(s, g2, tau_c);
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hbtlab: photon-bunching laboratory (spectra, coherence, time tags, correlation, fits)"};
  app.require_subcommand(1);

  Common spectrum_opts;
  auto* spectrum_cmd = app.add_subcommand("spectrum", "Filtered source spectrum -> spectrum.csv");
  add_common(spectrum_cmd, spectrum_opts, true);

  Common theory_opts;
  std::string theory_spectrum;
  auto* theory_cmd = app.add_subcommand("theory", "gamma and g2 theory curves -> gamma.csv, g2_theory.csv, g2_detected.csv");
  add_common(theory_cmd, theory_opts, true);
  theory_cmd->add_option("--spectrum", theory_spectrum, "Use this spectrum CSV instead of building one")->check(CLI::ExistingFile);

  Common synth_opts;
  std::string synth_spectrum;
  auto* synth_cmd = app.add_subcommand("synth", "Synthetic detector time tags -> channel_a.pbt1, channel_b.pbt1");
  add_common(synth_cmd, synth_opts, true);
  synth_cmd->add_option("--spectrum", synth_spectrum, "Use this spectrum CSV instead of building one")->check(CLI::ExistingFile);

  Common corr_opts;
  std::string file_a;
  std::string file_b;
  std::optional<double> bin_ps;
  std::optional<double> range_ns;
  std::optional<std::string> mode_name;
  double dead_ns = 0.0;
  std::optional<double> t_total;
  int chunks = 1;
  auto* corr_cmd = app.add_subcommand("correlate", "Coincidence histogram of two PBT1 files -> histogram.csv");
  add_common(corr_cmd, corr_opts, false);
  corr_cmd->add_option("--a", file_a, "Channel A time tags (PBT1)")->required()->check(CLI::ExistingFile);
  corr_cmd->add_option("--b", file_b, "Channel B time tags (PBT1)")->required()->check(CLI::ExistingFile);
  corr_cmd->add_option("--bin-width-ps", bin_ps, "Bin width in ps (default: config)");
  corr_cmd->add_option("--range-ns", range_ns, "Half range in ns (default: config)");
  corr_cmd->add_option("--mode", mode_name, "full or start_stop (default: config)")->check(CLI::IsMember({"full", "start_stop"}));
  corr_cmd->add_option("--dead-time-ns", dead_ns, "Start-stop dead time in ns");
  corr_cmd->add_option("--t-total-s", t_total, "Observation time (default: config duration, else stream span)");
  corr_cmd->add_option("--chunks", chunks, "Time chunks for parallel correlation")->check(CLI::PositiveNumber);

  Common fit_opts;
  std::string hist_file;
  std::optional<double> exclude_ps;
  auto* fit_cmd = app.add_subcommand("fit", "Fit the bunching model to histogram.csv -> fit.json");
  add_common(fit_cmd, fit_opts, false);
  fit_cmd->add_option("--histogram", hist_file, "Histogram CSV")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--exclude-center-ps", exclude_ps, "Exclude |tau| below this (default: config or 0)");

  Common pipe_opts;
  auto* pipe_cmd = app.add_subcommand("pipeline", "All stages plus manifest.json");
  add_common(pipe_cmd, pipe_opts, true);

  Common acc_opts;
  std::vector<int> only;
  std::string config_dir;
  std::string work_dir;
  auto* acc_cmd = app.add_subcommand("acceptance", "Run the acceptance criteria and print a pass/fail table");
  add_common(acc_cmd, acc_opts, false);
  acc_cmd->add_option("--only", only, "Criterion ids to run (default: all)")->check(CLI::Range(1, 12));
  acc_cmd->add_option("--config-dir", config_dir, "Directory with shipped scenario configs");
  acc_cmd->add_option("--work-dir", work_dir, "Directory for pipeline outputs");

  Common bench_opts;
  std::size_t bench_events = 5'000'000;
  double bench_rate = 1e6;
  double bench_bin_ps = 16;
  double bench_range_ns = 50;
  auto* bench_cmd = app.add_subcommand("bench", "Correlator throughput on Poisson streams");
  add_common(bench_cmd, bench_opts, false);
  bench_cmd->add_option("--events", bench_events, "Events per channel")->capture_default_str();
  bench_cmd->add_option("--rate", bench_rate, "Rate per channel (Hz)")->capture_default_str();
  bench_cmd->add_option("--bin-width-ps", bench_bin_ps, "Bin width (ps)")->capture_default_str();
  bench_cmd->add_option("--range-ns", bench_range_ns, "Half range (ns)")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*spectrum_cmd) {
      const ScenarioConfig cfg = load(spectrum_opts);
      const SpectralDensity s = build_spectrum(cfg);
      const fs::path p = out_dir(spectrum_opts) / "spectrum.csv";
      write_text_file(p, spectrum_text(s));
      say(spectrum_opts, "wrote " + p.string() + " (" + std::to_string(s.size()) + " points)");
    } else if (*theory_cmd) {
      const ScenarioConfig cfg = load(theory_opts);
      const SpectralDensity s = theory_spectrum.empty() ? build_spectrum(cfg) : load_spectrum(theory_spectrum);
      const TheoryProducts t = compute_theory(s, cfg);
      const fs::path dir = out_dir(theory_opts);
      std::ostringstream g;
      write_gamma_csv(g, t.gamma);
      write_text_file(dir / "gamma.csv", g.str());
      write_text_file(dir / "g2_theory.csv", g2_text(t.g2, t.coherence_time));
      write_text_file(dir / "g2_detected.csv", g2_text(t.g2_detected, t.coherence_time));
      say(theory_opts, "coherence_time_s=" + format_double(t.coherence_time));
    } else if (*synth_cmd) {
      const ScenarioConfig cfg = load(synth_opts);
      const SpectralDensity s = synth_spectrum.empty() ? build_spectrum(cfg) : load_spectrum(synth_spectrum);
      const auto [a, b] = synthesize_channels(s, cfg, synth_opts.threads);
      const fs::path dir = out_dir(synth_opts);
      write_pbt1(dir / "channel_a.pbt1", a);
      write_pbt1(dir / "channel_b.pbt1", b);
      say(synth_opts, "channel A: " + std::to_string(a.size()) + " events, channel B: " + std::to_string(b.size()) + " events");
    } else if (*corr_cmd) {
      std::optional<ScenarioConfig> cfg;
      if (!corr_opts.config.empty()) cfg = load(corr_opts);
      const auto need = [&](const std::optional<double>& v, const char* flag) {
        if (v) return *v;
        throw ConfigError(flag, "required without --config");
      };
      const double bin = bin_ps ? *bin_ps * 1e-12 : (cfg ? cfg->bin_width : need(bin_ps, "--bin-width-ps"));
      const double range = range_ns ? *range_ns * 1e-9 : (cfg ? cfg->tau_range : need(range_ns, "--range-ns"));
      CorrelatorMode mode = cfg ? cfg->mode : CorrelatorMode::full();
      if (mode_name) mode = *mode_name == "full" ? CorrelatorMode::full() : CorrelatorMode::start_stop(dead_ns * 1e-9);
      CorrelateOptions co;
      co.t_total = t_total ? t_total : (cfg ? std::optional<double>(cfg->synthesis.duration) : std::nullopt);
      co.chunks = cfg && chunks == 1 ? cfg->chunks : chunks;
      co.threads = corr_opts.threads;
      const EventStream a = read_pbt1(fs::path(file_a));
      const EventStream b = read_pbt1(fs::path(file_b));
      const CoincidenceHistogram h = cross_correlate(a, b, bin, range, mode, co);
      const fs::path p = out_dir(corr_opts) / "histogram.csv";
      write_text_file(p, histogram_text(h));
      say(corr_opts, "wrote " + p.string() + " (" + std::to_string(h.total()) + " coincidences)");
    } else if (*fit_cmd) {
      FitOptions fo;
      if (!fit_opts.config.empty()) fo = load(fit_opts).fit;
      if (exclude_ps) fo.exclude_center = *exclude_ps * 1e-12;
      const CoincidenceHistogram h = load_histogram(hist_file);
      try {
        const FitResult f = fit_bunching(h, fo);
        const fs::path p = out_dir(fit_opts) / "fit.json";
        write_text_file(p, fit_to_json(f));
        std::ostringstream msg;
        msg << "g2(0) = " << f.g2_zero << " +- " << f.g2_zero_err << ", tau_c = " << f.tau_c * 1e9 << " +- "
            << f.tau_c_err() * 1e9 << " ns, chi2_r = " << f.chi2_reduced;
        say(fit_opts, msg.str());
      } catch (const DegenerateFitError& e) {
        std::cerr << "hbtlab: " << e.what() << "\nhbtlab: baseline-only fallback a = " << e.baseline() << '\n';
        return 4;
      }
    } else if (*pipe_cmd) {
      PipelineOptions po;
      po.out_dir = pipe_opts.out;
      po.seed = pipe_opts.seed;
      po.threads = pipe_opts.threads;
      po.log = pipe_opts.quiet ? nullptr : &std::cout;
      const PipelineReport rep = run_pipeline(load_config(pipe_opts.config), po);
      std::ostringstream msg;
      msg << "g2(0) = " << rep.fit.g2_zero << " +- " << rep.fit.g2_zero_err << ", tau_c = " << rep.fit.tau_c * 1e9
          << " ns (theory " << rep.coherence_time * 1e9 << " ns); outputs in " << rep.out_dir.string();
      say(pipe_opts, msg.str());
    } else if (*acc_cmd) {
      AcceptanceOptions ao;
      ao.threads = acc_opts.threads;
      ao.only = only;
      ao.config_dir = config_dir;
      ao.work_dir = work_dir;
      ao.log = acc_opts.quiet ? nullptr : &std::cout;
      const auto results = run_acceptance(ao);
      int passed = 0;
      for (const auto& r : results) passed += r.passed;
      std::cout << passed << "/" << results.size() << " criteria passed\n";
      return passed == static_cast<int>(results.size()) ? 0 : 1;
    } else if (*bench_cmd) {
      const BenchResult b = run_correlator_bench(bench_events, bench_rate, bench_bin_ps * 1e-12, bench_range_ns * 1e-9,
                                                 bench_opts.threads);
      std::cout << std::setprecision(4) << "events=" << b.events << " pairs=" << b.pairs << " seconds=" << b.seconds
                << " events_per_s=" << b.events_per_second << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "hbtlab: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return 0;
}
