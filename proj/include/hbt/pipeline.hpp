#pragma once

// Stage functions behind the hbtlab subcommands and the monolithic pipeline.
// Each stage is a pure function of the scenario and the previous stage's
// products; the pipeline feeds every stage the re-parsed file it just wrote so
// running the subcommands one by one gives byte-identical results.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hbt/config.hpp"
#include "hbt/csv_io.hpp"

namespace hbt {

/// Library version recorded in run manifests.
std::string version();

/// Error raised by run_pipeline: names the stage and config section at fault and
/// keeps the exit code of the underlying error.
class StageError : public Error {
 public:
  StageError(std::string stage, std::string section, const std::string& what, int exit_code)
      : Error("stage '" + stage + "' failed (config: " + section + "): " + what),
        stage_(std::move(stage)),
        section_(std::move(section)),
        exit_code_(exit_code) {}
  const std::string& stage() const noexcept { return stage_; }
  const std::string& section() const noexcept { return section_; }
  int exit_code() const noexcept { return exit_code_; }

 private:
  std::string stage_;
  std::string section_;
  int exit_code_;
};

/// 0 success, 2 configuration or parameter error, 3 data-format error, 4 numerical failure, 1 other.
int exit_code_for(const std::exception& e);

/// Frequency grid used when the config has no explicit `grid` section.
FrequencyGrid default_grid(const ScenarioConfig& cfg);

/// Source spectrum times every filter.
SpectralDensity build_spectrum(const ScenarioConfig& cfg);

struct TheoryProducts {
  ComplexCoherence gamma;
  G2Curve g2;           // ideal detectors, single mode
  G2Curve g2_detected;  // convolved with both detector responses and mode-diluted
  double coherence_time = 0.0;
};

TheoryProducts compute_theory(const SpectralDensity& s, const ScenarioConfig& cfg);

/// Thermal events, beam splitter, detectors and optional crosstalk.
std::pair<EventStream, EventStream> synthesize_channels(const SpectralDensity& s, const ScenarioConfig& cfg,
                                                        int threads = 1);

CoincidenceHistogram correlate_channels(const EventStream& a, const EventStream& b, const ScenarioConfig& cfg,
                                        int threads = 1);

FitResult fit_histogram(const CoincidenceHistogram& h, const ScenarioConfig& cfg);

struct PipelineOptions {
  std::filesystem::path out_dir;            // empty: the config's output.directory
  std::optional<std::uint64_t> seed;        // overrides synthesis.seed
  int threads = 1;
  std::ostream* log = nullptr;              // progress lines; null for quiet
};

struct PipelineReport {
  std::filesystem::path out_dir;
  std::vector<std::string> stages;
  FitResult fit;
  double coherence_time = 0.0;
};

/// Writes spectrum.csv, gamma.csv, g2_theory.csv, g2_detected.csv, channel_a.pbt1,
/// channel_b.pbt1, histogram.csv, fit.json and manifest.json. On failure the
/// manifest is still written, flagged as partial, and StageError is thrown.
PipelineReport run_pipeline(ScenarioConfig cfg, const PipelineOptions& opts);

// File helpers shared with the CLI.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);
SpectralDensity load_spectrum(const std::filesystem::path& path);
CoincidenceHistogram load_histogram(const std::filesystem::path& path);
std::string spectrum_text(const SpectralDensity& s);
std::string histogram_text(const CoincidenceHistogram& h);

}  // namespace hbt
