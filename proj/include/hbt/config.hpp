#pragma once

// Scenario configuration (YAML). Units are carried by key suffixes
// (_nm, _ghz, _mhz, _thz, _ns, _ps, _s, _k, _hz, _mm) and converted to SI at
// parse time. Unknown keys are rejected; errors name the offending key path.
//
//   name: hg_replica
//   source:      {type: lorentzian, center_nm: 546.1, coherence_time_ns: 0.436}
//                {type: blackbody, temperature_k: 5800}
//                {type: lines, lines: [{center_nm, fwhm_ghz, weight, shape}] | lines_file: table.csv}
//                {type: flat}
//   grid:        {center_nm, half_span_ghz, step_mhz} | {start_thz, stop_thz, step_mhz}   (optional)
//   filters:     [{type: bandpass|grating, center_nm, fwhm_nm, peak_transmission},
//                 {type: etalon, thickness_mm, refractive_index, reflectivity, set_temperature_k,
//                  reference_temperature_k, tuning_rate_ghz_per_k, loss_factor, tune_to_nm}]
//   theory:      {tau_max_ns, tau_step_ps}                                                  (optional)
//   detectors:   {a: {...}, b: {...}} each {efficiency, core_fwhm_ps | pair_fwhm_ps, tail_weight,
//                 tail_decay_ps, dead_time_ns, dark_rate_hz}
//   synthesis:   {seed, duration_s, rate_hz, split_ratio, block_length, dt_ps, modes}
//   crosstalk:   {probability, delay_mean_ps}                                               (optional)
//   correlator:  {bin_width_ps, range_ns, mode: full|start_stop, dead_time_ns, chunks}
//   fit:         {exclude_center_ps}                                                        (optional)
//   output:      {directory}                                                                (optional)

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hbt/correlator.hpp"
#include "hbt/inference.hpp"
#include "hbt/photostream.hpp"
#include "hbt/spectral.hpp"

namespace hbt {

struct SourceConfig {
  enum class Kind { Lorentzian, Blackbody, Lines, Flat };
  Kind kind = Kind::Lorentzian;
  double center = 0.0;       // Hz (lorentzian)
  double fwhm = 0.0;         // Hz (lorentzian)
  double temperature = 0.0;  // K (blackbody)
  std::vector<LineComponent> lines;
};

struct ScenarioConfig {
  std::string name;
  SourceConfig source;
  std::optional<FrequencyGrid> grid;
  std::vector<Filter> filters;
  double theory_tau_max = 0.0;   // s, 0 = automatic
  double theory_tau_step = 0.0;  // s, 0 = automatic
  DetectorModel detector_a;
  DetectorModel detector_b;
  SynthesisConfig synthesis;
  double split_ratio = 0.5;
  double crosstalk_probability = 0.0;
  double crosstalk_delay_mean = 0.0;  // s
  double bin_width = 16e-12;          // s
  double tau_range = 5e-9;            // s
  CorrelatorMode mode;
  int chunks = 1;
  FitOptions fit;
  std::filesystem::path output_dir;
  /// Raw text the config was parsed from; hashed into the run manifest.
  std::string source_text;
};

/// `base_dir` resolves relative paths (line tables) inside the config.
ScenarioConfig parse_config(const std::string& yaml_text, const std::filesystem::path& base_dir = {});
ScenarioConfig load_config(const std::filesystem::path& path);

}  // namespace hbt
