#include "hbt/config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

#include "hbt/csv_io.hpp"

namespace hbt {

namespace {

// A YAML mapping whose keys are consumed one by one; leftovers are rejected.
class Section {
 public:
  Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (!node_.IsMap()) throw ConfigError(path_, "expected a mapping");
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) {
    used_.insert(key);
    return static_cast<bool>(node_[key]);
  }

  YAML::Node raw(const std::string& key) {
    used_.insert(key);
    return node_[key];
  }

  double number(const std::string& key) {
    if (!has(key)) throw ConfigError(key_path(key), "missing required field");
    return as_number(key);
  }
  double number(const std::string& key, double fallback) { return has(key) ? as_number(key) : fallback; }

  double positive(const std::string& key) { return check_positive(key, number(key)); }
  double positive(const std::string& key, double fallback) { return check_positive(key, number(key, fallback)); }

  double non_negative(const std::string& key, double fallback) {
    const double v = number(key, fallback);
    if (!(v >= 0.0)) throw ConfigError(key_path(key), "must be >= 0");
    return v;
  }

  double fraction(const std::string& key, double fallback, bool open_low, bool open_high) {
    const double v = number(key, fallback);
    const bool ok = (open_low ? v > 0.0 : v >= 0.0) && (open_high ? v < 1.0 : v <= 1.0);
    if (!ok) throw ConfigError(key_path(key), std::string("must lie in ") + (open_low ? "(0, " : "[0, ") + (open_high ? "1)" : "1]"));
    return v;
  }

  long long integer(const std::string& key, long long fallback, long long min_value) {
    long long v = fallback;
    if (has(key)) {
      try {
        v = node_[key].as<long long>();
      } catch (const YAML::Exception&) {
        throw ConfigError(key_path(key), "expected an integer");
      }
    }
    if (v < min_value) throw ConfigError(key_path(key), "must be >= " + std::to_string(min_value));
    return v;
  }

  std::uint64_t unsigned_integer(const std::string& key) {
    if (!has(key)) throw ConfigError(key_path(key), "missing required field");
    try {
      return node_[key].as<std::uint64_t>();
    } catch (const YAML::Exception&) {
      throw ConfigError(key_path(key), "expected a non-negative integer");
    }
  }

  std::string text(const std::string& key) {
    if (!has(key)) throw ConfigError(key_path(key), "missing required field");
    return text_value(key);
  }
  std::string text(const std::string& key, const std::string& fallback) { return has(key) ? text_value(key) : fallback; }

  Section child(const std::string& key) {
    if (!has(key)) throw ConfigError(key_path(key), "missing required section");
    return Section(node_[key], key_path(key));
  }

  void finish() const {
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!used_.count(key)) throw ConfigError(key_path(key), "unknown key");
    }
  }

  const std::string& path() const { return path_; }

 private:
  double as_number(const std::string& key) {
    try {
      const double v = node_[key].as<double>();
      if (!std::isfinite(v)) throw ConfigError(key_path(key), "must be finite");
      return v;
    } catch (const YAML::Exception&) {
      throw ConfigError(key_path(key), "expected a number");
    }
  }
  double check_positive(const std::string& key, double v) const {
    if (!(v > 0.0)) throw ConfigError(key_path(key), "must be > 0");
    return v;
  }
  std::string text_value(const std::string& key) {
    try {
      return node_[key].as<std::string>();
    } catch (const YAML::Exception&) {
      throw ConfigError(key_path(key), "expected a string");
    }
  }

  YAML::Node node_;
  std::string path_;
  std::set<std::string> used_;
};

double nm_to_hz(double nm) { return wavelength_to_frequency(nm * 1e-9); }

LineComponent parse_line(Section s) {
  LineComponent c;
  c.center = nm_to_hz(s.positive("center_nm"));
  c.fwhm = s.positive("fwhm_ghz") * 1e9;
  c.weight = s.non_negative("weight", 1.0);
  const std::string shape = s.text("shape", "gaussian");
  if (shape == "gaussian") c.shape = LineShape::Gaussian;
  else if (shape == "lorentzian") c.shape = LineShape::Lorentzian;
  else throw ConfigError(s.key_path("shape"), "must be gaussian or lorentzian");
  s.finish();
  return c;
}

SourceConfig parse_source(Section s, const std::filesystem::path& base_dir) {
  SourceConfig src;
  const std::string type = s.text("type");
  if (type == "lorentzian") {
    src.kind = SourceConfig::Kind::Lorentzian;
    src.center = nm_to_hz(s.positive("center_nm"));
    const bool by_tau = s.has("coherence_time_ns");
    const bool by_width = s.has("fwhm_ghz");
    if (by_tau == by_width) throw ConfigError(s.path(), "give exactly one of coherence_time_ns or fwhm_ghz");
    src.fwhm = by_tau ? 1.0 / (constants::pi * s.positive("coherence_time_ns") * 1e-9) : s.positive("fwhm_ghz") * 1e9;
  } else if (type == "blackbody") {
    src.kind = SourceConfig::Kind::Blackbody;
    src.temperature = s.positive("temperature_k");
  } else if (type == "lines") {
    src.kind = SourceConfig::Kind::Lines;
    const bool inline_lines = s.has("lines");
    const bool file = s.has("lines_file");
    if (inline_lines == file) throw ConfigError(s.path(), "give exactly one of lines or lines_file");
    if (inline_lines) {
      const YAML::Node list = s.raw("lines");
      if (!list.IsSequence() || list.size() == 0) throw ConfigError(s.key_path("lines"), "expected a non-empty list");
      for (std::size_t i = 0; i < list.size(); ++i)
        src.lines.push_back(parse_line(Section(list[i], s.key_path("lines") + "[" + std::to_string(i) + "]")));
    } else {
      std::filesystem::path p = s.text("lines_file");
      if (p.is_relative()) p = base_dir / p;
      std::ifstream in(p);
      if (!in) throw ConfigError(s.key_path("lines_file"), "cannot open " + p.string());
      try {
        src.lines = read_line_table_csv(in);
      } catch (const FormatError& e) {
        throw ConfigError(s.key_path("lines_file"), e.what());
      }
    }
  } else if (type == "flat") {
    src.kind = SourceConfig::Kind::Flat;
  } else {
    throw ConfigError(s.key_path("type"), "must be lorentzian, blackbody, lines or flat");
  }
  s.finish();
  return src;
}

FrequencyGrid parse_grid(Section s) {
  const double step = s.positive("step_mhz") * 1e6;
  FrequencyGrid g;
  if (s.has("center_nm")) {
    g = FrequencyGrid::centered(nm_to_hz(s.positive("center_nm")), s.positive("half_span_ghz") * 1e9, step);
  } else if (s.has("start_thz")) {
    const double start = s.positive("start_thz") * 1e12;
    const double stop = s.positive("stop_thz") * 1e12;
    if (!(stop > start)) throw ConfigError(s.key_path("stop_thz"), "must exceed start_thz");
    g = {start, step, static_cast<Index>(std::ceil((stop - start) / step)) + 1};
  } else {
    throw ConfigError(s.path(), "give center_nm/half_span_ghz or start_thz/stop_thz");
  }
  if (g.size > 50'000'000) throw ConfigError(s.path(), "grid exceeds 5e7 points");
  s.finish();
  return g;
}

Filter parse_filter(Section s) {
  const std::string type = s.text("type");
  Filter out;
  if (type == "bandpass" || type == "grating") {
    const bool grating = type == "grating";
    const double center = s.positive("center_nm") * 1e-9;
    const double fwhm = s.positive("fwhm_nm") * 1e-9;
    const double peak = s.fraction("peak_transmission", grating ? GratingFilter{}.peak_transmission : 1.0, true, false);
    if (grating) out = GratingFilter{center, fwhm, peak};
    else out = BandpassFilter{center, fwhm, peak};
  } else if (type == "etalon") {
    EtalonFilter e;
    e.thickness = s.positive("thickness_mm", e.thickness * 1e3) * 1e-3;
    e.refractive_index = s.number("refractive_index", e.refractive_index);
    if (!(e.refractive_index >= 1.0)) throw ConfigError(s.key_path("refractive_index"), "must be >= 1");
    e.reflectivity = s.fraction("reflectivity", e.reflectivity, true, true);
    e.reference_temperature = s.positive("reference_temperature_k", e.reference_temperature);
    e.set_temperature = s.positive("set_temperature_k", e.reference_temperature);
    e.tuning_rate = s.number("tuning_rate_ghz_per_k", e.tuning_rate * 1e-9) * 1e9;
    e.loss_factor = s.fraction("loss_factor", e.loss_factor, true, false);
    if (s.has("tune_to_nm")) {
      if (s.has("set_temperature_k")) throw ConfigError(s.key_path("tune_to_nm"), "conflicts with set_temperature_k");
      if (e.tuning_rate == 0.0) throw ConfigError(s.key_path("tune_to_nm"), "needs a non-zero tuning rate");
      e = tuned_to(e, nm_to_hz(s.positive("tune_to_nm")));
    }
    out = e;
  } else {
    throw ConfigError(s.key_path("type"), "must be bandpass, grating or etalon");
  }
  s.finish();
  return out;
}

DetectorModel parse_detector(Section s) {
  DetectorModel d;
  d.efficiency = s.fraction("efficiency", 1.0, false, false);
  const bool core = s.has("core_fwhm_ps");
  const bool pair = s.has("pair_fwhm_ps");
  if (core && pair) throw ConfigError(s.path(), "give at most one of core_fwhm_ps or pair_fwhm_ps");
  if (core) d.response.core_fwhm = s.non_negative("core_fwhm_ps", 0.0) * 1e-12;
  if (pair) d.response.core_fwhm = s.non_negative("pair_fwhm_ps", 0.0) * 1e-12 / std::sqrt(2.0);
  d.response.tail_weight = s.fraction("tail_weight", 0.0, false, false);
  d.response.tail_decay = s.non_negative("tail_decay_ps", 0.0) * 1e-12;
  if (d.response.tail_weight > 0.0 && d.response.tail_decay == 0.0)
    throw ConfigError(s.key_path("tail_decay_ps"), "must be > 0 when tail_weight > 0");
  d.dead_time = s.non_negative("dead_time_ns", 0.0) * 1e-9;
  d.dark_rate = s.non_negative("dark_rate_hz", 0.0);
  s.finish();
  return d;
}

}  // namespace

ScenarioConfig parse_config(const std::string& yaml_text, const std::filesystem::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError("", std::string("YAML syntax error: ") + e.what());
  }
  if (!root || root.IsNull()) throw ConfigError("", "empty configuration");
  Section top(root, "");
  ScenarioConfig cfg;
  cfg.source_text = yaml_text;
  cfg.name = top.text("name", "scenario");
  cfg.source = parse_source(top.child("source"), base_dir);
  if (top.has("grid")) cfg.grid = parse_grid(top.child("grid"));

  if (top.has("filters")) {
    const YAML::Node list = top.raw("filters");
    if (!list.IsSequence()) throw ConfigError("filters", "expected a list");
    for (std::size_t i = 0; i < list.size(); ++i)
      cfg.filters.push_back(parse_filter(Section(list[i], "filters[" + std::to_string(i) + "]")));
  }

  if (top.has("theory")) {
    Section t = top.child("theory");
    cfg.theory_tau_max = t.non_negative("tau_max_ns", 0.0) * 1e-9;
    cfg.theory_tau_step = t.non_negative("tau_step_ps", 0.0) * 1e-12;
    t.finish();
  }

  if (top.has("detectors")) {
    Section d = top.child("detectors");
    if (d.has("a")) cfg.detector_a = parse_detector(d.child("a"));
    if (d.has("b")) cfg.detector_b = parse_detector(d.child("b"));
    d.finish();
  }

  {
    Section s = top.child("synthesis");
    cfg.synthesis.master_seed = s.unsigned_integer("seed");
    cfg.synthesis.duration = s.positive("duration_s");
    cfg.synthesis.mean_rate = s.positive("rate_hz");
    cfg.split_ratio = s.fraction("split_ratio", 0.5, true, true);
    cfg.synthesis.block_length = static_cast<Index>(s.integer("block_length", cfg.synthesis.block_length, 1 << 14));
    cfg.synthesis.dt = s.non_negative("dt_ps", 0.0) * 1e-12;
    cfg.synthesis.modes = static_cast<int>(s.integer("modes", 1, 1));
    s.finish();
  }

  if (top.has("crosstalk")) {
    Section c = top.child("crosstalk");
    cfg.crosstalk_probability = c.fraction("probability", 0.0, false, false);
    cfg.crosstalk_delay_mean = c.positive("delay_mean_ps") * 1e-12;
    c.finish();
  }

  {
    Section c = top.child("correlator");
    cfg.bin_width = c.positive("bin_width_ps") * 1e-12;
    cfg.tau_range = c.positive("range_ns") * 1e-9;
    const std::string mode = c.text("mode", "full");
    const double dead = c.non_negative("dead_time_ns", 0.0) * 1e-9;
    if (mode == "full") {
      if (dead != 0.0) throw ConfigError(c.key_path("dead_time_ns"), "only valid with mode start_stop");
      cfg.mode = CorrelatorMode::full();
    } else if (mode == "start_stop") {
      cfg.mode = CorrelatorMode::start_stop(dead);
    } else {
      throw ConfigError(c.key_path("mode"), "must be full or start_stop");
    }
    cfg.chunks = static_cast<int>(c.integer("chunks", 1, 1));
    c.finish();
  }

  if (top.has("fit")) {
    Section f = top.child("fit");
    cfg.fit.exclude_center = f.non_negative("exclude_center_ps", 0.0) * 1e-12;
    f.finish();
  }

  if (top.has("output")) {
    Section o = top.child("output");
    cfg.output_dir = o.text("directory", "");
    if (!cfg.output_dir.empty() && cfg.output_dir.is_relative()) cfg.output_dir = base_dir / cfg.output_dir;
    o.finish();
  }
  top.finish();
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot open config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.parent_path());
}

}  // namespace hbt
