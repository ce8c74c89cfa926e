#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "hbt/pipeline.hpp"
#include "hbt/timetag_io.hpp"

using namespace hbt;
namespace fs = std::filesystem;

namespace {

const fs::path configs = fs::path(HBT_SOURCE_DIR) / "configs";

struct Run {
  int code = -1;
  std::string out;
};

Run hbtlab(const std::string& args, const fs::path& dir) {
  const fs::path log = dir / "stdout.txt";
  const std::string cmd = std::string("\"") + HBTLAB_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_text_file(log);
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hbtlab-cli-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string quoted(const fs::path& p) { return "\"" + p.string() + "\""; }

const char* small_config = R"(name: small
source: {type: lorentzian, center_nm: 546.1, fwhm_ghz: 2}
synthesis: {seed: 77, duration_s: 5.0e-5, rate_hz: 1.0e9, dt_ps: 6}
correlator: {bin_width_ps: 16, range_ns: 2}
)";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("theory reports the coherence time of a 2 GHz Lorentzian") {
  const auto dir = scratch("theory");
  const Run r = hbtlab("theory --config " + quoted(configs / "lorentzian_2ghz.yaml") + " --out " + quoted(dir), dir);
  REQUIRE(r.code == 0);
  const auto at = r.out.find("coherence_time_s=");
  REQUIRE(at != std::string::npos);
  const double tau_c = std::stod(r.out.substr(at + 17));
  CHECK(tau_c == doctest::Approx(1.0 / (constants::pi * 2e9)).epsilon(0.01));
  CHECK(fs::exists(dir / "gamma.csv"));
  CHECK(fs::exists(dir / "g2_theory.csv"));
  CHECK(fs::exists(dir / "g2_detected.csv"));
}

TEST_CASE("a config without a required field exits with code 2") {
  const auto dir = scratch("badcfg");
  std::string text = small_config;
  text.replace(text.find(", rate_hz: 1.0e9"), 16, "");
  write_text_file(dir / "bad.yaml", text);
  const Run r = hbtlab("pipeline --quiet --config " + quoted(dir / "bad.yaml") + " --out " + quoted(dir / "out"), dir);
  CHECK(r.code == 2);
  CHECK(r.out.find("synthesis.rate_hz") != std::string::npos);
}

TEST_CASE("fitting an all-zero histogram fails cleanly") {
  const auto dir = scratch("zerofit");
  CoincidenceHistogram h;
  h.bin_width = 16e-12;
  h.tau_max = 2.0e-9;
  h.tau_min = -2.0e-9;
  h.counts.assign(250, 0);
  h.n_a = 10;
  h.n_b = 10;
  h.t_total = 1e-3;
  write_text_file(dir / "histogram.csv", histogram_text(h));
  const Run r = hbtlab("fit --histogram " + quoted(dir / "histogram.csv") + " --out " + quoted(dir), dir);
  CHECK(r.code != 0);
  CHECK(r.code == 4);
  CHECK(r.out.find("baseline") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "fit.json"));
}

TEST_CASE("a corrupt time-tag file exits with code 3") {
  const auto dir = scratch("badtags");
  write_text_file(dir / "a.pbt1", "PBT0 not a tag file");
  write_pbt1(dir / "b.pbt1", EventStream{1, {1, 2, 3}});
  const Run r = hbtlab("correlate --a " + quoted(dir / "a.pbt1") + " --b " + quoted(dir / "b.pbt1") +
                           " --bin-width-ps 10 --range-ns 1 --out " + quoted(dir),
                       dir);
  CHECK(r.code == 3);
  CHECK(r.out.find("byte offset 0") != std::string::npos);
}

TEST_CASE("correlate agrees with the all-pairs reference") {
  const auto dir = scratch("correlate");
  const EventStream a = poisson_events(2e8, 5e-5, 101);
  EventStream b = poisson_events(2e8, 5e-5, 102);
  b.channel_id = 1;
  write_pbt1(dir / "a.pbt1", a);
  write_pbt1(dir / "b.pbt1", b);
  const Run r = hbtlab("correlate --quiet --a " + quoted(dir / "a.pbt1") + " --b " + quoted(dir / "b.pbt1") +
                           " --bin-width-ps 10 --range-ns 1 --t-total-s 5e-5 --chunks 5 --out " + quoted(dir),
                       dir);
  REQUIRE(r.code == 0);
  const auto h = load_histogram(dir / "histogram.csv");
  CHECK(h == brute_force_correlate(a, b, 10e-12, 1e-9, 5e-5));
}

TEST_CASE("running the stages one by one reproduces the pipeline") {
  const auto dir = scratch("stages");
  write_text_file(dir / "small.yaml", small_config);
  const std::string cfg = " --quiet --config " + quoted(dir / "small.yaml");
  const fs::path mono = dir / "mono";
  const fs::path step = dir / "step";

  REQUIRE(hbtlab("pipeline" + cfg + " --out " + quoted(mono), dir).code == 0);
  REQUIRE(hbtlab("spectrum" + cfg + " --out " + quoted(step), dir).code == 0);
  REQUIRE(hbtlab("theory" + cfg + " --spectrum " + quoted(step / "spectrum.csv") + " --out " + quoted(step), dir).code == 0);
  REQUIRE(hbtlab("synth" + cfg + " --spectrum " + quoted(step / "spectrum.csv") + " --out " + quoted(step), dir).code == 0);
  REQUIRE(hbtlab("correlate" + cfg + " --a " + quoted(step / "channel_a.pbt1") + " --b " +
                     quoted(step / "channel_b.pbt1") + " --out " + quoted(step),
                 dir)
              .code == 0);
  REQUIRE(hbtlab("fit" + cfg + " --histogram " + quoted(step / "histogram.csv") + " --out " + quoted(step), dir).code == 0);

  for (const char* name : {"spectrum.csv", "gamma.csv", "g2_theory.csv", "g2_detected.csv", "channel_a.pbt1",
                           "channel_b.pbt1", "histogram.csv", "fit.json"}) {
    CAPTURE(name);
    CHECK(read_text_file(mono / name) == read_text_file(step / name));
  }
  const std::string manifest = read_text_file(mono / "manifest.json");
  CHECK(manifest.find("\"status\": \"complete\"") != std::string::npos);
}

TEST_CASE("unknown subcommands and options are usage errors") {
  const auto dir = scratch("usage");
  CHECK(hbtlab("frobnicate", dir).code != 0);
  CHECK(hbtlab("correlate --bogus", dir).code != 0);
  CHECK(hbtlab("--help", dir).code == 0);
}

}  // TEST_SUITE
