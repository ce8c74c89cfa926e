#pragma once

// Acceptance criteria 1-12 as executable checks. Each check is self-contained
// and reports its measured values; thresholds are the published criteria.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace hbt {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct AcceptanceOptions {
  int threads = 1;
  std::vector<int> only;                  // empty: all criteria
  std::filesystem::path config_dir;       // shipped scenario configs; empty: <source>/configs
  std::filesystem::path work_dir;         // pipeline outputs; empty: a temp directory
  std::ostream* log = nullptr;            // one line per finished criterion
};

struct BenchResult {
  std::size_t events = 0;
  std::uint64_t pairs = 0;
  double seconds = 0.0;
  double events_per_second = 0.0;
};

/// Full-mode correlation of two independent Poisson streams; reports (n_a + n_b) / wall time.
BenchResult run_correlator_bench(std::size_t events_per_channel, double rate, double bin_width, double tau_range,
                                 int threads = 1);

int acceptance_criterion_count();
CriterionResult run_criterion(int id, const AcceptanceOptions& opts);
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts);

/// "[PASS]  3  ideal thermal closure ... detail (12.3 s)"
std::string format_result(const CriterionResult& r);

}  // namespace hbt
