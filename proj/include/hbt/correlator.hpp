#pragma once

// Two-channel coincidence histogramming of tau = t_B - t_A.
//
// Bins are half-open [edge, edge + width); the histogram window is
// [-R, R) with R = ceil(tau_range / bin_width) * bin_width, so tau = 0 sits on
// an edge and belongs to the bin to its right.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hbt/photostream.hpp"

namespace hbt {

struct CorrelatorMode {
  enum class Kind { Full, StartStop };
  Kind kind = Kind::Full;
  double dead_time = 0.0;  // s, StartStop only

  static CorrelatorMode full() { return {}; }
  static CorrelatorMode start_stop(double dead_time) { return {Kind::StartStop, dead_time}; }
  std::string name() const { return kind == Kind::Full ? "full" : "start_stop"; }
  friend bool operator==(const CorrelatorMode&, const CorrelatorMode&) = default;
};

struct CoincidenceHistogram {
  double bin_width = 0.0;  // s
  double tau_min = 0.0;    // s, = -tau_max
  double tau_max = 0.0;    // s
  std::vector<std::uint64_t> counts;
  std::uint64_t n_a = 0;
  std::uint64_t n_b = 0;
  double t_total = 0.0;    // s
  CorrelatorMode mode;

  Index size() const { return static_cast<Index>(counts.size()); }
  double bin_center(Index i) const { return tau_min + (static_cast<double>(i) + 0.5) * bin_width; }
  Eigen::VectorXd centers() const;
  Eigen::VectorXd counts_as_double() const;
  std::uint64_t total() const;
  friend bool operator==(const CoincidenceHistogram&, const CoincidenceHistogram&) = default;
};

struct CorrelateOptions {
  /// Observation time used for normalization; defaults to the span of both streams.
  std::optional<double> t_total;
  /// Number of time chunks (Full mode) and worker threads. Results do not depend on either.
  int chunks = 1;
  int threads = 1;
};

/// Throws DomainError for unsorted input, bin widths below 1 ps or not an
/// integer number of ps, or tau_range < 10 bin widths.
CoincidenceHistogram cross_correlate(const EventStream& a, const EventStream& b, double bin_width, double tau_range,
                                     CorrelatorMode mode = CorrelatorMode::full(), const CorrelateOptions& opts = {});

/// Reference O(N_a N_b) all-pairs histogram (Full mode), same binning rules.
CoincidenceHistogram brute_force_correlate(const EventStream& a, const EventStream& b, double bin_width,
                                           double tau_range, std::optional<double> t_total = {});

struct G2Estimate {
  Eigen::VectorXd tau;
  Eigen::VectorXd g2;
  Eigen::VectorXd error;
};

/// g2_i = counts_i t_total / (n_a n_b bin_width), Poisson errors (zero counts use 1).
/// Refuses StartStop histograms.
G2Estimate normalize_g2(const CoincidenceHistogram& h);

struct DeficitReport {
  double total_ratio = 1.0;     // sum(ss) / sum(full)
  Eigen::VectorXd bin_ratio;    // NaN where the Full bin is empty
};

DeficitReport deficit_report(const CoincidenceHistogram& full, const CoincidenceHistogram& ss);

}  // namespace hbt
