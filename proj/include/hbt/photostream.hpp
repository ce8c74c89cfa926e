#pragma once

// Thermal-light photon timestamp synthesis and detector imperfections.
//
// The thermal field is a stationary circular complex Gaussian process with the
// given spectrum, synthesized block-wise by inverse Fourier transform of random
// spectral coefficients. Photon events follow the doubly stochastic (Cox)
// Poisson process driven by I(t) = |E(t)|^2. Timestamps are integer
// picoseconds.
//
// Seeds: every random stream is seeded with derive_seed(master, role, index),
// a splitmix64 finalizer over (master ^ fnv1a64(role)) + index * golden gamma.
// This mixing function is part of the file-format contract: changing it changes
// every synthesized data set.

#include <Eigen/Dense>

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

#include "hbt/coherence.hpp"
#include "hbt/spectral.hpp"

namespace hbt {

/// Sorted integer timestamps in units of 1 ps for a single channel.
struct EventStream {
  std::uint16_t channel_id = 0;
  std::vector<std::uint64_t> timestamps;

  std::size_t size() const { return timestamps.size(); }
  bool empty() const { return timestamps.empty(); }
  bool is_sorted() const;
  friend bool operator==(const EventStream&, const EventStream&) = default;
};

/// Uniformly sampled complex field envelope. The optical field is
/// samples[k] * exp(-i 2 pi carrier_hz t_k).
struct FieldTrace {
  double dt = 0.0;
  double carrier_hz = 0.0;
  Eigen::VectorXcd samples;

  /// Sample mean of |E|^2.
  double mean_intensity() const;
};

struct DetectorModel {
  double efficiency = 1.0;
  DetectorResponse response;
  double dead_time = 0.0;  // s, non-paralyzable
  double dark_rate = 0.0;  // Hz
};

void validate(const DetectorModel& d);

struct SynthesisConfig {
  std::uint64_t master_seed = 1;
  double duration = 1e-3;     // s
  double mean_rate = 1e6;     // Hz, total photon rate driving generate_events
  Index block_length = 1 << 16;
  double dt = 0.0;            // s; 0 selects 1 / (4 * spectral grid span)
  int modes = 1;              // independent thermal modes summed in intensity
  int threads = 1;
};

std::uint64_t fnv1a64(std::string_view text);
std::uint64_t derive_seed(std::uint64_t master, std::string_view role, std::uint64_t index);

/// Effective field sample step for the config (explicit dt or the default).
double synthesis_dt(const SpectralDensity& s, const SynthesisConfig& cfg);

/// Materialized single-mode field trace covering cfg.duration. Spectral content
/// outside the sampling band 1/dt is folded into it, so the sample
/// autocovariance equals gamma(k dt) exp(i 2 pi carrier k dt).
FieldTrace synthesize_field(const SpectralDensity& s, const SynthesisConfig& cfg);

/// Cox-process events with mean rate_hz * dt * I_k / <I> per sample, placed
/// uniformly within the sample interval.
EventStream generate_events(const FieldTrace& field, double mean_rate, std::uint64_t seed);

/// Streaming combination of synthesize_field and generate_events for long runs:
/// blocks are synthesized, converted to events and discarded. Supports several
/// independent modes (I = sum_m |E_m|^2) and block-parallel execution; the
/// result is independent of cfg.threads.
EventStream synthesize_thermal_events(const SpectralDensity& s, const SynthesisConfig& cfg);

/// Homogeneous Poisson events (constant intensity) on [0, duration).
EventStream poisson_events(double rate, double duration, std::uint64_t seed);

/// Routes each event to A with probability `ratio`, else to B.
std::pair<EventStream, EventStream> beamsplit(const EventStream& events, double ratio, std::uint64_t seed);

/// Efficiency thinning, dark counts, timing jitter, re-sort, non-paralyzable dead time.
/// Events jittered outside [0, duration] are dropped.
EventStream apply_detector(const EventStream& events, const DetectorModel& det, double duration, std::uint64_t seed);

/// Each event spawns, with probability prob, a false event on the other channel
/// after an exponential delay of mean delay_mean.
std::pair<EventStream, EventStream> crosstalk_inject(const EventStream& a, const EventStream& b, double prob,
                                                     double delay_mean, std::uint64_t seed);

}  // namespace hbt
