#include "hbt/photostream.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

namespace hbt {

namespace {

constexpr double ps_per_s = 1e12;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Spectral variances of the N FFT bins of one block, folded into the band 1/dt
// around the carrier, normalized to a total of 1 / modes.
struct SpectralPlan {
  Index n = 0;
  double dt = 0.0;
  double carrier = 0.0;
  int modes = 1;
  Eigen::VectorXd amplitude;  // sqrt(var / 2) per bin
};

SpectralPlan make_plan(const SpectralDensity& s, Index n, double dt, int modes) {
  SpectralPlan plan{n, dt, s.centroid(), modes, Eigen::VectorXd(n)};
  const double band = 1.0 / dt;
  const double df = band / static_cast<double>(n);
  const double lo = s.nu_start();
  const double hi = s.grid().nu_end();
  Eigen::VectorXd var(n);
  for (Index j = 0; j < n; ++j) {
    const double f = static_cast<double>(j < n / 2 ? j : j - n) * df;
    const double base = plan.carrier + f;
    const auto m_lo = static_cast<long long>(std::ceil((lo - base) / band));
    const auto m_hi = static_cast<long long>(std::floor((hi - base) / band));
    double v = 0.0;
    for (long long m = m_lo; m <= m_hi; ++m) v += s(base + static_cast<double>(m) * band);
    var[j] = v;
  }
  const double total = var.sum();
  if (!(total > 0.0)) throw DegenerateSpectrumError("synthesize_field: spectrum has no power on the synthesis grid");
  var *= 1.0 / (total * static_cast<double>(modes));
  plan.amplitude = (0.5 * var).cwiseSqrt();
  return plan;
}

void check_config(const SpectralDensity& s, const SynthesisConfig& cfg, double dt) {
  if (!(cfg.duration > 0.0)) throw DomainError("synthesis: duration must be positive");
  if (!(cfg.mean_rate > 0.0)) throw DomainError("synthesis: mean rate must be positive");
  if (cfg.block_length < (Index{1} << 14)) throw DomainError("synthesis: block_length must be >= 2^14 samples");
  if (cfg.modes < 1) throw DomainError("synthesis: modes must be >= 1");
  const double tau_c = coherence_time_from_spectrum(s);
  if (static_cast<double>(cfg.block_length) * dt < 100.0 * tau_c)
    throw DomainError("synthesis: block shorter than 100 coherence times; increase block_length or dt");
}

// One block of complex field per mode, written into `field` (n x modes).
class BlockSynthesizer {
 public:
  explicit BlockSynthesizer(const SpectralPlan& plan)
      : plan_(plan), coeff_(static_cast<std::size_t>(plan.n)), out_(static_cast<std::size_t>(plan.n)) {}

  // Fills intensity[k] = sum_m |E_m[k]|^2; optionally keeps mode 0 samples.
  void run(std::uint64_t seed, Eigen::VectorXd& intensity, Eigen::VectorXcd* mode0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    const Index n = plan_.n;
    intensity.setZero(n);
    for (int m = 0; m < plan_.modes; ++m) {
      for (Index j = 0; j < n; ++j) {
        const double re = normal(rng);
        const double im = normal(rng);
        coeff_[static_cast<std::size_t>(j)] = plan_.amplitude[j] * std::complex<double>(re, im);
      }
      // Forward transform: E_k = sum_j c_j exp(-i 2 pi j k / N).
      fft_.fwd(out_, coeff_);
      for (Index k = 0; k < n; ++k) intensity[k] += std::norm(out_[static_cast<std::size_t>(k)]);
      if (m == 0 && mode0 != nullptr) {
        mode0->resize(n);
        for (Index k = 0; k < n; ++k) (*mode0)[k] = out_[static_cast<std::size_t>(k)];
      }
    }
  }

 private:
  const SpectralPlan& plan_;
  Eigen::FFT<double> fft_;
  std::vector<std::complex<double>> coeff_;
  std::vector<std::complex<double>> out_;
};

// Exponential-gap sampling of a Cox process with piecewise-constant intensity.
// `scale` converts intensity to expected events per sample.
void emit_events(const Eigen::Ref<const Eigen::VectorXd>& intensity, double scale, double t0_ps, double dt_ps,
                 double limit_ps, std::mt19937_64& rng, std::vector<std::uint64_t>& out) {
  std::exponential_distribution<double> expo(1.0);
  double need = expo(rng);
  for (Index k = 0; k < intensity.size(); ++k) {
    const double lam = scale * intensity[k];
    if (lam <= 0.0) continue;
    double acc = 0.0;
    while (acc + need <= lam) {
      acc += need;
      const double t = t0_ps + (static_cast<double>(k) + acc / lam) * dt_ps;
      if (t < limit_ps) out.push_back(static_cast<std::uint64_t>(t));
      need = expo(rng);
    }
    need -= lam - acc;
  }
}

}  // namespace

bool EventStream::is_sorted() const { return std::is_sorted(timestamps.begin(), timestamps.end()); }

double FieldTrace::mean_intensity() const { return samples.size() ? samples.squaredNorm() / samples.size() : 0.0; }

void validate(const DetectorModel& d) {
  if (!(d.efficiency >= 0.0 && d.efficiency <= 1.0)) throw DomainError("detector: efficiency must lie in [0, 1]");
  if (!(d.dead_time >= 0.0)) throw DomainError("detector: dead time must be >= 0");
  if (!(d.dark_rate >= 0.0)) throw DomainError("detector: dark rate must be >= 0");
  validate(d.response);
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view role, std::uint64_t index) {
  return splitmix64((master ^ fnv1a64(role)) + index * 0x9e3779b97f4a7c15ULL);
}

double synthesis_dt(const SpectralDensity& s, const SynthesisConfig& cfg) {
  if (cfg.dt > 0.0) return cfg.dt;
  return 1.0 / (4.0 * s.grid().span());
}

FieldTrace synthesize_field(const SpectralDensity& s, const SynthesisConfig& cfg) {
  const double dt = synthesis_dt(s, cfg);
  check_config(s, cfg, dt);
  const Index n = cfg.block_length;
  const auto total = static_cast<Index>(std::floor(cfg.duration / dt));
  if (total < 2) throw DomainError("synthesize_field: duration shorter than two samples");
  SpectralPlan plan = make_plan(s, n, dt, 1);
  FieldTrace trace{dt, plan.carrier, Eigen::VectorXcd(total)};
  BlockSynthesizer synth(plan);
  Eigen::VectorXd intensity;
  Eigen::VectorXcd block;
  for (Index b = 0; b * n < total; ++b) {
    synth.run(derive_seed(cfg.master_seed, "field", static_cast<std::uint64_t>(b)), intensity, &block);
    const Index len = std::min(n, total - b * n);
    trace.samples.segment(b * n, len) = block.head(len);
  }
  return trace;
}

EventStream generate_events(const FieldTrace& field, double mean_rate, std::uint64_t seed) {
  if (!(field.dt > 0.0) || field.samples.size() < 2) throw DomainError("generate_events: invalid field trace");
  if (!(mean_rate > 0.0)) throw DomainError("generate_events: mean rate must be positive");
  if (mean_rate * field.dt > 0.1)
    throw DomainError("generate_events: mean occupancy rate*dt exceeds 0.1; use a finer dt");
  const double mean_i = field.mean_intensity();
  if (!(mean_i > 0.0)) throw DomainError("generate_events: field has zero mean intensity");
  const Eigen::VectorXd intensity = field.samples.cwiseAbs2();
  EventStream out;
  std::mt19937_64 rng(seed);
  const double dt_ps = field.dt * ps_per_s;
  emit_events(intensity, mean_rate * field.dt / mean_i, 0.0, dt_ps, dt_ps * static_cast<double>(intensity.size()),
              rng, out.timestamps);
  return out;
}

EventStream synthesize_thermal_events(const SpectralDensity& s, const SynthesisConfig& cfg) {
  const double dt = synthesis_dt(s, cfg);
  check_config(s, cfg, dt);
  if (cfg.mean_rate * dt > 0.1)
    throw DomainError("synthesize_thermal_events: mean occupancy rate*dt exceeds 0.1; use a finer dt");
  const Index n = cfg.block_length;
  const SpectralPlan plan = make_plan(s, n, dt, cfg.modes);
  const double dt_ps = dt * ps_per_s;
  const double limit_ps = cfg.duration * ps_per_s;
  const auto blocks = static_cast<Index>(std::ceil(cfg.duration / (dt * static_cast<double>(n))));
  const double scale = cfg.mean_rate * dt;  // ensemble <I> = 1

  auto run_block = [&](BlockSynthesizer& synth, Eigen::VectorXd& intensity, Index b) {
    const auto idx = static_cast<std::uint64_t>(b);
    synth.run(derive_seed(cfg.master_seed, "field", idx), intensity, nullptr);
    std::mt19937_64 rng(derive_seed(cfg.master_seed, "events", idx));
    std::vector<std::uint64_t> ev;
    ev.reserve(static_cast<std::size_t>(scale * static_cast<double>(n) * 1.2) + 16);
    emit_events(intensity, scale, static_cast<double>(b * n) * dt_ps, dt_ps, limit_ps, rng, ev);
    return ev;
  };

  EventStream out;
  out.timestamps.reserve(static_cast<std::size_t>(cfg.mean_rate * cfg.duration * 1.05) + 16);
  const int threads = std::max(1, cfg.threads);
  if (threads == 1) {
    BlockSynthesizer synth(plan);
    Eigen::VectorXd intensity;
    for (Index b = 0; b < blocks; ++b) {
      const auto ev = run_block(synth, intensity, b);
      out.timestamps.insert(out.timestamps.end(), ev.begin(), ev.end());
    }
    return out;
  }
  // Batches of blocks; merged in block order so the output is thread-count independent.
  const Index batch = 4 * threads;
  std::vector<std::vector<std::uint64_t>> results(static_cast<std::size_t>(batch));
  for (Index first = 0; first < blocks; first += batch) {
    const Index count = std::min(batch, blocks - first);
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        BlockSynthesizer synth(plan);
        Eigen::VectorXd intensity;
        for (Index i = t; i < count; i += threads) results[static_cast<std::size_t>(i)] = run_block(synth, intensity, first + i);
      });
    }
    for (auto& th : pool) th.join();
    for (Index i = 0; i < count; ++i) {
      auto& ev = results[static_cast<std::size_t>(i)];
      out.timestamps.insert(out.timestamps.end(), ev.begin(), ev.end());
      ev.clear();
    }
  }
  return out;
}

EventStream poisson_events(double rate, double duration, std::uint64_t seed) {
  if (!(rate > 0.0) || !(duration > 0.0)) throw DomainError("poisson_events: rate and duration must be positive");
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> gap(rate);
  EventStream out;
  out.timestamps.reserve(static_cast<std::size_t>(rate * duration * 1.05) + 16);
  for (double t = gap(rng); t < duration; t += gap(rng)) out.timestamps.push_back(static_cast<std::uint64_t>(t * ps_per_s));
  return out;
}

std::pair<EventStream, EventStream> beamsplit(const EventStream& events, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw DomainError("beamsplit: ratio must lie in (0, 1)");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  EventStream a{0, {}};
  EventStream b{1, {}};
  a.timestamps.reserve(static_cast<std::size_t>(static_cast<double>(events.size()) * ratio * 1.01) + 16);
  b.timestamps.reserve(static_cast<std::size_t>(static_cast<double>(events.size()) * (1.0 - ratio) * 1.01) + 16);
  for (std::uint64_t t : events.timestamps) (uniform(rng) < ratio ? a : b).timestamps.push_back(t);
  return {std::move(a), std::move(b)};
}

EventStream apply_detector(const EventStream& events, const DetectorModel& det, double duration, std::uint64_t seed) {
  validate(det);
  if (!(duration > 0.0)) throw DomainError("apply_detector: duration must be positive");
  std::mt19937_64 rng(seed);
  const auto limit_ps = static_cast<std::int64_t>(std::llround(duration * ps_per_s));
  EventStream out{events.channel_id, {}};
  auto& ts = out.timestamps;

  if (det.efficiency < 1.0) {
    std::bernoulli_distribution keep(det.efficiency);
    ts.reserve(static_cast<std::size_t>(static_cast<double>(events.size()) * det.efficiency * 1.01) + 16);
    for (std::uint64_t t : events.timestamps)
      if (keep(rng)) ts.push_back(t);
  } else {
    ts = events.timestamps;
  }

  bool resort = false;
  if (det.dark_rate > 0.0) {
    std::poisson_distribution<long long> count(det.dark_rate * duration);
    std::uniform_real_distribution<double> where(0.0, static_cast<double>(limit_ps));
    const long long n = count(rng);
    for (long long i = 0; i < n; ++i) ts.push_back(static_cast<std::uint64_t>(where(rng)));
    resort = true;
  }

  const DetectorResponse& r = det.response;
  if (!r.is_ideal()) {
    std::normal_distribution<double> core(0.0, r.core_sigma() * ps_per_s);
    std::bernoulli_distribution in_tail(r.tail_weight);
    std::exponential_distribution<double> tail(1.0 / (r.tail_decay * ps_per_s));
    const bool has_tail = r.tail_weight > 0.0 && r.tail_decay > 0.0;
    std::vector<std::uint64_t> jittered;
    jittered.reserve(ts.size());
    for (std::uint64_t t : ts) {
      double shift = r.core_fwhm > 0.0 ? core(rng) : 0.0;
      if (has_tail && in_tail(rng)) shift += tail(rng);
      const std::int64_t moved = static_cast<std::int64_t>(t) + std::llround(shift);
      if (moved >= 0 && moved <= limit_ps) jittered.push_back(static_cast<std::uint64_t>(moved));
    }
    ts = std::move(jittered);
    resort = true;
  }
  if (resort) std::sort(ts.begin(), ts.end());

  if (det.dead_time > 0.0) {
    const auto dead_ps = static_cast<std::uint64_t>(std::llround(det.dead_time * ps_per_s));
    std::size_t kept = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      if (kept == 0 || ts[i] - ts[kept - 1] >= dead_ps) ts[kept++] = ts[i];
    }
    ts.resize(kept);
  }
  return out;
}

std::pair<EventStream, EventStream> crosstalk_inject(const EventStream& a, const EventStream& b, double prob,
                                                     double delay_mean, std::uint64_t seed) {
  if (!(prob >= 0.0 && prob <= 1.0)) throw DomainError("crosstalk_inject: probability must lie in [0, 1]");
  if (prob == 0.0) return {a, b};
  if (!(delay_mean > 0.0)) throw DomainError("crosstalk_inject: mean delay must be positive");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution spawn(prob);
  std::exponential_distribution<double> delay(1.0 / (delay_mean * ps_per_s));
  auto spawned = [&](const EventStream& src) {
    std::vector<std::uint64_t> extra;
    for (std::uint64_t t : src.timestamps)
      if (spawn(rng)) extra.push_back(t + static_cast<std::uint64_t>(std::llround(delay(rng))));
    std::sort(extra.begin(), extra.end());
    return extra;
  };
  const auto into_b = spawned(a);
  const auto into_a = spawned(b);
  auto merge = [](const EventStream& base, const std::vector<std::uint64_t>& extra) {
    EventStream out{base.channel_id, {}};
    out.timestamps.resize(base.size() + extra.size());
    std::merge(base.timestamps.begin(), base.timestamps.end(), extra.begin(), extra.end(), out.timestamps.begin());
    return out;
  };
  return {merge(a, into_a), merge(b, into_b)};
}

}  // namespace hbt
