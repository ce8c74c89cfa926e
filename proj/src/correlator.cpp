#include "hbt/correlator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iterator>
#include <limits>
#include <thread>

namespace hbt {

namespace {

constexpr double ps_per_s = 1e12;

struct Binning {
  std::int64_t width_ps = 0;
  std::int64_t range_ps = 0;  // R
  Index bins = 0;
};

Binning make_binning(double bin_width, double tau_range) {
  if (!(bin_width > 0.0) || !std::isfinite(bin_width)) throw DomainError("correlator: bin width must be positive");
  const double w = bin_width * ps_per_s;
  if (w < 1.0 - 1e-9) throw DomainError("correlator: bin width finer than the 1 ps stream resolution");
  const auto w_ps = static_cast<std::int64_t>(std::llround(w));
  if (std::abs(w - static_cast<double>(w_ps)) > 1e-6 * static_cast<double>(w_ps))
    throw DomainError("correlator: bin width must be an integer number of picoseconds");
  if (!(tau_range >= 10.0 * bin_width * (1.0 - 1e-12)))
    throw DomainError("correlator: tau range must be at least 10 bin widths");
  const auto half = static_cast<std::int64_t>(std::ceil(tau_range / bin_width - 1e-9));
  return {w_ps, half * w_ps, static_cast<Index>(2 * half)};
}

void check_stream(const EventStream& s, const char* name) {
  if (!s.is_sorted()) throw DomainError(std::string("correlator: channel ") + name + " timestamps are not sorted");
  if (!s.empty() && s.timestamps.back() > (std::uint64_t{1} << 62))
    throw DomainError(std::string("correlator: channel ") + name + " timestamps exceed 2^62 ps");
}

double default_t_total(const EventStream& a, const EventStream& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::uint64_t lo = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t hi = 0;
  for (const EventStream* s : {&a, &b}) {
    if (s->empty()) continue;
    lo = std::min(lo, s->timestamps.front());
    hi = std::max(hi, s->timestamps.back());
  }
  return static_cast<double>(hi - lo) / ps_per_s;
}

CoincidenceHistogram empty_histogram(const EventStream& a, const EventStream& b, const Binning& bin,
                                     CorrelatorMode mode, std::optional<double> t_total) {
  CoincidenceHistogram h;
  h.bin_width = static_cast<double>(bin.width_ps) / ps_per_s;
  h.tau_max = static_cast<double>(bin.range_ps) / ps_per_s;
  h.tau_min = -h.tau_max;
  h.counts.assign(static_cast<std::size_t>(bin.bins), 0);
  h.n_a = a.size();
  h.n_b = b.size();
  h.t_total = t_total ? *t_total : default_t_total(a, b);
  h.mode = mode;
  return h;
}

// Sliding-window sweep over A events [first, last).
void sweep_full(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b, std::size_t first,
                std::size_t last, const Binning& bin, std::vector<std::uint64_t>& counts) {
  if (first >= last || b.empty()) return;
  const std::int64_t r = bin.range_ps;
  const std::int64_t w = bin.width_ps;
  const auto* bp = reinterpret_cast<const std::int64_t*>(b.data());
  const auto nb = static_cast<std::int64_t>(b.size());
  const std::int64_t start = static_cast<std::int64_t>(a[first]) - r;
  std::int64_t lo = std::lower_bound(b.begin(), b.end(), static_cast<std::uint64_t>(std::max<std::int64_t>(start, 0))) - b.begin();
  std::uint64_t* c = counts.data();
  for (std::size_t i = first; i < last; ++i) {
    const auto ta = static_cast<std::int64_t>(a[i]);
    const std::int64_t low = ta - r;
    const std::int64_t high = ta + r;
    while (lo < nb && bp[lo] < low) ++lo;
    for (std::int64_t j = lo; j < nb && bp[j] < high; ++j) ++c[(bp[j] - low) / w];
  }
}

// Pairs are taken in the order they complete (t_rec = later event of the pair),
// as a single causal instrument would see them. A pair is recorded when neither
// event lies in (t_rec', t_rec' + D) of an earlier recorded pair; recording opens
// that interval for both channels. With D = 0 every pair is recorded.
void sweep_start_stop(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b, const Binning& bin,
                      double dead_time, std::vector<std::uint64_t>& counts) {
  const std::int64_t r = bin.range_ps;
  const std::int64_t w = bin.width_ps;
  const auto dead = static_cast<std::int64_t>(std::llround(dead_time * ps_per_s));
  const auto* ap = reinterpret_cast<const std::int64_t*>(a.data());
  const auto* bp = reinterpret_cast<const std::int64_t*>(b.data());
  const auto na = static_cast<std::int64_t>(a.size());
  const auto nb = static_cast<std::int64_t>(b.size());

  std::deque<std::int64_t> recorded;  // non-decreasing t_rec values still able to blind
  auto visible = [&](std::int64_t t) {
    // The latest t_rec' < t reaches furthest; intervals all have length D.
    auto it = std::lower_bound(recorded.begin(), recorded.end(), t);
    return it == recorded.begin() || t >= *std::prev(it) + dead;
  };
  auto record = [&](std::int64_t ta, std::int64_t tb, std::int64_t t_rec) {
    ++counts[static_cast<std::size_t>((tb - ta + r) / w)];
    if (dead > 0 && (recorded.empty() || recorded.back() != t_rec)) recorded.push_back(t_rec);
  };

  // Merged sweep; on equal timestamps A goes first so a zero-delay pair completes on B.
  std::int64_t i = 0, j = 0;
  std::int64_t lo_a = 0, lo_b = 0;  // earliest partners still inside the window
  while (i < na || j < nb) {
    const bool take_a = j >= nb || (i < na && ap[i] <= bp[j]);
    const std::int64_t t = take_a ? ap[i] : bp[j];
    while (!recorded.empty() && recorded.front() + dead <= t - r) recorded.pop_front();
    if (take_a) {
      // Completes (a = t, b) for earlier b with tau = b - t in [-R, 0).
      while (lo_b < j && bp[lo_b] < t - r) ++lo_b;
      if (visible(t))
        for (std::int64_t k = lo_b; k < j; ++k)
          if (visible(bp[k])) record(t, bp[k], t);
      ++i;
    } else {
      // Completes (a, b = t) for earlier-or-equal a with tau = t - a in [0, R).
      while (lo_a < i && ap[lo_a] <= t - r) ++lo_a;
      if (visible(t))
        for (std::int64_t k = lo_a; k < i; ++k)
          if (visible(ap[k])) record(ap[k], t, t);
      ++j;
    }
  }
}

}  // namespace

Eigen::VectorXd CoincidenceHistogram::centers() const {
  Eigen::VectorXd c(size());
  for (Index i = 0; i < size(); ++i) c[i] = bin_center(i);
  return c;
}

Eigen::VectorXd CoincidenceHistogram::counts_as_double() const {
  Eigen::VectorXd c(size());
  for (Index i = 0; i < size(); ++i) c[i] = static_cast<double>(counts[static_cast<std::size_t>(i)]);
  return c;
}

std::uint64_t CoincidenceHistogram::total() const {
  std::uint64_t s = 0;
  for (std::uint64_t c : counts) s += c;
  return s;
}

CoincidenceHistogram cross_correlate(const EventStream& a, const EventStream& b, double bin_width, double tau_range,
                                     CorrelatorMode mode, const CorrelateOptions& opts) {
  const Binning bin = make_binning(bin_width, tau_range);
  check_stream(a, "A");
  check_stream(b, "B");
  if (mode.kind == CorrelatorMode::Kind::StartStop && !(mode.dead_time >= 0.0))
    throw DomainError("correlator: dead time must be >= 0");
  CoincidenceHistogram h = empty_histogram(a, b, bin, mode, opts.t_total);
  if (a.empty() || b.empty()) return h;

  if (mode.kind == CorrelatorMode::Kind::StartStop) {
    sweep_start_stop(a.timestamps, b.timestamps, bin, mode.dead_time, h.counts);
    return h;
  }

  const std::size_t chunks = static_cast<std::size_t>(std::max(1, opts.chunks));
  const std::size_t n = a.size();
  std::vector<std::vector<std::uint64_t>> partial(chunks, std::vector<std::uint64_t>(h.counts.size(), 0));
  auto run = [&](std::size_t c) { sweep_full(a.timestamps, b.timestamps, c * n / chunks, (c + 1) * n / chunks, bin, partial[c]); };
  const int threads = std::max(1, opts.threads);
  if (threads == 1 || chunks == 1) {
    for (std::size_t c = 0; c < chunks; ++c) run(c);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t c = static_cast<std::size_t>(t); c < chunks; c += static_cast<std::size_t>(threads)) run(c);
      });
    for (auto& th : pool) th.join();
  }
  for (const auto& p : partial) {
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
      if (h.counts[i] > std::numeric_limits<std::uint64_t>::max() - p[i]) throw NumericalError("correlator: bin counter overflow");
      h.counts[i] += p[i];
    }
  }
  return h;
}

CoincidenceHistogram brute_force_correlate(const EventStream& a, const EventStream& b, double bin_width,
                                           double tau_range, std::optional<double> t_total) {
  const Binning bin = make_binning(bin_width, tau_range);
  CoincidenceHistogram h = empty_histogram(a, b, bin, CorrelatorMode::full(), t_total);
  const std::int64_t r = bin.range_ps;
  for (std::uint64_t ua : a.timestamps) {
    const auto ta = static_cast<std::int64_t>(ua);
    for (std::uint64_t ub : b.timestamps) {
      const std::int64_t d = static_cast<std::int64_t>(ub) - ta;
      if (d >= -r && d < r) ++h.counts[static_cast<std::size_t>((d + r) / bin.width_ps)];
    }
  }
  return h;
}

G2Estimate normalize_g2(const CoincidenceHistogram& h) {
  if (h.mode.kind != CorrelatorMode::Kind::Full)
    throw DomainError(
        "normalize_g2: start-stop histograms carry a dead-time deficit and cannot be normalized; "
        "fit the raw counts with the bunching model instead");
  if (h.n_a == 0 || h.n_b == 0 || !(h.t_total > 0.0) || !(h.bin_width > 0.0))
    throw DomainError("normalize_g2: histogram needs non-zero singles, observation time and bin width");
  const double scale = h.t_total / (static_cast<double>(h.n_a) * static_cast<double>(h.n_b) * h.bin_width);
  G2Estimate g{h.centers(), h.counts_as_double() * scale, Eigen::VectorXd(h.size())};
  for (Index i = 0; i < h.size(); ++i) g.error[i] = std::sqrt(std::max(1.0, g.g2[i] / scale)) * scale;
  return g;
}

DeficitReport deficit_report(const CoincidenceHistogram& full, const CoincidenceHistogram& ss) {
  if (full.bin_width != ss.bin_width || full.tau_min != ss.tau_min || full.size() != ss.size())
    throw DomainError("deficit_report: histograms use different binning");
  DeficitReport r;
  const double total_full = static_cast<double>(full.total());
  r.total_ratio = total_full > 0.0 ? static_cast<double>(ss.total()) / total_full : 1.0;
  r.bin_ratio.resize(full.size());
  for (Index i = 0; i < full.size(); ++i) {
    const auto f = static_cast<double>(full.counts[static_cast<std::size_t>(i)]);
    r.bin_ratio[i] = f > 0.0 ? static_cast<double>(ss.counts[static_cast<std::size_t>(i)]) / f
                             : std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

}  // namespace hbt
