#include "utopk/window.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "utopk/errors.hpp"
#include "utopk/numeric.hpp"

namespace utopk {

namespace {

constexpr double kMinStddev = 1e-12;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

void WindowConfig::validate() const {
  if (length < 1) {
    throw InvalidArgument("window length must be at least 1");
  }
  if (!(sample_fraction > 0.0 && sample_fraction <= 1.0)) {
    throw InvalidArgument("sample fraction must lie in (0, 1]");
  }
  if (step < 0.0) {
    throw InvalidArgument("window grid step must be non-negative");
  }
}

double WindowConfig::resolved_step(double frame_step) const {
  return step > 0.0 ? step : frame_step / static_cast<double>(length);
}

std::int64_t WindowConfig::sample_size() const {
  // Guard against 0.1 * 30 landing a hair above 3.
  const double raw = sample_fraction * static_cast<double>(length);
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(raw - 1e-9)));
}

std::vector<WindowSpec> make_windows(std::span<const FrameId> representative,
                                     std::int64_t length) {
  if (length < 1) {
    throw InvalidArgument("window length must be at least 1");
  }
  std::vector<WindowSpec> out;
  const auto n = static_cast<std::int64_t>(representative.size());
  for (std::int64_t start = 0; start + length <= n; start += length) {
    WindowSpec w;
    w.window_id = start / length;
    w.start = start;
    w.length = length;
    for (std::int64_t i = start; i < start + length; ++i) {
      const FrameId rep = representative[static_cast<std::size_t>(i)];
      if (!w.segments.empty() && w.segments.back().retained == rep) {
        ++w.segments.back().size;
      } else {
        w.segments.push_back({rep, 1});
      }
    }
    out.push_back(std::move(w));
  }
  return out;
}

GaussianMixture window_distribution(const WindowSpec& window, const MixtureLookup& mixtures,
                                    WindowVariance variance) {
  const auto length = static_cast<double>(window.length);
  CompensatedSum mean;
  CompensatedSum var;
  for (const auto& seg : window.segments) {
    const GaussianMixture* mix = mixtures(seg.retained);
    if (mix == nullptr) {
      throw MissingRetainedFrame("no mixture for retained frame " + std::to_string(seg.retained) +
                                 " of window " + std::to_string(window.window_id));
    }
    const auto m = mixture_moments(*mix);
    const auto size = static_cast<double>(seg.size);
    mean += size * m.mean / length;
    if (variance == WindowVariance::kWeightedAverage) {
      var += size * m.variance / length;
    } else {
      var += size * size * m.variance / (length * length);
    }
  }
  return GaussianMixture::normal(mean.value(), std::max(kMinStddev, std::sqrt(var.value())));
}

ScoreGrid window_grid(std::span<const WindowSpec> windows, const MixtureLookup& mixtures,
                      double step, WindowVariance variance) {
  double bottom = 0.0;
  double top = 0.0;
  for (const auto& w : windows) {
    const auto mix = window_distribution(w, mixtures, variance);
    const auto& c = mix.components().front();
    bottom = std::min(bottom, c.mean - 3.0 * c.stddev);
    top = std::max(top, c.mean + 3.0 * c.stddev);
  }
  // Whole steps below zero, so sample means of grid-valued frame scores still
  // land on grid points.
  const double origin = std::floor(bottom / step) * step;
  return ScoreGrid(origin, step, static_cast<Bin>(std::ceil((top - origin) / step)) + 2);
}

UncertainRelation build_window_relation(std::span<const WindowSpec> windows,
                                        const MixtureLookup& mixtures, const ScoreGrid& grid,
                                        WindowVariance variance) {
  std::vector<XTuple> entries;
  entries.reserve(windows.size());
  for (const auto& w : windows) {
    entries.push_back(
        {w.window_id, w.start, quantize(window_distribution(w, mixtures, variance), grid)});
  }
  return UncertainRelation::build(std::move(entries), grid);
}

std::vector<std::int64_t> sample_window_positions(std::int64_t length, std::int64_t count,
                                                  std::uint64_t seed) {
  if (count < 1 || count > length) {
    throw InvalidArgument("window sample size must lie in [1, L]");
  }
  std::vector<std::int64_t> pos(static_cast<std::size_t>(length));
  std::iota(pos.begin(), pos.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::int64_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::int64_t> pick(i, length - 1);
    std::swap(pos[static_cast<std::size_t>(i)], pos[static_cast<std::size_t>(pick(rng))]);
  }
  pos.resize(static_cast<std::size_t>(count));
  return pos;
}

WindowCleaning clean_window(const WindowSpec& window, std::span<const FrameId> timeline,
                            Oracle& oracle, double sample_fraction, std::uint64_t seed,
                            const ScoreGrid& grid) {
  WindowConfig cfg;
  cfg.length = window.length;
  cfg.sample_fraction = sample_fraction;
  cfg.validate();
  if (window.start < 0 || window.start + window.length > static_cast<std::int64_t>(timeline.size())) {
    throw InvalidArgument("window " + std::to_string(window.window_id) +
                          " extends past the timeline");
  }
  const auto positions = sample_window_positions(window.length, cfg.sample_size(), seed);
  std::vector<FrameId> ids;
  ids.reserve(positions.size());
  for (const auto p : positions) {
    ids.push_back(timeline[static_cast<std::size_t>(window.start + p)]);
  }
  const auto scores = oracle.score(ids);
  CompensatedSum total;
  for (const double s : scores) {
    total += s;
  }
  WindowCleaning out;
  out.sampled = static_cast<std::int64_t>(ids.size());
  out.mean = total.value() / static_cast<double>(ids.size());
  out.bin = grid.nearest_bin(out.mean);
  return out;
}

WindowOracle::WindowOracle(std::span<const WindowSpec> windows, std::span<const FrameId> timeline,
                           Oracle& frame_oracle, double sample_fraction, std::uint64_t seed,
                           const ScoreGrid& grid)
    : timeline_(timeline),
      frame_oracle_(&frame_oracle),
      sample_fraction_(sample_fraction),
      seed_(seed),
      grid_(grid) {
  for (const auto& w : windows) {
    windows_.emplace(w.window_id, &w);
  }
}

std::vector<double> WindowOracle::score_batch(std::span<const FrameId> window_ids) {
  std::vector<double> out;
  out.reserve(window_ids.size());
  for (const FrameId id : window_ids) {
    const auto it = windows_.find(id);
    if (it == windows_.end()) {
      throw UnknownFrame("unknown window " + std::to_string(id));
    }
    const auto cleaned =
        clean_window(*it->second, timeline_, *frame_oracle_, sample_fraction_,
                     splitmix64(seed_ ^ splitmix64(static_cast<std::uint64_t>(id))), grid_);
    frames_sampled_ += cleaned.sampled;
    out.push_back(grid_.score_of(cleaned.bin));
  }
  return out;
}

}  // namespace utopk
