#pragma once

// Tumbling-window Top-K: every window of L consecutive frames becomes one
// x-tuple whose score is the mean frame score.

#include <cstdint>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "utopk/distribution.hpp"
#include "utopk/oracle.hpp"
#include "utopk/relation.hpp"

namespace utopk {

enum class WindowVariance {
  // (1/L) * sum |s_t| var_t, the weighted average of segment variances.
  kWeightedAverage,
  // (1/L^2) * sum |s_t|^2 var_t, treating segments as independent blocks.
  kIndependentSegments,
};

struct WindowConfig {
  std::int64_t length = 30;
  double sample_fraction = 0.1;
  // Step of the window score grid; 0 picks frame_step / length so means of
  // frame scores on the frame grid land exactly on grid points.
  double step = 0.0;
  WindowVariance variance = WindowVariance::kWeightedAverage;

  void validate() const;
  double resolved_step(double frame_step) const;
  std::int64_t sample_size() const;
};

struct WindowSegment {
  FrameId retained = 0;   // representative frame
  std::int64_t size = 0;  // number of consecutive frames it stands for
};

struct WindowSpec {
  std::int64_t window_id = 0;
  std::int64_t start = 0;  // first timeline position
  std::int64_t length = 0;
  std::vector<WindowSegment> segments;  // consecutive, sizes sum to length
};

// Cuts the timeline into windows of `length` positions, dropping a shorter
// tail. representative[i] is the retained frame standing in for position i.
std::vector<WindowSpec> make_windows(std::span<const FrameId> representative,
                                     std::int64_t length);

using MixtureLookup = std::function<const GaussianMixture*(FrameId)>;

// Normal approximation of the window mean. Throws MissingRetainedFrame.
GaussianMixture window_distribution(const WindowSpec& window, const MixtureLookup& mixtures,
                                    WindowVariance variance = WindowVariance::kWeightedAverage);

// One x-tuple per window, keyed by window id. Propagates quantize errors.
UncertainRelation build_window_relation(std::span<const WindowSpec> windows,
                                        const MixtureLookup& mixtures, const ScoreGrid& grid,
                                        WindowVariance variance = WindowVariance::kWeightedAverage);

// Grid covering every window distribution's 3-sigma range, extended below 0
// when a range reaches there so the lower tail is binned rather than folded.
ScoreGrid window_grid(std::span<const WindowSpec> windows, const MixtureLookup& mixtures,
                      double step, WindowVariance variance = WindowVariance::kWeightedAverage);

// Positions in [0, length) drawn uniformly without replacement by a seeded
// partial Fisher-Yates shuffle.
std::vector<std::int64_t> sample_window_positions(std::int64_t length, std::int64_t count,
                                                  std::uint64_t seed);

struct WindowCleaning {
  double mean = 0.0;  // sample mean in score units
  Bin bin = 0;        // mean on the window grid
  std::int64_t sampled = 0;
};

// Scores a uniform sample of ceil(sample_fraction * L) frames of the window
// with the frame oracle. timeline[i] is the frame id at position i.
WindowCleaning clean_window(const WindowSpec& window, std::span<const FrameId> timeline,
                            Oracle& oracle, double sample_fraction, std::uint64_t seed,
                            const ScoreGrid& grid);

// Oracle over window ids that answers with sampled window means; every sample
// is charged to the wrapped frame oracle.
class WindowOracle final : public Oracle {
 public:
  WindowOracle(std::span<const WindowSpec> windows, std::span<const FrameId> timeline,
               Oracle& frame_oracle, double sample_fraction, std::uint64_t seed,
               const ScoreGrid& grid);

  std::int64_t frames_sampled() const { return frames_sampled_; }

 protected:
  std::vector<double> score_batch(std::span<const FrameId> window_ids) override;

 private:
  std::unordered_map<std::int64_t, const WindowSpec*> windows_;
  std::span<const FrameId> timeline_;
  Oracle* frame_oracle_;
  double sample_fraction_;
  std::uint64_t seed_;
  ScoreGrid grid_;
  std::int64_t frames_sampled_ = 0;
};

}  // namespace utopk
