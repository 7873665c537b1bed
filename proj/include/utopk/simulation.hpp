#pragma once

// Desk-scale stand-ins for a video pipeline: synthetic frame traces, a
// feature-MSE difference detector, proxy scorers and a counting oracle.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "utopk/distribution.hpp"
#include "utopk/oracle.hpp"

namespace utopk {

struct FrameTrace {
  FrameId frame_id = 0;
  std::int64_t timestamp = 0;
  std::vector<double> features;
  double truth = 0.0;  // revealed only through an Oracle
  GaussianMixture proxy_mixture;
};

class ProxyScorer {
 public:
  virtual ~ProxyScorer() = default;
  virtual GaussianMixture predict(const FrameTrace& frame) const = 0;
};

// Returns the mixture recorded in the trace.
class RecordedProxyScorer final : public ProxyScorer {
 public:
  GaussianMixture predict(const FrameTrace& frame) const override { return frame.proxy_mixture; }
};

// Shifts every component mean and scales every stddev of the recorded mixture;
// models a poorly trained proxy.
class DistortedProxyScorer final : public ProxyScorer {
 public:
  DistortedProxyScorer(double mean_shift, double stddev_scale);
  GaussianMixture predict(const FrameTrace& frame) const override;

 private:
  double mean_shift_;
  double stddev_scale_;
};

// Oracle backed by the hidden truth of a trace.
class SimulatedOracle final : public Oracle {
 public:
  explicit SimulatedOracle(std::span<const FrameTrace> traces, double cost_per_frame = 1.0);

  double cost_per_frame() const override { return cost_per_frame_; }
  // Cost of running the oracle on every frame it knows.
  double scan_cost() const { return static_cast<double>(truth_.size()) * cost_per_frame_; }
  std::size_t frame_count() const { return truth_.size(); }

 protected:
  // Throws UnknownFrame.
  std::vector<double> score_batch(std::span<const FrameId> frame_ids) override;

 private:
  std::unordered_map<FrameId, double> truth_;
  double cost_per_frame_;
};

struct DiffConfig {
  double mse_threshold = 1e-4;  // 0 keeps every frame
  std::size_t clip_size = 30;

  void validate() const;
};

struct DiffResult {
  std::vector<FrameId> retained;        // timestamp order
  std::vector<FrameId> representative;  // aligned with the input frames
};

// Splits frames (timestamp order) into clips and compares each frame with the
// clip's middle frame; frames below the MSE threshold are discarded and
// represented by the middle frame.
DiffResult diff_detect(std::span<const FrameTrace> frames, const DiffConfig& cfg);

double feature_mse(std::span<const double> a, std::span<const double> b);

struct TraceConfig {
  std::uint64_t seed = 1;
  std::int64_t frames = 1000;

  // Piecewise-constant level with geometric segment lengths; a segment turns
  // into a burst with burst_probability and then gains an exponential excess.
  double base_level = 2.0;
  double level_spread = 1.0;
  double mean_segment_length = 40.0;
  double burst_probability = 0.02;
  double burst_scale = 6.0;
  double frame_jitter = 0.5;  // per-frame spread around the level

  // Proxy mixtures: two components around the frame mean.
  double proxy_stddev = 0.8;
  double component_spread = 0.6;

  // Miscalibration: truth = mixture draw + bias, plus occasional outliers.
  bool calibrated = true;
  double bias = 0.0;
  double outlier_probability = 0.0;
  double outlier_scale = 5.0;

  // Truth is rounded onto this step and floored at zero.
  double score_step = 1.0;

  std::size_t feature_dim = 4;
  double feature_noise = 0.002;

  void validate() const;
};

// Deterministic for a given config.
std::vector<FrameTrace> generate_trace(const TraceConfig& cfg);

// JSON-lines trace format, one frame per line with fields in the order
// frame_id, ts, truth, mixture, features.
void write_trace(std::ostream& out, std::span<const FrameTrace> traces);
// Throws DataError naming the offending line.
std::vector<FrameTrace> read_trace(std::istream& in);
void write_trace_file(const std::string& path, std::span<const FrameTrace> traces);
std::vector<FrameTrace> read_trace_file(const std::string& path);

}  // namespace utopk
