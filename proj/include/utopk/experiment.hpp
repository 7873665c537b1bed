#pragma once

// End-to-end experiment runner: trace -> difference detector -> relation ->
// query -> quality metrics and oracle accounting.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "utopk/relation.hpp"
#include "utopk/simulation.hpp"
#include "utopk/topk_engine.hpp"
#include "utopk/window.hpp"

namespace utopk {

enum class QueryMode { kFrame, kWindow };

struct ExperimentConfig {
  QueryMode mode = QueryMode::kFrame;
  std::size_t k = 50;
  double thres = 0.9;
  std::size_t batch = 8;
  std::uint64_t seed = 1;

  std::int64_t window_size = 30;
  double sample_fraction = 0.1;
  double window_step = 0.0;  // 0: frame step / window size
  bool window_independent_variance = false;

  // Trace source: a JSON-lines file, or the generator when empty.
  std::string trace_path;
  TraceConfig generator;

  double score_step = 1.0;  // frame score grid step

  // Certain seed labels: min(ceil(seed_fraction * retained), seed_cap).
  double seed_fraction = 0.005;
  std::int64_t seed_cap = 30000;

  DiffConfig diff;
  double oracle_cost = 1.0;

  std::string report_path;
  bool quiet = false;  // no progress log

  // Throws ConfigError.
  void validate() const;
  // Field names mirror the struct; unknown keys are rejected. Throws
  // ConfigError.
  static ExperimentConfig from_json_text(const std::string& text);
  static ExperimentConfig from_json_file(const std::string& path);
  std::string to_json_text() const;
};

struct TruthEntry {
  FrameId frame_id = 0;
  double score = 0.0;
};

// Exact Top-K by score descending, ties by frame id.
std::vector<FrameId> exact_topk(std::span<const TruthEntry> truth, std::size_t k);

struct QualityMetrics {
  double precision = 0.0;
  double rank_distance = 0.0;  // normalized footrule, in [0, 1]
  double score_error = 0.0;    // mean absolute, paired by rank
};

// Throws InvalidArgument when the answer has fewer than k members or names a
// frame missing from truth.
QualityMetrics evaluate(const TopKAnswer& answer, std::span<const TruthEntry> truth,
                        std::size_t k);

struct MetricsReport {
  QualityMetrics quality;
  std::int64_t oracle_invocations = 0;
  std::int64_t scan_baseline_invocations = 0;
  double speedup = 0.0;
  double confidence = 0.0;

  std::int64_t total_frames = 0;
  std::int64_t retained_frames = 0;
  std::int64_t windows = 0;
  std::int64_t seed_labels = 0;
  std::int64_t cleanings = 0;  // x-tuples cleaned, bootstrap included
  std::int64_t window_samples = 0;
  double cleaned_fraction = 0.0;  // cleanings / relation size

  QueryStats stats;
  std::vector<RankedFrame> answer;
};

MetricsReport run_experiment(const ExperimentConfig& cfg);
// Same pipeline on an already loaded trace.
MetricsReport run_experiment(const ExperimentConfig& cfg, std::span<const FrameTrace> trace);

// Single JSON document; byte-identical for identical reports.
std::string report_to_json(const ExperimentConfig& cfg, const MetricsReport& report);

}  // namespace utopk
