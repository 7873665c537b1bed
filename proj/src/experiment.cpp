#include "utopk/experiment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

#include "utopk/errors.hpp"
#include "utopk/numeric.hpp"

namespace utopk {

namespace {

using ordered_json = nlohmann::ordered_json;

void progress(const ExperimentConfig& cfg, const std::string& msg) {
  if (!cfg.quiet) {
    std::cerr << "[utopk] " << msg << '\n';
  }
}

const char* mode_name(QueryMode mode) { return mode == QueryMode::kFrame ? "frame" : "window"; }

// Independent streams derived from the experiment seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  std::uint64_t out = 0;
  std::array<std::uint32_t, 2> words{};
  seq.generate(words.begin(), words.end());
  out = (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
  return out;
}

template <typename T>
T get_as(const nlohmann::json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config field \"" + key + "\" has the wrong type");
  }
}

void apply_generator(TraceConfig& g, const nlohmann::json& obj) {
  if (!obj.is_object()) {
    throw ConfigError("config field \"generator\" must be an object");
  }
  for (const auto& [key, v] : obj.items()) {
    const std::string k = "generator." + key;
    if (key == "frames") {
      g.frames = get_as<std::int64_t>(v, k);
    } else if (key == "base_level") {
      g.base_level = get_as<double>(v, k);
    } else if (key == "level_spread") {
      g.level_spread = get_as<double>(v, k);
    } else if (key == "mean_segment_length") {
      g.mean_segment_length = get_as<double>(v, k);
    } else if (key == "burst_probability") {
      g.burst_probability = get_as<double>(v, k);
    } else if (key == "burst_scale") {
      g.burst_scale = get_as<double>(v, k);
    } else if (key == "frame_jitter") {
      g.frame_jitter = get_as<double>(v, k);
    } else if (key == "proxy_stddev") {
      g.proxy_stddev = get_as<double>(v, k);
    } else if (key == "component_spread") {
      g.component_spread = get_as<double>(v, k);
    } else if (key == "calibrated") {
      g.calibrated = get_as<bool>(v, k);
    } else if (key == "bias") {
      g.bias = get_as<double>(v, k);
    } else if (key == "outlier_probability") {
      g.outlier_probability = get_as<double>(v, k);
    } else if (key == "outlier_scale") {
      g.outlier_scale = get_as<double>(v, k);
    } else if (key == "feature_dim") {
      g.feature_dim = get_as<std::size_t>(v, k);
    } else if (key == "feature_noise") {
      g.feature_noise = get_as<double>(v, k);
    } else {
      throw ConfigError("unknown config field \"" + k + "\"");
    }
  }
}

ordered_json generator_json(const TraceConfig& g) {
  ordered_json j;
  j["frames"] = g.frames;
  j["base_level"] = g.base_level;
  j["level_spread"] = g.level_spread;
  j["mean_segment_length"] = g.mean_segment_length;
  j["burst_probability"] = g.burst_probability;
  j["burst_scale"] = g.burst_scale;
  j["frame_jitter"] = g.frame_jitter;
  j["proxy_stddev"] = g.proxy_stddev;
  j["component_spread"] = g.component_spread;
  j["calibrated"] = g.calibrated;
  j["bias"] = g.bias;
  j["outlier_probability"] = g.outlier_probability;
  j["outlier_scale"] = g.outlier_scale;
  j["feature_dim"] = g.feature_dim;
  j["feature_noise"] = g.feature_noise;
  return j;
}

ordered_json config_json(const ExperimentConfig& c) {
  ordered_json j;
  j["mode"] = mode_name(c.mode);
  j["k"] = c.k;
  j["thres"] = c.thres;
  j["batch"] = c.batch;
  j["seed"] = c.seed;
  j["window_size"] = c.window_size;
  j["sample_fraction"] = c.sample_fraction;
  j["window_step"] = c.window_step;
  j["window_independent_variance"] = c.window_independent_variance;
  j["trace"] = c.trace_path;
  j["generator"] = generator_json(c.generator);
  j["score_step"] = c.score_step;
  j["seed_fraction"] = c.seed_fraction;
  j["seed_cap"] = c.seed_cap;
  j["diff_mse_threshold"] = c.diff.mse_threshold;
  j["clip_size"] = c.diff.clip_size;
  j["oracle_cost"] = c.oracle_cost;
  j["report"] = c.report_path;
  return j;
}

}  // namespace

void ExperimentConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) {
      throw ConfigError(what);
    }
  };
  require(k >= 1, "k must be at least 1");
  require(thres > 0.0 && thres <= 1.0, "thres must lie in (0, 1]");
  require(batch >= 1, "batch must be at least 1");
  require(window_size >= 1, "window_size must be at least 1");
  require(sample_fraction > 0.0 && sample_fraction <= 1.0, "sample_fraction must lie in (0, 1]");
  require(window_step >= 0.0, "window_step must be non-negative");
  require(score_step > 0.0, "score_step must be positive");
  require(seed_fraction >= 0.0 && seed_fraction <= 1.0, "seed_fraction must lie in [0, 1]");
  require(seed_cap >= 0, "seed_cap must be non-negative");
  require(diff.mse_threshold >= 0.0, "diff_mse_threshold must be non-negative");
  require(diff.clip_size >= 1, "clip_size must be at least 1");
  require(oracle_cost > 0.0, "oracle_cost must be positive");
  try {
    TraceConfig g = generator;
    g.score_step = score_step;
    g.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("generator: ") + e.what());
  }
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("malformed config JSON: ") + e.what());
  }
  if (!obj.is_object()) {
    throw ConfigError("config must be a JSON object");
  }
  ExperimentConfig c;
  for (const auto& [key, v] : obj.items()) {
    if (key == "mode") {
      const auto m = get_as<std::string>(v, key);
      if (m == "frame") {
        c.mode = QueryMode::kFrame;
      } else if (m == "window") {
        c.mode = QueryMode::kWindow;
      } else {
        throw ConfigError("mode must be \"frame\" or \"window\"");
      }
    } else if (key == "k") {
      c.k = get_as<std::size_t>(v, key);
    } else if (key == "thres") {
      c.thres = get_as<double>(v, key);
    } else if (key == "batch") {
      c.batch = get_as<std::size_t>(v, key);
    } else if (key == "seed") {
      c.seed = get_as<std::uint64_t>(v, key);
    } else if (key == "window_size") {
      c.window_size = get_as<std::int64_t>(v, key);
    } else if (key == "sample_fraction") {
      c.sample_fraction = get_as<double>(v, key);
    } else if (key == "window_step") {
      c.window_step = get_as<double>(v, key);
    } else if (key == "window_independent_variance") {
      c.window_independent_variance = get_as<bool>(v, key);
    } else if (key == "trace") {
      c.trace_path = get_as<std::string>(v, key);
    } else if (key == "generator") {
      apply_generator(c.generator, v);
    } else if (key == "score_step") {
      c.score_step = get_as<double>(v, key);
    } else if (key == "seed_fraction") {
      c.seed_fraction = get_as<double>(v, key);
    } else if (key == "seed_cap") {
      c.seed_cap = get_as<std::int64_t>(v, key);
    } else if (key == "diff_mse_threshold") {
      c.diff.mse_threshold = get_as<double>(v, key);
    } else if (key == "clip_size") {
      c.diff.clip_size = get_as<std::size_t>(v, key);
    } else if (key == "oracle_cost") {
      c.oracle_cost = get_as<double>(v, key);
    } else if (key == "report") {
      c.report_path = get_as<std::string>(v, key);
    } else if (key == "quiet") {
      c.quiet = get_as<bool>(v, key);
    } else {
      throw ConfigError("unknown config field \"" + key + "\"");
    }
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file " + path);
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

std::string ExperimentConfig::to_json_text() const { return config_json(*this).dump(2); }

std::vector<FrameId> exact_topk(std::span<const TruthEntry> truth, std::size_t k) {
  std::vector<TruthEntry> sorted(truth.begin(), truth.end());
  const auto n = std::min(k, sorted.size());
  std::partial_sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n), sorted.end(),
                    [](const TruthEntry& a, const TruthEntry& b) {
                      return a.score > b.score || (a.score == b.score && a.frame_id < b.frame_id);
                    });
  std::vector<FrameId> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(sorted[i].frame_id);
  }
  return out;
}

QualityMetrics evaluate(const TopKAnswer& answer, std::span<const TruthEntry> truth,
                        std::size_t k) {
  if (k == 0 || answer.members.size() < k) {
    throw InvalidArgument("answer holds fewer than K members");
  }
  if (truth.size() < k) {
    throw InvalidArgument("truth covers fewer than K frames");
  }
  std::unordered_map<FrameId, double> score_of;
  score_of.reserve(truth.size());
  for (const auto& t : truth) {
    score_of.emplace(t.frame_id, t.score);
  }
  const auto exact = exact_topk(truth, k);
  std::unordered_map<FrameId, std::size_t> exact_rank;  // 1-based
  for (std::size_t i = 0; i < k; ++i) {
    exact_rank.emplace(exact[i], i + 1);
  }

  QualityMetrics m;
  std::size_t hits = 0;
  double footrule = 0.0;
  CompensatedSum error;
  for (std::size_t i = 0; i < k; ++i) {
    const FrameId id = answer.members[i].frame_id;
    const auto it = score_of.find(id);
    if (it == score_of.end()) {
      throw InvalidArgument("answer frame " + std::to_string(id) + " has no ground truth");
    }
    const auto r = exact_rank.find(id);
    const std::size_t true_rank = r == exact_rank.end() ? k + 1 : r->second;
    if (r != exact_rank.end()) {
      ++hits;
    }
    footrule += std::abs(static_cast<double>(i + 1) - static_cast<double>(true_rank));
    error += std::abs(it->second - score_of.at(exact[i]));
  }
  const auto kd = static_cast<double>(k);
  m.precision = static_cast<double>(hits) / kd;
  m.rank_distance = footrule / (kd * (kd + 1.0) / 2.0);
  m.score_error = error.value() / kd;
  return m;
}

MetricsReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<FrameTrace> trace;
  if (!cfg.trace_path.empty()) {
    progress(cfg, "loading trace " + cfg.trace_path);
    trace = read_trace_file(cfg.trace_path);
  } else {
    TraceConfig g = cfg.generator;
    g.seed = cfg.seed;
    g.score_step = cfg.score_step;
    progress(cfg, "generating " + std::to_string(g.frames) + " frames");
    trace = generate_trace(g);
  }
  return run_experiment(cfg, trace);
}

MetricsReport run_experiment(const ExperimentConfig& cfg, std::span<const FrameTrace> trace) {
  cfg.validate();
  if (trace.empty()) {
    throw DataError("trace is empty");
  }
  MetricsReport report;
  report.total_frames = static_cast<std::int64_t>(trace.size());

  std::unordered_map<FrameId, std::size_t> position;
  position.reserve(trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (!position.emplace(trace[i].frame_id, i).second) {
      throw DataError("duplicate frame id " + std::to_string(trace[i].frame_id) + " in trace");
    }
    if (i > 0 && trace[i].timestamp < trace[i - 1].timestamp) {
      throw DataError("trace is not in timestamp order at frame " +
                      std::to_string(trace[i].frame_id));
    }
  }

  const DiffResult diff = diff_detect(trace, cfg.diff);
  report.retained_frames = static_cast<std::int64_t>(diff.retained.size());
  progress(cfg, "difference detector kept " + std::to_string(diff.retained.size()) + " of " +
                    std::to_string(trace.size()) + " frames");

  SimulatedOracle oracle(trace, cfg.oracle_cost);
  const RecordedProxyScorer proxy;
  std::unordered_map<FrameId, GaussianMixture> predicted;
  predicted.reserve(diff.retained.size());
  for (const FrameId id : diff.retained) {
    predicted.emplace(id, proxy.predict(trace[position.at(id)]));
  }

  QueryConfig qcfg;
  qcfg.k = cfg.k;
  qcfg.thres = cfg.thres;
  qcfg.batch = cfg.batch;

  std::vector<TruthEntry> truth;
  QueryResult result;
  std::size_t relation_size = 0;

  if (cfg.mode == QueryMode::kFrame) {
    if (diff.retained.size() < cfg.k) {
      throw InsufficientFrames("K = " + std::to_string(cfg.k) + " exceeds the " +
                               std::to_string(diff.retained.size()) + " retained frames");
    }
    // Grid from 0 covering every proxy's 3-sigma range and every truth.
    double top = 0.0;
    for (const FrameId id : diff.retained) {
      for (const auto& c : predicted.at(id).components()) {
        top = std::max(top, c.mean + 3.0 * c.stddev);
      }
      top = std::max(top, trace[position.at(id)].truth);
    }
    const ScoreGrid grid(0.0, cfg.score_step, static_cast<Bin>(std::ceil(top / cfg.score_step)) + 2);

    // Seed labels drawn uniformly from the retained frames.
    const auto n = static_cast<std::int64_t>(diff.retained.size());
    const auto wanted = static_cast<std::int64_t>(
        std::ceil(cfg.seed_fraction * static_cast<double>(n) - 1e-9));
    const std::int64_t seeds = std::min({wanted, cfg.seed_cap, n});
    std::vector<FrameId> pool = diff.retained;
    std::mt19937_64 rng(derive_seed(cfg.seed, 1));
    for (std::int64_t i = 0; i < seeds; ++i) {
      std::uniform_int_distribution<std::int64_t> pick(i, n - 1);
      std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
    }
    pool.resize(static_cast<std::size_t>(seeds));
    const auto seed_scores = oracle.score(pool);
    std::unordered_map<FrameId, Bin> seed_bins;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      seed_bins.emplace(pool[i], grid.nearest_bin(seed_scores[i]));
    }
    report.seed_labels = seeds;

    std::vector<XTuple> entries;
    entries.reserve(diff.retained.size());
    for (const FrameId id : diff.retained) {
      const auto& frame = trace[position.at(id)];
      if (const auto it = seed_bins.find(id); it != seed_bins.end()) {
        entries.push_back({id, frame.timestamp, it->second});
      } else {
        entries.push_back({id, frame.timestamp, quantize(predicted.at(id), grid)});
      }
      truth.push_back({id, frame.truth});
    }
    UncertainRelation rel = UncertainRelation::build(std::move(entries), grid);
    relation_size = rel.size();
    progress(cfg, "built relation: " + std::to_string(rel.size()) + " frames, " +
                      std::to_string(grid.bins) + " bins, " + std::to_string(seeds) +
                      " seed labels");
    result = run_query(rel, oracle, qcfg);
  } else {
    std::vector<FrameId> timeline;
    timeline.reserve(trace.size());
    for (const auto& f : trace) {
      timeline.push_back(f.frame_id);
    }
    const auto windows = make_windows(diff.representative, cfg.window_size);
    report.windows = static_cast<std::int64_t>(windows.size());
    if (windows.size() < cfg.k) {
      throw InsufficientFrames("K = " + std::to_string(cfg.k) + " exceeds the " +
                               std::to_string(windows.size()) + " complete windows");
    }
    const MixtureLookup lookup = [&predicted](FrameId id) -> const GaussianMixture* {
      const auto it = predicted.find(id);
      return it == predicted.end() ? nullptr : &it->second;
    };
    const auto variance = cfg.window_independent_variance ? WindowVariance::kIndependentSegments
                                                          : WindowVariance::kWeightedAverage;
    WindowConfig wcfg;
    wcfg.length = cfg.window_size;
    wcfg.sample_fraction = cfg.sample_fraction;
    wcfg.step = cfg.window_step;
    const ScoreGrid grid =
        window_grid(windows, lookup, wcfg.resolved_step(cfg.score_step), variance);
    UncertainRelation rel = build_window_relation(windows, lookup, grid, variance);
    relation_size = rel.size();
    progress(cfg, "built window relation: " + std::to_string(rel.size()) + " windows, " +
                      std::to_string(grid.bins) + " bins");

    for (const auto& w : windows) {
      CompensatedSum sum;
      for (std::int64_t i = w.start; i < w.start + w.length; ++i) {
        sum += trace[static_cast<std::size_t>(i)].truth;
      }
      truth.push_back({w.window_id, sum.value() / static_cast<double>(w.length)});
    }
    WindowOracle window_oracle(windows, timeline, oracle, cfg.sample_fraction,
                               derive_seed(cfg.seed, 2), grid);
    result = run_query(rel, window_oracle, qcfg);
    report.window_samples = window_oracle.frames_sampled();
  }

  report.stats = result.stats;
  report.answer = result.answer.members;
  report.confidence = result.answer.confidence.value_or(0.0);
  report.cleanings = result.stats.frames_cleaned;
  report.cleaned_fraction =
      relation_size == 0 ? 0.0
                         : static_cast<double>(report.cleanings) / static_cast<double>(relation_size);
  report.oracle_invocations = static_cast<std::int64_t>(oracle.invocations());
  report.scan_baseline_invocations = report.retained_frames;
  report.speedup = report.oracle_invocations == 0
                       ? static_cast<double>(report.scan_baseline_invocations)
                       : static_cast<double>(report.scan_baseline_invocations) /
                             static_cast<double>(report.oracle_invocations);
  report.quality = evaluate(result.answer, truth, cfg.k);
  progress(cfg, "done: confidence " + std::to_string(report.confidence) + ", precision " +
                    std::to_string(report.quality.precision) + ", oracle invocations " +
                    std::to_string(report.oracle_invocations));

  if (!cfg.report_path.empty()) {
    std::ofstream out(cfg.report_path, std::ios::binary);
    if (!out) {
      throw DataError("cannot open report file " + cfg.report_path);
    }
    out << report_to_json(cfg, report) << '\n';
    if (!out) {
      throw DataError("failed writing report " + cfg.report_path);
    }
  }
  return report;
}

std::string report_to_json(const ExperimentConfig& cfg, const MetricsReport& r) {
  ordered_json j;
  j["mode"] = mode_name(cfg.mode);
  j["k"] = cfg.k;
  j["thres"] = cfg.thres;
  j["confidence"] = r.confidence;
  j["precision"] = r.quality.precision;
  j["rank_distance"] = r.quality.rank_distance;
  j["score_error"] = r.quality.score_error;
  j["oracle_invocations"] = r.oracle_invocations;
  j["scan_baseline_invocations"] = r.scan_baseline_invocations;
  j["speedup"] = r.speedup;
  j["cleaned_fraction"] = r.cleaned_fraction;

  ordered_json breakdown;
  breakdown["total_frames"] = r.total_frames;
  breakdown["retained_frames"] = r.retained_frames;
  breakdown["windows"] = r.windows;
  breakdown["seed_labels"] = r.seed_labels;
  breakdown["cleanings"] = r.cleanings;
  breakdown["bootstrap_cleanings"] = r.stats.bootstrap_cleaned;
  breakdown["window_samples"] = r.window_samples;
  breakdown["iterations"] = r.stats.iterations;
  breakdown["oracle_batches"] = r.stats.oracle_batches;
  breakdown["order_rebuilds"] = r.stats.order_rebuilds;
  breakdown["expectation_evaluations"] = r.stats.expectation_evaluations;
  breakdown["zero_factor_divisions"] = r.stats.zero_factor_divisions;
  j["breakdown"] = std::move(breakdown);

  auto answer = ordered_json::array();
  for (const auto& m : r.answer) {
    answer.push_back({{"id", m.frame_id}, {"score_bin", m.score}});
  }
  j["answer"] = std::move(answer);
  auto trajectory = ordered_json::array();
  for (const auto& [it, p] : r.stats.confidence_trajectory) {
    trajectory.push_back(ordered_json::array({it, p}));
  }
  j["confidence_trajectory"] = std::move(trajectory);
  j["config"] = config_json(cfg);
  return j.dump(2);
}

}  // namespace utopk
