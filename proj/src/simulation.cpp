#include "utopk/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"

#include "utopk/errors.hpp"

namespace utopk {

DistortedProxyScorer::DistortedProxyScorer(double mean_shift, double stddev_scale)
    : mean_shift_(mean_shift), stddev_scale_(stddev_scale) {
  if (!(stddev_scale > 0.0)) {
    throw InvalidArgument("stddev scale must be positive");
  }
}

GaussianMixture DistortedProxyScorer::predict(const FrameTrace& frame) const {
  auto components = frame.proxy_mixture.components();
  for (auto& c : components) {
    c.mean += mean_shift_;
    c.stddev *= stddev_scale_;
  }
  return GaussianMixture(std::move(components));
}

SimulatedOracle::SimulatedOracle(std::span<const FrameTrace> traces, double cost_per_frame)
    : cost_per_frame_(cost_per_frame) {
  if (!(cost_per_frame > 0.0)) {
    throw InvalidArgument("oracle cost per frame must be positive");
  }
  truth_.reserve(traces.size());
  for (const auto& t : traces) {
    truth_.emplace(t.frame_id, t.truth);
  }
}

std::vector<double> SimulatedOracle::score_batch(std::span<const FrameId> frame_ids) {
  std::vector<double> out;
  out.reserve(frame_ids.size());
  for (const FrameId id : frame_ids) {
    const auto it = truth_.find(id);
    if (it == truth_.end()) {
      throw UnknownFrame("oracle has no frame " + std::to_string(id));
    }
    out.push_back(it->second);
  }
  return out;
}

void DiffConfig::validate() const {
  if (!(mse_threshold >= 0.0)) {
    throw InvalidArgument("MSE threshold must be non-negative");
  }
  if (clip_size < 1) {
    throw InvalidArgument("clip size must be at least 1");
  }
}

double feature_mse(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw InvalidArgument("feature vectors differ in length");
  }
  if (a.empty()) {
    return 0.0;
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

DiffResult diff_detect(std::span<const FrameTrace> frames, const DiffConfig& cfg) {
  cfg.validate();
  DiffResult out;
  out.representative.resize(frames.size());
  // Clips are independent of each other.
  for (std::size_t start = 0; start < frames.size(); start += cfg.clip_size) {
    const std::size_t len = std::min(cfg.clip_size, frames.size() - start);
    const auto& middle = frames[start + len / 2];
    for (std::size_t i = start; i < start + len; ++i) {
      const auto& f = frames[i];
      if (&f != &middle && feature_mse(f.features, middle.features) < cfg.mse_threshold) {
        out.representative[i] = middle.frame_id;
      } else {
        out.representative[i] = f.frame_id;
        out.retained.push_back(f.frame_id);
      }
    }
  }
  return out;
}

void TraceConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) {
      throw InvalidArgument(what);
    }
  };
  require(frames >= 1, "trace needs at least one frame");
  require(mean_segment_length >= 1.0, "mean segment length must be >= 1");
  require(burst_probability >= 0.0 && burst_probability <= 1.0,
          "burst probability must lie in [0, 1]");
  require(burst_scale > 0.0, "burst scale must be positive");
  require(level_spread >= 0.0 && frame_jitter >= 0.0, "spreads must be non-negative");
  require(proxy_stddev > 0.0, "proxy stddev must be positive");
  require(component_spread >= 0.0, "component spread must be non-negative");
  require(outlier_probability >= 0.0 && outlier_probability <= 1.0,
          "outlier probability must lie in [0, 1]");
  require(outlier_scale > 0.0, "outlier scale must be positive");
  require(score_step > 0.0, "score step must be positive");
  require(feature_noise >= 0.0, "feature noise must be non-negative");
}

std::vector<FrameTrace> generate_trace(const TraceConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::geometric_distribution<std::int64_t> segment_length(1.0 / cfg.mean_segment_length);
  std::exponential_distribution<double> burst(1.0 / cfg.burst_scale);
  std::exponential_distribution<double> outlier(1.0 / cfg.outlier_scale);

  constexpr double kMainWeight = 0.7;
  constexpr double kSideWeight = 0.3;

  std::vector<FrameTrace> out;
  out.reserve(static_cast<std::size_t>(cfg.frames));
  double level = 0.0;
  std::int64_t remaining = 0;
  for (std::int64_t i = 0; i < cfg.frames; ++i) {
    if (remaining == 0) {
      remaining = 1 + segment_length(rng);
      level = std::max(0.0, cfg.base_level + cfg.level_spread * normal(rng));
      if (uniform(rng) < cfg.burst_probability) {
        level += burst(rng);
      }
    }
    --remaining;

    const double frame_mean = level + cfg.frame_jitter * normal(rng);
    // Component means keep the mixture mean at frame_mean.
    const double d = cfg.component_spread;
    GaussianMixture mix({{kMainWeight, frame_mean - kSideWeight * d, cfg.proxy_stddev},
                         {kSideWeight, frame_mean + kMainWeight * d, cfg.proxy_stddev}});

    const auto& comps = mix.components();
    const auto& pick = uniform(rng) < comps[0].weight ? comps[0] : comps[1];
    double draw = pick.mean + pick.stddev * normal(rng);
    if (!cfg.calibrated) {
      draw += cfg.bias;
      if (uniform(rng) < cfg.outlier_probability) {
        draw += (uniform(rng) < 0.5 ? -1.0 : 1.0) * outlier(rng);
      }
    }
    const double truth = std::max(0.0, std::round(draw / cfg.score_step) * cfg.score_step);

    FrameTrace frame;
    frame.frame_id = i;
    frame.timestamp = i;
    frame.truth = truth;
    frame.proxy_mixture = std::move(mix);
    frame.features.resize(cfg.feature_dim);
    for (std::size_t k = 0; k < cfg.feature_dim; ++k) {
      const double signal = (k % 2 == 0) ? 0.1 * truth : 0.01 * level;
      frame.features[k] = signal + cfg.feature_noise * normal(rng);
    }
    out.push_back(std::move(frame));
  }
  return out;
}

void write_trace(std::ostream& out, std::span<const FrameTrace> traces) {
  for (const auto& t : traces) {
    nlohmann::ordered_json line;
    line["frame_id"] = t.frame_id;
    line["ts"] = t.timestamp;
    line["truth"] = t.truth;
    auto mixture = nlohmann::ordered_json::array();
    for (const auto& c : t.proxy_mixture.components()) {
      nlohmann::ordered_json comp;
      comp["pi"] = c.weight;
      comp["mu"] = c.mean;
      comp["sigma"] = c.stddev;
      mixture.push_back(std::move(comp));
    }
    line["mixture"] = std::move(mixture);
    line["features"] = t.features;
    out << line.dump() << '\n';
  }
}

namespace {

[[noreturn]] void bad_line(std::size_t line_no, const std::string& what) {
  throw DataError("trace line " + std::to_string(line_no) + ": " + what);
}

const nlohmann::json& field(const nlohmann::json& obj, const char* name, std::size_t line_no) {
  const auto it = obj.find(name);
  if (it == obj.end()) {
    bad_line(line_no, std::string("missing field \"") + name + "\"");
  }
  return *it;
}

double number(const nlohmann::json& v, const char* name, std::size_t line_no) {
  if (!v.is_number()) {
    bad_line(line_no, std::string("field \"") + name + "\" must be a number");
  }
  return v.get<double>();
}

std::int64_t integer(const nlohmann::json& v, const char* name, std::size_t line_no) {
  if (!v.is_number_integer()) {
    bad_line(line_no, std::string("field \"") + name + "\" must be an integer");
  }
  return v.get<std::int64_t>();
}

}  // namespace

std::vector<FrameTrace> read_trace(std::istream& in) {
  std::vector<FrameTrace> out;
  std::string text;
  std::size_t line_no = 0;
  std::size_t features = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      bad_line(line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!obj.is_object()) {
      bad_line(line_no, "expected a JSON object");
    }
    FrameTrace frame;
    frame.frame_id = integer(field(obj, "frame_id", line_no), "frame_id", line_no);
    frame.timestamp = integer(field(obj, "ts", line_no), "ts", line_no);
    frame.truth = number(field(obj, "truth", line_no), "truth", line_no);
    if (!std::isfinite(frame.truth)) {
      bad_line(line_no, "truth must be finite");
    }
    const auto& mixture = field(obj, "mixture", line_no);
    if (!mixture.is_array() || mixture.empty()) {
      bad_line(line_no, "\"mixture\" must be a non-empty array");
    }
    std::vector<MixtureComponent> components;
    for (const auto& c : mixture) {
      if (!c.is_object()) {
        bad_line(line_no, "mixture components must be objects");
      }
      components.push_back({number(field(c, "pi", line_no), "pi", line_no),
                            number(field(c, "mu", line_no), "mu", line_no),
                            number(field(c, "sigma", line_no), "sigma", line_no)});
    }
    try {
      frame.proxy_mixture = GaussianMixture(std::move(components));
    } catch (const InvalidArgument& e) {
      bad_line(line_no, e.what());
    }
    const auto& feats = field(obj, "features", line_no);
    if (!feats.is_array()) {
      bad_line(line_no, "\"features\" must be an array");
    }
    for (const auto& v : feats) {
      frame.features.push_back(number(v, "features", line_no));
    }
    if (out.empty()) {
      features = frame.features.size();
    } else if (frame.features.size() != features) {
      bad_line(line_no, "feature vector length differs from the first frame");
    }
    out.push_back(std::move(frame));
  }
  return out;
}

void write_trace_file(const std::string& path, std::span<const FrameTrace> traces) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot open " + path + " for writing");
  }
  write_trace(out, traces);
  if (!out) {
    throw DataError("failed writing " + path);
  }
}

std::vector<FrameTrace> read_trace_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open trace file " + path);
  }
  return read_trace(in);
}

}  // namespace utopk
