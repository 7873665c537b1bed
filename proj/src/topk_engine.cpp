#include "utopk/topk_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "utopk/errors.hpp"

namespace utopk {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Relative slack when comparing a bound against an exact expectation; the two
// are computed along different arithmetic paths and may tie mathematically.
constexpr double kBoundSlack = 1e-12;

// Equal expectations (typically all zero while several uncertain frames
// certainly beat the threshold) fall back to the bootstrap order: prior mean
// descending, then frame id.
struct Scored {
  double value;
  double mean;
  FrameId frame_id;
};

bool ranks_before(const Scored& a, const Scored& b) {
  if (a.value != b.value) {
    return a.value > b.value;
  }
  if (a.mean != b.mean) {
    return a.mean > b.mean;
  }
  return a.frame_id < b.frame_id;
}

Scored score_of(const ExpectationContext& ctx, const UncertainRelation& rel, FrameId f,
                EngineCounters* counters) {
  return {ctx.expected(f, counters), rel.tuple(f).distribution().mean_bin(), f};
}

void insert_bounded(std::vector<Scored>& best, Scored item, std::size_t b) {
  auto pos = std::upper_bound(best.begin(), best.end(), item, ranks_before);
  if (best.size() < b) {
    best.insert(pos, item);
  } else if (pos != best.end()) {
    best.insert(pos, item);
    best.pop_back();
  }
}

const DiscreteScoreDist& uncertain_distribution(const UncertainRelation& rel, FrameId f) {
  const auto& tuple = rel.tuple(f);
  if (tuple.is_certain()) {
    throw InvalidArgument("frame " + std::to_string(f) + " is certain");
  }
  return tuple.distribution();
}

}  // namespace

void QueryConfig::validate() const {
  if (k < 1) {
    throw InvalidArgument("K must be at least 1");
  }
  if (!(thres > 0.0 && thres <= 1.0)) {
    throw InvalidArgument("thres must lie in (0, 1]");
  }
  if (batch < 1) {
    throw InvalidArgument("batch size must be at least 1");
  }
  if (resort_period < 1 || resort_warmup_iters < 0) {
    throw InvalidArgument("invalid re-sort schedule");
  }
}

double topk_prob(const UncertainRelation& rel, const TopKAnswer& answer,
                 EngineCounters* counters) {
  std::uint64_t lookups = 0;
  const LogProduct joint = rel.uncertain_joint(answer.threshold, &lookups);
  if (counters != nullptr) {
    counters->cdf_lookups += lookups;
    const auto zeros_removed = rel.initial_joint(answer.threshold).zeros - joint.zeros;
    counters->zero_factor_divisions += static_cast<std::uint64_t>(zeros_removed);
  }
  return joint.value();
}

double topk_prob_direct(const UncertainRelation& rel, const TopKAnswer& answer) {
  return rel.direct_uncertain_joint(answer.threshold).value();
}

ExpectationContext::ExpectationContext(const UncertainRelation& rel, const TopKAnswer& answer,
                                       EngineCounters* counters)
    : rel_(&rel),
      threshold_(answer.threshold),
      penultimate_(answer.penultimate),
      last_bin_(rel.grid().max_bin()) {
  confidence_ = topk_prob(rel, answer, counters);
  std::uint64_t lookups = 0;
  if (penultimate_ != kUnboundedBin) {
    penultimate_joint_ = rel.uncertain_joint(penultimate_, &lookups);
    gamma_ = penultimate_joint_.value();
  }
  const Bin lo = std::max<Bin>(threshold_ + 1, 0);
  const Bin hi = std::min(penultimate_, last_bin_);
  for (Bin s = lo; s <= hi; ++s) {
    joint_.push_back(rel.uncertain_joint(s, &lookups));
  }
  if (counters != nullptr) {
    counters->cdf_lookups += lookups;
  }
}

const LogProduct& ExpectationContext::joint_at(Bin s) const {
  return joint_[static_cast<std::size_t>(s - std::max<Bin>(threshold_ + 1, 0))];
}

double ExpectationContext::expected(FrameId f, EngineCounters* counters) const {
  const auto& prior = uncertain_distribution(*rel_, f);
  std::uint64_t zero_divisions = 0;

  // Scores at or below the threshold leave the answer unchanged and only drop
  // f's own factor: together they contribute exactly the current confidence.
  CompensatedSum total(confidence_);

  // Scores between threshold and penultimate make f the new threshold frame.
  const Bin lo = std::max(threshold_ + 1, prior.min_bin());
  const Bin hi = std::min(penultimate_, prior.max_bin());
  for (Bin s = lo; s <= hi; ++s) {
    const double p = prior.pmf(s);
    if (p > 0.0) {
      total += p * joint_at(s).divided_by(prior.cdf(s)).value();
    }
  }

  // Scores above the penultimate promote the penultimate frame to threshold.
  if (penultimate_ != kUnboundedBin) {
    const double below = prior.cdf(penultimate_);
    if (below < 1.0) {
      if (below <= 0.0) {
        ++zero_divisions;
      }
      total += (1.0 - below) * penultimate_joint_.divided_by(below).value();
    }
  }
  if (counters != nullptr) {
    ++counters->expectation_evaluations;
    counters->zero_factor_divisions += zero_divisions;
  }
  return std::min(1.0, total.value());
}

double ExpectationContext::upper_bound(double psi) const {
  if (std::isinf(psi)) {
    return kInf;
  }
  return confidence_ + gamma_ * psi;
}

double expected_conf(const UncertainRelation& rel, const TopKAnswer& answer, FrameId f,
                     EngineCounters* counters) {
  return ExpectationContext(rel, answer, counters).expected(f, counters);
}

double sort_factor(const DiscreteScoreDist& prior, Bin threshold, Bin penultimate) {
  const double above = 1.0 - prior.cdf(threshold);
  const double below = penultimate == kUnboundedBin ? 1.0 : prior.cdf(penultimate);
  if (below <= 0.0) {
    return kInf;
  }
  return above / below;
}

CandidateOrder build_candidate_order(const UncertainRelation& rel, const TopKAnswer& answer,
                                     std::int64_t iteration) {
  CandidateOrder order;
  order.snapshot_iteration = iteration;
  order.threshold = answer.threshold;
  order.penultimate = answer.penultimate;
  const auto ids = rel.uncertain_ids();
  order.entries.reserve(ids.size());
  for (const FrameId id : ids) {
    order.entries.push_back(
        {id, sort_factor(rel.tuple(id).distribution(), answer.threshold, answer.penultimate)});
  }
  std::sort(order.entries.begin(), order.entries.end(), [](const auto& a, const auto& b) {
    return a.psi > b.psi || (a.psi == b.psi && a.frame_id < b.frame_id);
  });
  return order;
}

std::vector<FrameId> select_candidates(const UncertainRelation& rel, const TopKAnswer& answer,
                                       const CandidateOrder& order, std::size_t b,
                                       EngineCounters* counters) {
  if (b == 0) {
    return {};
  }
  const ExpectationContext ctx(rel, answer, counters);
  std::vector<Scored> best;
  best.reserve(b + 1);
  for (const auto& entry : order.entries) {
    if (rel.is_certain(entry.frame_id)) {
      continue;
    }
    if (best.size() == b) {
      const double bound = ctx.upper_bound(entry.psi);
      if (bound * (1.0 + kBoundSlack) < best.back().value) {
        break;
      }
    }
    insert_bounded(best, score_of(ctx, rel, entry.frame_id, counters), b);
  }
  std::vector<FrameId> out;
  out.reserve(best.size());
  for (const auto& s : best) {
    out.push_back(s.frame_id);
  }
  return out;
}

std::vector<FrameId> select_candidates_exhaustive(const UncertainRelation& rel,
                                                  const TopKAnswer& answer, std::size_t b) {
  const ExpectationContext ctx(rel, answer);
  std::vector<Scored> all;
  for (const FrameId id : rel.uncertain_ids()) {
    all.push_back(score_of(ctx, rel, id, nullptr));
  }
  std::sort(all.begin(), all.end(), ranks_before);
  all.resize(std::min(b, all.size()));
  std::vector<FrameId> out;
  for (const auto& s : all) {
    out.push_back(s.frame_id);
  }
  return out;
}

namespace {

void clean_batch(UncertainRelation& rel, Oracle& oracle, std::span<const FrameId> ids) {
  const auto scores = oracle.score(ids);
  if (scores.size() != ids.size()) {
    throw Error("oracle returned " + std::to_string(scores.size()) + " scores for " +
                std::to_string(ids.size()) + " frames");
  }
  for (std::size_t i = 0; i < ids.size(); ++i) {
    rel.clean(ids[i], rel.grid().nearest_bin(scores[i]));
  }
}

}  // namespace

std::int64_t bootstrap_certain(UncertainRelation& rel, Oracle& oracle, std::size_t k,
                               std::size_t batch) {
  if (rel.size() < k) {
    throw InsufficientFrames("relation holds " + std::to_string(rel.size()) +
                             " frames, fewer than K = " + std::to_string(k));
  }
  if (rel.certain_count() >= k) {
    return 0;
  }
  struct ByMean {
    double mean;
    FrameId frame_id;
  };
  std::vector<ByMean> pool;
  for (const FrameId id : rel.uncertain_ids()) {
    pool.push_back({rel.tuple(id).distribution().mean_bin(), id});
  }
  const std::size_t need = k - rel.certain_count();
  std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(need), pool.end(),
                    [](const ByMean& a, const ByMean& b) {
                      return a.mean > b.mean || (a.mean == b.mean && a.frame_id < b.frame_id);
                    });
  std::vector<FrameId> chosen;
  for (std::size_t i = 0; i < need; ++i) {
    chosen.push_back(pool[i].frame_id);
  }
  const std::size_t step = std::max<std::size_t>(batch, 1);
  for (std::size_t i = 0; i < chosen.size(); i += step) {
    const std::size_t n = std::min(step, chosen.size() - i);
    clean_batch(rel, oracle, std::span(chosen).subspan(i, n));
  }
  return static_cast<std::int64_t>(need);
}

QueryResult run_query(UncertainRelation& rel, Oracle& oracle, const QueryConfig& cfg) {
  cfg.validate();
  QueryResult result;
  QueryStats& stats = result.stats;
  EngineCounters counters;

  const auto batches_before = oracle.batches();
  stats.bootstrap_cleaned = bootstrap_certain(rel, oracle, cfg.k, cfg.batch);
  stats.frames_cleaned = stats.bootstrap_cleaned;

  std::optional<CandidateOrder> order;
  for (std::int64_t i = 0;; ++i) {
    TopKAnswer answer = rel.topk_certain(cfg.k);
    const double confidence = topk_prob(rel, answer, &counters);
    answer.confidence = confidence;
    stats.confidence_trajectory.emplace_back(i, confidence);
    if (confidence >= cfg.thres || rel.uncertain_count() == 0) {
      result.answer = std::move(answer);
      break;
    }

    bool rebuild = !order.has_value();
    if (!rebuild) {
      if (i < cfg.resort_warmup_iters) {
        rebuild = i / cfg.resort_period != order->snapshot_iteration / cfg.resort_period;
      } else {
        rebuild = answer.threshold != order->threshold ||
                  answer.penultimate != order->penultimate;
      }
    }
    if (rebuild) {
      order = build_candidate_order(rel, answer, i);
      ++stats.order_rebuilds;
    }

    const auto chosen = select_candidates(rel, answer, *order, cfg.batch, &counters);
    if (chosen.empty()) {
      throw Error("no candidate selected while uncertain frames remain");
    }
    clean_batch(rel, oracle, chosen);
    stats.frames_cleaned += static_cast<std::int64_t>(chosen.size());
    stats.iterations = i + 1;

    // Read ahead along the sort order for the next round.
    std::vector<FrameId> ahead;
    for (const auto& entry : order->entries) {
      if (ahead.size() == cfg.batch) {
        break;
      }
      if (!rel.is_certain(entry.frame_id)) {
        ahead.push_back(entry.frame_id);
      }
    }
    oracle.prefetch(ahead);
  }

  stats.oracle_batches = static_cast<std::int64_t>(oracle.batches() - batches_before);
  stats.expectation_evaluations = counters.expectation_evaluations;
  stats.zero_factor_divisions = counters.zero_factor_divisions;
  return result;
}

}  // namespace utopk
