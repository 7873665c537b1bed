#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "utopk/oracle.hpp"
#include "utopk/relation.hpp"

namespace utopk {

struct QueryConfig {
  std::size_t k = 1;
  double thres = 0.9;             // in (0, 1]
  std::size_t batch = 8;          // frames cleaned per oracle batch
  std::int64_t resort_period = 10;
  std::int64_t resort_warmup_iters = 100;

  void validate() const;
};

// Uncertain frames sorted by sort factor psi = (1 - F(S_k)) / F(S_p) taken at
// the snapshot iteration. psi is +inf when F(S_p) = 0.
struct CandidateOrder {
  struct Entry {
    FrameId frame_id = 0;
    double psi = 0.0;
  };
  std::int64_t snapshot_iteration = 0;
  Bin threshold = 0;
  Bin penultimate = kUnboundedBin;
  std::vector<Entry> entries;  // psi descending, frame id ascending
};

// Instrumentation shared by the engine entry points.
struct EngineCounters {
  std::uint64_t cdf_lookups = 0;
  std::uint64_t expectation_evaluations = 0;
  // Evaluations that divided an exact zero CDF factor out of the joint
  // product (a cleaned frame whose prior put no mass at or below the
  // threshold).
  std::uint64_t zero_factor_divisions = 0;
};

struct QueryStats {
  std::int64_t iterations = 0;         // select-and-clean rounds
  std::int64_t bootstrap_cleaned = 0;  // frames cleaned before the first round
  std::int64_t frames_cleaned = 0;     // including bootstrap
  std::int64_t oracle_batches = 0;
  std::int64_t order_rebuilds = 0;
  std::uint64_t expectation_evaluations = 0;
  std::uint64_t zero_factor_divisions = 0;
  std::vector<std::pair<std::int64_t, double>> confidence_trajectory;
};

struct QueryResult {
  TopKAnswer answer;
  QueryStats stats;
};

// Confidence of an answer taken from the relation's certain frames: the
// probability that no uncertain frame scores above the threshold, obtained by
// dividing the cleaned priors out of the frozen joint CDF.
double topk_prob(const UncertainRelation& rel, const TopKAnswer& answer,
                 EngineCounters* counters = nullptr);
// Same quantity multiplied out over the uncertain frames.
double topk_prob_direct(const UncertainRelation& rel, const TopKAnswer& answer);

// Per-iteration quantities shared by every expectation and bound evaluation:
// the answer's confidence, gamma, and the uncertain joint CDF over the bins
// between threshold and penultimate score.
class ExpectationContext {
 public:
  ExpectationContext(const UncertainRelation& rel, const TopKAnswer& answer,
                     EngineCounters* counters = nullptr);

  double confidence() const { return confidence_; }
  double gamma() const { return gamma_; }
  Bin threshold() const { return threshold_; }
  Bin penultimate() const { return penultimate_; }

  // Expected confidence after cleaning uncertain frame f.
  double expected(FrameId f, EngineCounters* counters = nullptr) const;
  // Upper bound on expected(f) from a sort factor computed at any earlier
  // snapshot.
  double upper_bound(double psi) const;

 private:
  const LogProduct& joint_at(Bin s) const;

  const UncertainRelation* rel_;
  Bin threshold_;
  Bin penultimate_;
  Bin last_bin_;  // highest bin where the joint can still be below one
  double confidence_ = 0.0;
  double gamma_ = 1.0;
  LogProduct penultimate_joint_;
  std::vector<LogProduct> joint_;  // bins threshold+1 .. last_bin_
};

double expected_conf(const UncertainRelation& rel, const TopKAnswer& answer, FrameId f,
                     EngineCounters* counters = nullptr);

double sort_factor(const DiscreteScoreDist& prior, Bin threshold, Bin penultimate);

CandidateOrder build_candidate_order(const UncertainRelation& rel, const TopKAnswer& answer,
                                     std::int64_t iteration);

// The b uncertain frames with the largest expected confidence, scanning the
// order and stopping once the next bound cannot beat the b-th best exact
// value. Ties go to the larger prior mean, then the smaller frame id. Result
// in that ranking order.
std::vector<FrameId> select_candidates(const UncertainRelation& rel, const TopKAnswer& answer,
                                       const CandidateOrder& order, std::size_t b,
                                       EngineCounters* counters = nullptr);

// Reference: expected_conf on every uncertain frame.
std::vector<FrameId> select_candidates_exhaustive(const UncertainRelation& rel,
                                                  const TopKAnswer& answer, std::size_t b);

// Cleans uncertain frames in descending order of prior mean until at least k
// frames are certain. Returns the number of frames cleaned.
std::int64_t bootstrap_certain(UncertainRelation& rel, Oracle& oracle, std::size_t k,
                               std::size_t batch);

// Main select-and-clean loop. Throws InsufficientFrames when the relation has
// fewer than k frames; oracle failures propagate.
QueryResult run_query(UncertainRelation& rel, Oracle& oracle, const QueryConfig& cfg);

}  // namespace utopk
