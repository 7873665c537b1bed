#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "utopk/distribution.hpp"
#include "utopk/numeric.hpp"

namespace utopk {

using FrameId = std::int64_t;

// Stands in for the score of the penultimate member when K = 1.
inline constexpr Bin kUnboundedBin = std::numeric_limits<Bin>::max();

// One frame of the relation. Uncertain tuples carry a distribution over bins,
// certain tuples a single bin confirmed by the oracle.
struct XTuple {
  FrameId frame_id = 0;
  std::int64_t timestamp = 0;
  std::variant<DiscreteScoreDist, Bin> state;

  bool is_certain() const { return std::holds_alternative<Bin>(state); }
  Bin certain_score() const { return std::get<Bin>(state); }
  const DiscreteScoreDist& distribution() const { return std::get<DiscreteScoreDist>(state); }
};

struct RankedFrame {
  FrameId frame_id = 0;
  Bin score = 0;

  bool operator==(const RankedFrame&) const = default;
};

struct TopKAnswer {
  std::vector<RankedFrame> members;  // descending score, ties by frame id
  Bin threshold = 0;                 // score of the rank-K member
  Bin penultimate = kUnboundedBin;   // score of the rank-(K-1) member
  std::optional<double> confidence;

  std::size_t k() const { return members.size(); }
};

// The x-tuple relation. Joint CDF tables over the initially uncertain frames
// are frozen at build time; cleaning only moves frames from the uncertain to
// the certain side and remembers which priors have to be divided back out.
//
// Reads are safe to run concurrently; clean() needs exclusive access.
class UncertainRelation {
 public:
  UncertainRelation() = default;

  // Throws DuplicateFrame or GridMismatch.
  static UncertainRelation build(std::vector<XTuple> entries, const ScoreGrid& grid);

  const ScoreGrid& grid() const { return grid_; }
  std::size_t size() const { return rows_.size(); }
  std::size_t certain_count() const { return ranked_certain_.size(); }
  std::size_t uncertain_count() const { return rows_.size() - ranked_certain_.size(); }
  std::size_t initially_uncertain_count() const { return initially_uncertain_; }

  bool contains(FrameId id) const { return index_.contains(id); }
  // Throws UnknownFrame.
  const XTuple& tuple(FrameId id) const;
  bool is_certain(FrameId id) const { return tuple(id).is_certain(); }
  // All tuples in build order.
  std::vector<FrameId> frame_ids() const;
  std::vector<FrameId> uncertain_ids() const;
  std::vector<FrameId> certain_ids() const;
  // Frames that were uncertain at build time and have been cleaned since, in
  // cleaning order.
  const std::vector<FrameId>& cleaned_ids() const { return cleaned_; }

  // Prior distribution of an initially uncertain frame, still available after
  // it was cleaned. nullptr for certain seeds.
  const DiscreteScoreDist* prior(FrameId id) const;
  // Prior F_f(t); throws UnknownFrame or InvalidArgument for certain seeds.
  double prior_cdf(FrameId id, Bin t) const;

  // ln H(t) = sum of ln F_f(t) over the initially uncertain frames (-inf when a
  // factor is zero).
  double log_h(Bin t) const { return initial_joint(t).log_value(); }
  // H(t) kept with exact zero and unit-factor counts.
  LogProduct initial_joint(Bin t) const;

  // Product of F_f(t) over the currently uncertain frames, obtained by dividing
  // the cleaned priors out of H(t). Adds the number of table and CDF lookups to
  // *lookups when given.
  LogProduct uncertain_joint(Bin t, std::uint64_t* lookups = nullptr) const;
  // The same product multiplied out directly over the uncertain frames.
  LogProduct direct_uncertain_joint(Bin t) const;

  // Throws UnknownFrame or AlreadyCertain. The score may lie outside the prior
  // support.
  void clean(FrameId id, Bin true_score);

  // Throws InsufficientCertain when fewer than k frames are certain.
  TopKAnswer topk_certain(std::size_t k) const;

 private:
  struct Row {
    XTuple tuple;
    std::optional<DiscreteScoreDist> prior;
  };
  // Orders certain frames by score descending, then frame id ascending.
  using RankKey = std::pair<Bin, FrameId>;  // (-score, id)

  std::size_t row_index(FrameId id) const;

  ScoreGrid grid_;
  std::vector<Row> rows_;
  std::unordered_map<FrameId, std::size_t> index_;
  std::set<RankKey> ranked_certain_;
  std::vector<FrameId> cleaned_;
  std::size_t initially_uncertain_ = 0;
  // Indexed by bin over [0, bins).
  std::vector<std::int64_t> h_zeros_;
  std::vector<std::int64_t> h_below_one_;
  std::vector<double> h_log_;
};

inline UncertainRelation build_relation(std::vector<XTuple> entries, const ScoreGrid& grid) {
  return UncertainRelation::build(std::move(entries), grid);
}

inline TopKAnswer topk_certain(const UncertainRelation& rel, std::size_t k) {
  return rel.topk_certain(k);
}

}  // namespace utopk
