#pragma once

// Exponential-cost reference computations over possible worlds. Only meant
// for small relations in tests.

#include <cstdint>
#include <span>
#include <vector>

#include "utopk/relation.hpp"

namespace utopk {

inline constexpr std::uint64_t kMaxWorlds = 1'000'000;

struct PossibleWorld {
  std::vector<FrameId> frame_ids;  // relation build order
  std::vector<Bin> scores;
  double probability = 1.0;
};

// Walks every joint assignment of scores to frames. Certain tuples take their
// fixed score. Throws TooManyWorlds past kMaxWorlds.
class WorldEnumerator {
 public:
  explicit WorldEnumerator(const UncertainRelation& rel);

  std::uint64_t world_count() const { return world_count_; }
  // Fills *world with the next assignment; false when exhausted.
  bool next(PossibleWorld* world);

 private:
  struct Slot {
    FrameId frame_id;
    std::vector<std::pair<Bin, double>> alternatives;
  };
  std::vector<Slot> slots_;
  std::vector<std::size_t> cursor_;
  std::uint64_t world_count_ = 1;
  bool done_ = false;
};

std::vector<PossibleWorld> enumerate_worlds(const UncertainRelation& rel);

// Probability that the given members form a Top-K of the world, ties
// permitted: every member scores at least as high as every non-member. Members
// may still be uncertain.
double bf_topk_prob(const UncertainRelation& rel, std::span<const FrameId> members);
double bf_topk_prob(const UncertainRelation& rel, const TopKAnswer& answer);

// Expected confidence after cleaning f, by cleaning f to each of its support
// scores, recomputing the certain Top-K and enumerating worlds.
double bf_expected_conf(const UncertainRelation& rel, const TopKAnswer& answer, FrameId f);

}  // namespace utopk
