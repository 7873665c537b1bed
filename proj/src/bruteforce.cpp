#include "utopk/bruteforce.hpp"

#include <algorithm>
#include <limits>
#include <string>
#include <unordered_set>

#include "utopk/errors.hpp"
#include "utopk/numeric.hpp"

namespace utopk {

WorldEnumerator::WorldEnumerator(const UncertainRelation& rel) {
  for (const FrameId id : rel.frame_ids()) {
    const auto& tuple = rel.tuple(id);
    Slot slot{id, {}};
    if (tuple.is_certain()) {
      slot.alternatives.emplace_back(tuple.certain_score(), 1.0);
    } else {
      slot.alternatives = tuple.distribution().support();
    }
    const auto n = static_cast<std::uint64_t>(slot.alternatives.size());
    if (world_count_ > kMaxWorlds / n) {
      throw TooManyWorlds("relation has more than " + std::to_string(kMaxWorlds) +
                          " possible worlds");
    }
    world_count_ *= n;
    slots_.push_back(std::move(slot));
  }
  cursor_.assign(slots_.size(), 0);
}

bool WorldEnumerator::next(PossibleWorld* world) {
  if (done_) {
    return false;
  }
  world->frame_ids.resize(slots_.size());
  world->scores.resize(slots_.size());
  world->probability = 1.0;
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    const auto& [score, p] = slots_[i].alternatives[cursor_[i]];
    world->frame_ids[i] = slots_[i].frame_id;
    world->scores[i] = score;
    world->probability *= p;
  }
  // Mixed-radix increment; the last slot varies fastest.
  std::size_t i = slots_.size();
  while (i > 0) {
    --i;
    if (++cursor_[i] < slots_[i].alternatives.size()) {
      return true;
    }
    cursor_[i] = 0;
  }
  done_ = true;
  return true;
}

std::vector<PossibleWorld> enumerate_worlds(const UncertainRelation& rel) {
  WorldEnumerator it(rel);
  std::vector<PossibleWorld> out;
  out.reserve(it.world_count());
  PossibleWorld w;
  while (it.next(&w)) {
    out.push_back(w);
  }
  return out;
}

double bf_topk_prob(const UncertainRelation& rel, std::span<const FrameId> members) {
  const std::unordered_set<FrameId> in_answer(members.begin(), members.end());
  for (const FrameId id : members) {
    rel.tuple(id);  // throws UnknownFrame
  }
  WorldEnumerator it(rel);
  CompensatedSum total;
  PossibleWorld w;
  while (it.next(&w)) {
    Bin lowest_member = std::numeric_limits<Bin>::max();
    Bin highest_other = std::numeric_limits<Bin>::min();
    for (std::size_t i = 0; i < w.frame_ids.size(); ++i) {
      if (in_answer.contains(w.frame_ids[i])) {
        lowest_member = std::min(lowest_member, w.scores[i]);
      } else {
        highest_other = std::max(highest_other, w.scores[i]);
      }
    }
    if (lowest_member >= highest_other) {
      total += w.probability;
    }
  }
  return total.value();
}

double bf_topk_prob(const UncertainRelation& rel, const TopKAnswer& answer) {
  std::vector<FrameId> members;
  for (const auto& m : answer.members) {
    members.push_back(m.frame_id);
  }
  return bf_topk_prob(rel, members);
}

double bf_expected_conf(const UncertainRelation& rel, const TopKAnswer& answer, FrameId f) {
  const auto& tuple = rel.tuple(f);
  if (tuple.is_certain()) {
    throw InvalidArgument("frame " + std::to_string(f) + " is certain");
  }
  CompensatedSum total;
  for (const auto& [s, p] : tuple.distribution().support()) {
    UncertainRelation cleaned = rel;
    cleaned.clean(f, s);
    total += p * bf_topk_prob(cleaned, cleaned.topk_certain(answer.k()));
  }
  return total.value();
}

}  // namespace utopk
