#pragma once

// Fixtures shared by the test binaries.

#include <algorithm>
#include <random>
#include <utility>
#include <vector>

#include "utopk/distribution.hpp"
#include "utopk/relation.hpp"

namespace utopk::testing {

inline DiscreteScoreDist dist(const ScoreGrid& g, std::vector<std::pair<Bin, double>> probs) {
  return DiscreteScoreDist::from_probabilities(g, probs);
}

// Three frames with counts 0..2; f3 has the highest mean.
inline UncertainRelation three_frame_relation() {
  const ScoreGrid g = ScoreGrid::counting(3);
  std::vector<XTuple> rows;
  rows.push_back({1, 1, dist(g, {{0, 0.78}, {1, 0.21}, {2, 0.01}})});
  rows.push_back({2, 2, dist(g, {{0, 0.49}, {1, 0.42}, {2, 0.09}})});
  rows.push_back({3, 3, dist(g, {{0, 0.16}, {1, 0.48}, {2, 0.36}})});
  return UncertainRelation::build(std::move(rows), g);
}

struct RandomRelationSpec {
  int min_frames = 1;
  int max_frames = 8;
  int max_support = 4;
  Bin bins = 6;
  double certain_fraction = 0.3;
};

// Random supports on a small counting grid; some frames start certain.
inline UncertainRelation random_relation(std::mt19937_64& rng, const RandomRelationSpec& spec) {
  std::uniform_int_distribution<int> frames(spec.min_frames, spec.max_frames);
  std::uniform_int_distribution<int> support(1, spec.max_support);
  std::uniform_int_distribution<Bin> bin(0, spec.bins - 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const ScoreGrid g = ScoreGrid::counting(spec.bins);
  const int n = frames(rng);
  std::vector<XTuple> rows;
  for (int i = 0; i < n; ++i) {
    XTuple t;
    t.frame_id = 10 + 3 * i;
    t.timestamp = i;
    if (u(rng) < spec.certain_fraction) {
      t.state = bin(rng);
    } else {
      std::vector<Bin> bins_used;
      const int m = support(rng);
      while (static_cast<int>(bins_used.size()) < m) {
        const Bin b = bin(rng);
        if (std::find(bins_used.begin(), bins_used.end(), b) == bins_used.end()) {
          bins_used.push_back(b);
        }
      }
      std::vector<std::pair<Bin, double>> probs;
      double total = 0.0;
      for (const Bin b : bins_used) {
        const double w = 0.05 + u(rng);
        probs.emplace_back(b, w);
        total += w;
      }
      for (auto& [b, p] : probs) {
        p /= total;
      }
      t.state = DiscreteScoreDist::from_probabilities(g, probs);
    }
    rows.push_back(std::move(t));
  }
  return UncertainRelation::build(std::move(rows), g);
}

// Cleans random uncertain frames to random scores drawn from their priors
// (or anywhere on the grid with probability off_support).
inline void clean_randomly(UncertainRelation& rel, std::mt19937_64& rng, int count,
                           double off_support = 0.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int c = 0; c < count; ++c) {
    const auto ids = rel.uncertain_ids();
    if (ids.empty()) {
      return;
    }
    const FrameId id = ids[static_cast<std::size_t>(u(rng) * static_cast<double>(ids.size()))];
    const auto& d = rel.tuple(id).distribution();
    Bin score = d.min_bin();
    if (u(rng) < off_support) {
      score = static_cast<Bin>(u(rng) * static_cast<double>(rel.grid().bins));
    } else {
      double r = u(rng);
      for (const auto& [b, p] : d.support()) {
        score = b;
        r -= p;
        if (r <= 0.0) {
          break;
        }
      }
    }
    rel.clean(id, score);
  }
}

}  // namespace utopk::testing

#include <map>
#include <span>

#include "utopk/oracle.hpp"

namespace utopk::testing {

// Oracle answering from a fixed map; records the order of requests.
class MapOracle final : public Oracle {
 public:
  explicit MapOracle(std::map<FrameId, double> truth) : truth_(std::move(truth)) {}
  std::vector<FrameId> requested;

 protected:
  std::vector<double> score_batch(std::span<const FrameId> ids) override {
    std::vector<double> out;
    for (const FrameId id : ids) {
      requested.push_back(id);
      out.push_back(truth_.at(id));
    }
    return out;
  }

 private:
  std::map<FrameId, double> truth_;
};

}  // namespace utopk::testing
