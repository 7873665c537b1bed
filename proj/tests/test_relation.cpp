#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "test_support.hpp"
#include "utopk/errors.hpp"
#include "utopk/relation.hpp"

using namespace utopk;
using utopk::testing::dist;
using utopk::testing::three_frame_relation;

namespace {

UncertainRelation certain_only(std::vector<std::pair<FrameId, Bin>> scores) {
  std::vector<XTuple> rows;
  for (const auto& [id, s] : scores) {
    rows.push_back({id, id, s});
  }
  return UncertainRelation::build(std::move(rows), ScoreGrid::counting(10));
}

}  // namespace

TEST(Relation, ThreeFrameJointCdf) {
  const auto rel = three_frame_relation();
  // Column products of the three CDFs, multiplied out here by hand.
  EXPECT_NEAR(rel.initial_joint(0).value(), 0.78 * 0.49 * 0.16, 1e-15);
  EXPECT_NEAR(rel.initial_joint(0).value(), 0.061152, 1e-12);
  EXPECT_NEAR(rel.initial_joint(1).value(), 0.99 * 0.91 * 0.64, 1e-15);
  EXPECT_NEAR(rel.initial_joint(1).value(), 0.576576, 1e-12);
  EXPECT_EQ(rel.initial_joint(2).value(), 1.0);
  EXPECT_EQ(rel.log_h(2), 0.0);
  EXPECT_EQ(rel.initial_joint(-1).value(), 0.0);
  EXPECT_EQ(rel.initially_uncertain_count(), 3u);
}

TEST(Relation, EmptyAndSeedOnlyRelationsHaveUnitJoint) {
  const auto empty = UncertainRelation::build({}, ScoreGrid::counting(4));
  const auto seeds = certain_only({{1, 3}, {2, 5}});
  for (Bin t = 0; t < 4; ++t) {
    EXPECT_EQ(empty.log_h(t), 0.0);
    EXPECT_EQ(seeds.log_h(t), 0.0);
  }
  EXPECT_EQ(seeds.uncertain_count(), 0u);
}

TEST(Relation, BuildRejectsDuplicatesAndForeignGrids) {
  const ScoreGrid g = ScoreGrid::counting(3);
  std::vector<XTuple> dup{{1, 0, Bin{1}}, {1, 1, Bin{2}}};
  EXPECT_THROW(UncertainRelation::build(dup, g), DuplicateFrame);
  std::vector<XTuple> foreign{{1, 0, dist(ScoreGrid::counting(4), {{3, 1.0}})}};
  EXPECT_THROW(UncertainRelation::build(foreign, g), GridMismatch);
}

TEST(Relation, CleanMovesFramesAndRejectsRepeats) {
  auto rel = three_frame_relation();
  rel.clean(3, 0);
  EXPECT_TRUE(rel.is_certain(3));
  EXPECT_EQ(rel.tuple(3).certain_score(), 0);
  EXPECT_EQ(rel.certain_ids(), std::vector<FrameId>{3});
  EXPECT_EQ(rel.uncertain_ids(), (std::vector<FrameId>{1, 2}));
  EXPECT_THROW(rel.clean(3, 1), AlreadyCertain);
  EXPECT_THROW(rel.clean(42, 1), UnknownFrame);
  ASSERT_NE(rel.prior(3), nullptr);
  EXPECT_NEAR(rel.prior_cdf(3, 0), 0.16, 1e-15);
}

TEST(Relation, CleanOutsideSupportIsAccepted) {
  const ScoreGrid g = ScoreGrid::counting(8);
  std::vector<XTuple> rows{{2, 0, dist(g, {{0, 0.49}, {1, 0.42}, {2, 0.09}})}};
  auto rel = UncertainRelation::build(std::move(rows), g);
  rel.clean(2, 5);
  EXPECT_EQ(rel.tuple(2).certain_score(), 5);
}

TEST(Relation, TopKCertainOrdersAndTieBreaks) {
  const auto rel = certain_only({{1, 3}, {2, 1}, {3, 2}});
  const auto a = rel.topk_certain(2);
  ASSERT_EQ(a.members.size(), 2u);
  EXPECT_EQ(a.members[0], (RankedFrame{1, 3}));
  EXPECT_EQ(a.members[1], (RankedFrame{3, 2}));
  EXPECT_EQ(a.threshold, 2);
  EXPECT_EQ(a.penultimate, 3);

  const auto tie = certain_only({{2, 2}, {1, 2}});
  const auto b = tie.topk_certain(1);
  EXPECT_EQ(b.members[0].frame_id, 1);
  EXPECT_EQ(b.penultimate, kUnboundedBin);
  EXPECT_THROW(tie.topk_certain(3), InsufficientCertain);
}

TEST(Relation, AnswerAfterCleaningFrameThree) {
  auto rel = three_frame_relation();
  rel.clean(3, 0);
  const auto a = rel.topk_certain(1);
  EXPECT_EQ(a.members, (std::vector<RankedFrame>{{3, 0}}));
  EXPECT_EQ(a.threshold, 0);
  EXPECT_EQ(a.penultimate, kUnboundedBin);
}

TEST(Relation, TopKCertainIsPermutationInvariant) {
  std::mt19937_64 rng(3);
  std::vector<std::pair<FrameId, Bin>> scores;
  for (FrameId id = 0; id < 40; ++id) {
    scores.emplace_back(id, static_cast<Bin>(rng() % 5));
  }
  const auto reference = certain_only(scores).topk_certain(7).members;
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(scores.begin(), scores.end(), rng);
    EXPECT_EQ(certain_only(scores).topk_certain(7).members, reference);
  }
}

// Dividing cleaned priors out of H must reproduce the direct product over the
// frames still uncertain, at every bin and after every clean.
TEST(Relation, FactorizationMatchesDirectProduct) {
  std::mt19937_64 rng(17);
  utopk::testing::RandomRelationSpec spec;
  spec.min_frames = 50;
  spec.max_frames = 1000;
  spec.bins = 12;
  spec.max_support = 6;
  spec.certain_fraction = 0.05;
  for (int trial = 0; trial < 30; ++trial) {
    auto rel = utopk::testing::random_relation(rng, spec);
    const std::size_t n0 = rel.size();
    for (int round = 0; round < 5; ++round) {
      utopk::testing::clean_randomly(rel, rng, 1 + static_cast<int>(rng() % 40), 0.1);
      ASSERT_EQ(rel.certain_count() + rel.uncertain_count(), n0);
      for (Bin t = -1; t <= rel.grid().bins; ++t) {
        // Oracle: plain multiplication of the current uncertain CDFs.
        long double direct = 1.0L;
        for (const FrameId id : rel.uncertain_ids()) {
          direct *= rel.tuple(id).distribution().cdf(t);
        }
        std::uint64_t lookups = 0;
        const double fast = rel.uncertain_joint(t, &lookups).value();
        EXPECT_LE(lookups, rel.cleaned_ids().size() + 1);
        if (direct == 0.0L) {
          EXPECT_EQ(fast, 0.0);
        } else {
          EXPECT_NEAR(fast / static_cast<double>(direct), 1.0, 1e-9) << "t=" << t;
        }
        EXPECT_EQ(fast == 0.0, rel.direct_uncertain_joint(t).value() == 0.0);
      }
    }
  }
}

TEST(Relation, JointIsNondecreasingInThreshold) {
  std::mt19937_64 rng(23);
  utopk::testing::RandomRelationSpec spec;
  spec.max_frames = 200;
  spec.bins = 10;
  for (int trial = 0; trial < 50; ++trial) {
    const auto rel = utopk::testing::random_relation(rng, spec);
    for (Bin t = 0; t + 1 < rel.grid().bins; ++t) {
      EXPECT_LE(rel.initial_joint(t).value(), rel.initial_joint(t + 1).value() * (1 + 1e-12));
    }
    EXPECT_NEAR(rel.log_h(rel.grid().max_bin()), 0.0, 1e-9);
  }
}
