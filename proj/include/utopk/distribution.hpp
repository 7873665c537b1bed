#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace utopk {

// Scores live on a grid and are addressed by bin index.
using Bin = std::int64_t;

struct ScoreGrid {
  double origin = 0.0;  // score of bin 0
  double step = 1.0;    // quantization step, > 0
  Bin bins = 1;         // number of bins, >= 1

  ScoreGrid() = default;
  ScoreGrid(double origin, double step, Bin bins);

  // Integer grid 0, 1, ..., bins-1 used for counting scores.
  static ScoreGrid counting(Bin bins) { return ScoreGrid(0.0, 1.0, bins); }

  double score_of(Bin bin) const { return origin + static_cast<double>(bin) * step; }
  // Nearest bin, not clamped to [0, bins).
  Bin nearest_bin(double score) const;
  // Nearest bin clamped into the grid.
  Bin clamp_bin(double score) const;
  Bin max_bin() const { return bins - 1; }
  // Lower edge of a bin; edges sit halfway between grid points.
  double lower_edge(Bin bin) const { return origin + (static_cast<double>(bin) - 0.5) * step; }

  bool operator==(const ScoreGrid&) const = default;
};

struct MixtureComponent {
  double weight = 1.0;
  double mean = 0.0;
  double stddev = 1.0;
};

class GaussianMixture {
 public:
  GaussianMixture() = default;
  // Throws InvalidArgument unless weights are >= 0 and sum to 1 within 1e-9,
  // every stddev is positive and the list is non-empty.
  explicit GaussianMixture(std::vector<MixtureComponent> components);

  static GaussianMixture normal(double mean, double stddev) {
    return GaussianMixture({{1.0, mean, stddev}});
  }

  const std::vector<MixtureComponent>& components() const { return components_; }
  std::size_t size() const { return components_.size(); }

 private:
  std::vector<MixtureComponent> components_;
};

struct MixtureMoments {
  double mean = 0.0;
  double variance = 0.0;
};

// Mean and total variance of a mixture (law of total variance).
MixtureMoments mixture_moments(const GaussianMixture& mix);

struct TruncatedComponent {
  MixtureComponent component;
  double lower = 0.0;           // mean - 3 stddev
  double upper = 0.0;           // mean + 3 stddev
  double truncated_mass = 0.0;  // component-relative mass outside [lower, upper]
};

struct TruncatedMixture {
  std::vector<TruncatedComponent> components;
  double excess_mass = 0.0;  // sum of weight * truncated_mass
};

TruncatedMixture truncate_mixture(const GaussianMixture& mix);

// Discrete distribution over grid bins. Probabilities are stored densely between
// the lowest and highest bin carrying mass; bins inside that range with zero
// mass are not part of the support.
class DiscreteScoreDist {
 public:
  DiscreteScoreDist() = default;

  // Throws InvalidArgument when probabilities are negative, fall outside the
  // grid, or do not sum to 1 within 1e-9. Zero entries are dropped.
  static DiscreteScoreDist from_probabilities(const ScoreGrid& grid,
                                              std::span<const std::pair<Bin, double>> probs);
  static DiscreteScoreDist point_mass(const ScoreGrid& grid, Bin bin);

  const ScoreGrid& grid() const { return grid_; }
  Bin min_bin() const { return first_bin_; }
  Bin max_bin() const { return first_bin_ + static_cast<Bin>(probs_.size()) - 1; }

  double pmf(Bin t) const;
  // Pr(score <= t). O(1).
  double cdf(Bin t) const;

  // Bins with nonzero mass, ascending.
  std::vector<std::pair<Bin, double>> support() const;
  std::size_t support_size() const;

  double mean_bin() const;
  double mean_score() const { return grid_.origin + mean_bin() * grid_.step; }
  double variance_score() const;

 private:
  DiscreteScoreDist(ScoreGrid grid, Bin first_bin, std::vector<double> probs);

  ScoreGrid grid_;
  Bin first_bin_ = 0;
  std::vector<double> probs_;
  std::vector<double> cdf_;
};

enum class Redistribution {
  kUniform,       // equal absolute increment on every occupied bin
  kProportional,  // renormalize occupied bins
};

struct QuantizeOptions {
  Redistribution redistribution = Redistribution::kUniform;
  // Mass below the grid's lowest edge lands in bin 0 (scores cannot go below
  // the origin). Mass above the top edge is always clipped.
  bool fold_below = true;
};

// Truncates every component at 3 stddev, bins the remaining mass onto the grid
// and redistributes the truncated (and clipped) excess over occupied bins.
// Throws EmptySupport when no bin receives mass.
DiscreteScoreDist quantize(const GaussianMixture& mix, const ScoreGrid& grid,
                           const QuantizeOptions& options = {});

}  // namespace utopk
