#include "utopk/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "utopk/errors.hpp"
#include "utopk/numeric.hpp"

namespace utopk {

namespace {

constexpr double kMassTolerance = 1e-9;
constexpr double kTruncationSigmas = 3.0;

}  // namespace

ScoreGrid::ScoreGrid(double origin_, double step_, Bin bins_)
    : origin(origin_), step(step_), bins(bins_) {
  if (!(step > 0.0) || !std::isfinite(step)) {
    throw InvalidArgument("score grid step must be positive and finite");
  }
  if (bins < 1) {
    throw InvalidArgument("score grid needs at least one bin");
  }
  if (!std::isfinite(origin)) {
    throw InvalidArgument("score grid origin must be finite");
  }
}

Bin ScoreGrid::nearest_bin(double score) const {
  return static_cast<Bin>(std::llround((score - origin) / step));
}

Bin ScoreGrid::clamp_bin(double score) const {
  return std::clamp<Bin>(nearest_bin(score), 0, max_bin());
}

GaussianMixture::GaussianMixture(std::vector<MixtureComponent> components)
    : components_(std::move(components)) {
  if (components_.empty()) {
    throw InvalidArgument("mixture needs at least one component");
  }
  CompensatedSum total;
  for (const auto& c : components_) {
    if (!(c.weight >= 0.0) || !std::isfinite(c.mean) || !(c.stddev > 0.0) ||
        !std::isfinite(c.stddev)) {
      std::ostringstream msg;
      msg << "invalid mixture component (weight " << c.weight << ", mean " << c.mean
          << ", stddev " << c.stddev << ")";
      throw InvalidArgument(msg.str());
    }
    total += c.weight;
  }
  if (std::abs(total.value() - 1.0) > kMassTolerance) {
    throw InvalidArgument("mixture weights must sum to 1");
  }
}

MixtureMoments mixture_moments(const GaussianMixture& mix) {
  CompensatedSum mean;
  for (const auto& c : mix.components()) {
    mean += c.weight * c.mean;
  }
  const double mu = mean.value();
  CompensatedSum var;
  for (const auto& c : mix.components()) {
    const double d = c.mean - mu;
    var += c.weight * (c.stddev * c.stddev + d * d);
  }
  return {mu, std::max(0.0, var.value())};
}

TruncatedMixture truncate_mixture(const GaussianMixture& mix) {
  TruncatedMixture out;
  const double tail = three_sigma_tail_mass();
  CompensatedSum excess;
  for (const auto& c : mix.components()) {
    out.components.push_back({c, c.mean - kTruncationSigmas * c.stddev,
                              c.mean + kTruncationSigmas * c.stddev, tail});
    excess += c.weight * tail;
  }
  out.excess_mass = excess.value();
  return out;
}

DiscreteScoreDist::DiscreteScoreDist(ScoreGrid grid, Bin first_bin, std::vector<double> probs)
    : grid_(grid), first_bin_(first_bin), probs_(std::move(probs)) {
  cdf_.resize(probs_.size());
  CompensatedSum running;
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    running += probs_[i];
    cdf_[i] = running.value();
  }
}

DiscreteScoreDist DiscreteScoreDist::from_probabilities(
    const ScoreGrid& grid, std::span<const std::pair<Bin, double>> probs) {
  Bin lo = grid.bins;
  Bin hi = -1;
  CompensatedSum total;
  for (const auto& [bin, p] : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw InvalidArgument("probabilities must be finite and non-negative");
    }
    if (bin < 0 || bin >= grid.bins) {
      throw InvalidArgument("probability assigned to a bin outside the grid");
    }
    if (p > 0.0) {
      lo = std::min(lo, bin);
      hi = std::max(hi, bin);
    }
    total += p;
  }
  if (hi < 0) {
    throw EmptySupport("distribution has no mass");
  }
  if (std::abs(total.value() - 1.0) > kMassTolerance) {
    throw InvalidArgument("probabilities must sum to 1");
  }
  std::vector<double> dense(static_cast<std::size_t>(hi - lo + 1), 0.0);
  for (const auto& [bin, p] : probs) {
    if (p > 0.0) {
      dense[static_cast<std::size_t>(bin - lo)] += p;
    }
  }
  return DiscreteScoreDist(grid, lo, std::move(dense));
}

DiscreteScoreDist DiscreteScoreDist::point_mass(const ScoreGrid& grid, Bin bin) {
  const std::pair<Bin, double> one{bin, 1.0};
  return from_probabilities(grid, std::span(&one, 1));
}

double DiscreteScoreDist::pmf(Bin t) const {
  if (t < first_bin_ || t > max_bin()) {
    return 0.0;
  }
  return probs_[static_cast<std::size_t>(t - first_bin_)];
}

double DiscreteScoreDist::cdf(Bin t) const {
  if (probs_.empty() || t < first_bin_) {
    return 0.0;
  }
  if (t >= max_bin()) {
    return 1.0;
  }
  return cdf_[static_cast<std::size_t>(t - first_bin_)];
}

std::vector<std::pair<Bin, double>> DiscreteScoreDist::support() const {
  std::vector<std::pair<Bin, double>> out;
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    if (probs_[i] > 0.0) {
      out.emplace_back(first_bin_ + static_cast<Bin>(i), probs_[i]);
    }
  }
  return out;
}

std::size_t DiscreteScoreDist::support_size() const {
  return static_cast<std::size_t>(
      std::count_if(probs_.begin(), probs_.end(), [](double p) { return p > 0.0; }));
}

double DiscreteScoreDist::mean_bin() const {
  CompensatedSum acc;
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    acc += probs_[i] * static_cast<double>(first_bin_ + static_cast<Bin>(i));
  }
  return acc.value();
}

double DiscreteScoreDist::variance_score() const {
  const double mu = mean_score();
  CompensatedSum acc;
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    const double d = grid_.score_of(first_bin_ + static_cast<Bin>(i)) - mu;
    acc += probs_[i] * d * d;
  }
  return acc.value();
}

DiscreteScoreDist quantize(const GaussianMixture& mix, const ScoreGrid& grid,
                           const QuantizeOptions& options) {
  const TruncatedMixture truncated = truncate_mixture(mix);
  const double grid_low = grid.lower_edge(0);
  const double grid_high = grid.lower_edge(grid.bins);

  // Bin range touched by any truncation interval, after clipping and folding.
  Bin lo = grid.bins;
  Bin hi = -1;
  auto bin_range = [&](const TruncatedComponent& tc) -> std::pair<Bin, Bin> {
    double a = tc.lower;
    const double b = std::min(tc.upper, grid_high);
    if (options.fold_below) {
      a = std::max(a, grid_low);
      if (tc.upper < grid_low) {
        return {0, 0};
      }
    } else {
      a = std::max(a, grid_low);
    }
    if (b < a) {
      return {1, 0};  // empty
    }
    const Bin first = std::clamp<Bin>(
        static_cast<Bin>(std::floor((a - grid_low) / grid.step)), 0, grid.max_bin());
    const Bin last = std::clamp<Bin>(
        static_cast<Bin>(std::floor((b - grid_low) / grid.step)), 0, grid.max_bin());
    return {first, last};
  };
  for (const auto& tc : truncated.components) {
    const auto [first, last] = bin_range(tc);
    if (first <= last) {
      lo = std::min(lo, first);
      hi = std::max(hi, last);
    }
  }
  if (hi < lo) {
    throw EmptySupport("quantization grid is disjoint from every truncation interval");
  }

  std::vector<CompensatedSum> mass(static_cast<std::size_t>(hi - lo + 1));
  for (const auto& tc : truncated.components) {
    const auto [first, last] = bin_range(tc);
    const auto& c = tc.component;
    if (first > last || c.weight == 0.0) {
      continue;
    }
    for (Bin i = first; i <= last; ++i) {
      double a = std::max(grid.lower_edge(i), tc.lower);
      double b = std::min(grid.lower_edge(i + 1), tc.upper);
      if (i == 0 && options.fold_below) {
        a = tc.lower;
      }
      if (b <= a) {
        continue;
      }
      const double p = standard_normal_cdf((b - c.mean) / c.stddev) -
                       standard_normal_cdf((a - c.mean) / c.stddev);
      if (p > 0.0) {
        mass[static_cast<std::size_t>(i - lo)] += c.weight * p;
      }
    }
  }

  std::vector<double> probs(mass.size());
  CompensatedSum kept;
  std::size_t occupied = 0;
  for (std::size_t i = 0; i < mass.size(); ++i) {
    probs[i] = mass[i].value();
    if (probs[i] > 0.0) {
      kept += probs[i];
      ++occupied;
    } else {
      probs[i] = 0.0;
    }
  }
  if (occupied == 0) {
    throw EmptySupport("no grid bin received probability mass");
  }

  // Truncated tails plus anything clipped at the grid boundary.
  const double kept_mass = kept.value();
  const double excess = 1.0 - kept_mass;
  if (options.redistribution == Redistribution::kUniform) {
    const double share = excess / static_cast<double>(occupied);
    for (double& p : probs) {
      if (p > 0.0) {
        p += share;
      }
    }
  } else {
    for (double& p : probs) {
      p /= kept_mass;
    }
  }

  // Trim so the stored range starts and ends on occupied bins.
  std::size_t first = 0;
  while (probs[first] <= 0.0) {
    ++first;
  }
  std::size_t last = probs.size() - 1;
  while (probs[last] <= 0.0) {
    --last;
  }
  std::vector<std::pair<Bin, double>> sparse;
  sparse.reserve(last - first + 1);
  for (std::size_t i = first; i <= last; ++i) {
    sparse.emplace_back(lo + static_cast<Bin>(i), probs[i]);
  }
  return DiscreteScoreDist::from_probabilities(grid, sparse);
}

}  // namespace utopk
