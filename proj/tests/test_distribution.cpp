#include <gtest/gtest.h>

#include <boost/math/special_functions/erf.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "utopk/distribution.hpp"
#include "utopk/errors.hpp"
#include "utopk/numeric.hpp"

using namespace utopk;

namespace {

using big = boost::multiprecision::cpp_bin_float_50;

// 50-digit Phi, independent of the library's erfc path.
double phi_hp(double z) {
  const big x = big(z) / boost::multiprecision::sqrt(big(2));
  return static_cast<double>(big(0.5) * boost::math::erfc(-x));
}

double total_mass(const DiscreteScoreDist& d) {
  double s = 0.0;
  for (const auto& [bin, p] : d.support()) {
    s += p;
  }
  return s;
}

}  // namespace

TEST(ScoreGrid, RejectsBadParameters) {
  EXPECT_THROW(ScoreGrid(0.0, 0.0, 4), InvalidArgument);
  EXPECT_THROW(ScoreGrid(0.0, -1.0, 4), InvalidArgument);
  EXPECT_THROW(ScoreGrid(0.0, 1.0, 0), InvalidArgument);
}

TEST(ScoreGrid, BinMappingAndEdges) {
  const ScoreGrid g(-1.0, 0.5, 9);
  EXPECT_DOUBLE_EQ(g.score_of(0), -1.0);
  EXPECT_DOUBLE_EQ(g.score_of(4), 1.0);
  EXPECT_EQ(g.nearest_bin(1.1), 4);
  EXPECT_EQ(g.nearest_bin(-7.0), -12);
  EXPECT_EQ(g.clamp_bin(-7.0), 0);
  EXPECT_EQ(g.clamp_bin(99.0), 8);
  EXPECT_DOUBLE_EQ(g.lower_edge(0), -1.25);
  EXPECT_DOUBLE_EQ(g.lower_edge(1), -0.75);
  for (Bin b = 0; b < g.bins; ++b) {
    EXPECT_EQ(g.nearest_bin(g.score_of(b)), b);
  }
}

TEST(GaussianMixture, Validation) {
  EXPECT_THROW(GaussianMixture(std::vector<MixtureComponent>{}), InvalidArgument);
  EXPECT_THROW(GaussianMixture({{0.5, 0.0, 1.0}}), InvalidArgument);
  EXPECT_THROW(GaussianMixture({{1.0, 0.0, 0.0}}), InvalidArgument);
  EXPECT_THROW(GaussianMixture({{1.2, 0.0, 1.0}, {-0.2, 1.0, 1.0}}), InvalidArgument);
  EXPECT_NO_THROW(GaussianMixture({{0.5, 0.0, 1.0}, {0.5 + 1e-10, 1.0, 1.0}}));
}

TEST(Truncation, ThreeSigmaTailMatchesHighPrecisionErf) {
  const double oracle = 2.0 * (1.0 - phi_hp(3.0));
  EXPECT_NEAR(oracle, 0.0026998, 5e-8);
  const auto t = truncate_mixture(GaussianMixture::normal(0.0, 1.0));
  ASSERT_EQ(t.components.size(), 1u);
  EXPECT_DOUBLE_EQ(t.components[0].lower, -3.0);
  EXPECT_DOUBLE_EQ(t.components[0].upper, 3.0);
  EXPECT_NEAR(t.components[0].truncated_mass, oracle, 1e-15);
  EXPECT_NEAR(t.excess_mass, oracle, 1e-15);
}

TEST(Truncation, TailMassIsScaleInvariant) {
  const double oracle = 2.0 * (1.0 - phi_hp(3.0));
  const auto t = truncate_mixture(GaussianMixture({{0.5, 1.0, 1e-9}, {0.5, 4.0, 1e-9}}));
  for (const auto& c : t.components) {
    EXPECT_NEAR(c.upper - c.lower, 6e-9, 1e-15);
    EXPECT_NEAR(c.truncated_mass, oracle, 1e-15);
  }
  EXPECT_NEAR(t.excess_mass, oracle, 1e-15);
}

TEST(Truncation, DisjointIntervals) {
  const auto t = truncate_mixture(GaussianMixture({{0.5, 1.0, 1.0}, {0.5, 10.0, 1.0}}));
  EXPECT_DOUBLE_EQ(t.components[0].lower, -2.0);
  EXPECT_DOUBLE_EQ(t.components[0].upper, 4.0);
  EXPECT_DOUBLE_EQ(t.components[1].lower, 7.0);
  EXPECT_DOUBLE_EQ(t.components[1].upper, 13.0);
}

TEST(Quantize, DegeneratePointMass) {
  const auto d = quantize(GaussianMixture::normal(5.0, 1e-6), ScoreGrid::counting(10));
  ASSERT_EQ(d.support_size(), 1u);
  EXPECT_NEAR(d.pmf(5), 1.0, 1e-12);
}

TEST(Quantize, TwoPointMasses) {
  const auto d = quantize(GaussianMixture({{0.5, 0.0, 1e-6}, {0.5, 2.0, 1e-6}}),
                          ScoreGrid::counting(5));
  ASSERT_EQ(d.support_size(), 2u);
  EXPECT_NEAR(d.pmf(0), 0.5, 1e-12);
  EXPECT_NEAR(d.pmf(2), 0.5, 1e-12);
  EXPECT_EQ(d.pmf(1), 0.0);
}

TEST(Quantize, StandardNormalBinsAgainstErfOracle) {
  const ScoreGrid g(-3.0, 1.0, 7);
  const auto d = quantize(GaussianMixture::normal(0.0, 1.0), g);
  const double excess = 2.0 * (1.0 - phi_hp(3.0));
  const double central = phi_hp(0.5) - phi_hp(-0.5);
  EXPECT_NEAR(central, 0.38292, 5e-6);
  ASSERT_EQ(d.support_size(), 7u);
  EXPECT_NEAR(d.pmf(3), central + excess / 7.0, 1e-12);
  // Outer bins are cut at the truncation point.
  const double outer = phi_hp(-2.5) - phi_hp(-3.0);
  EXPECT_NEAR(d.pmf(0), outer + excess / 7.0, 1e-12);
  EXPECT_NEAR(d.pmf(6), outer + excess / 7.0, 1e-12);
  EXPECT_NEAR(total_mass(d), 1.0, 1e-12);
}

TEST(Quantize, ProportionalRedistributionRenormalizes) {
  const ScoreGrid g(-3.0, 1.0, 7);
  QuantizeOptions opt;
  opt.redistribution = Redistribution::kProportional;
  const auto d = quantize(GaussianMixture::normal(0.0, 1.0), g, opt);
  const double kept = 1.0 - 2.0 * (1.0 - phi_hp(3.0));
  EXPECT_NEAR(d.pmf(3), (phi_hp(0.5) - phi_hp(-0.5)) / kept, 1e-12);
  EXPECT_NEAR(total_mass(d), 1.0, 1e-12);
}

TEST(Quantize, NegativeMassFoldsIntoBinZero) {
  const auto d = quantize(GaussianMixture::normal(0.0, 1.0), ScoreGrid::counting(6));
  const double excess = 2.0 * (1.0 - phi_hp(3.0));
  ASSERT_EQ(d.min_bin(), 0);
  ASSERT_EQ(d.support_size(), 4u);
  EXPECT_NEAR(d.pmf(0), phi_hp(0.5) - phi_hp(-3.0) + excess / 4.0, 1e-12);
  EXPECT_NEAR(total_mass(d), 1.0, 1e-12);
}

TEST(Quantize, MassAboveTheGridIsClippedAndRedistributed) {
  const auto d = quantize(GaussianMixture::normal(2.0, 1.0), ScoreGrid::counting(3));
  // Bins 0..2 keep [-1, 2.5]; everything else is spread evenly.
  const double kept = phi_hp(0.5) - phi_hp(-3.0);
  const double share = (1.0 - kept) / 3.0;
  EXPECT_NEAR(d.pmf(2), phi_hp(0.5) - phi_hp(-0.5) + share, 1e-12);
  EXPECT_NEAR(total_mass(d), 1.0, 1e-12);
}

TEST(Quantize, DisjointGridThrows) {
  EXPECT_THROW(quantize(GaussianMixture::normal(100.0, 1.0), ScoreGrid::counting(5)),
               EmptySupport);
  QuantizeOptions opt;
  opt.fold_below = false;
  EXPECT_THROW(quantize(GaussianMixture::normal(-100.0, 1.0), ScoreGrid::counting(5), opt),
               EmptySupport);
}

TEST(Quantize, MassConservationOnRandomMixtures) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const int g = 1 + static_cast<int>(u(rng) * 4);
    std::vector<MixtureComponent> comps;
    double left = 1.0;
    for (int j = 0; j < g; ++j) {
      const double w = j + 1 == g ? left : left * u(rng);
      left -= w;
      comps.push_back({w, 20.0 * u(rng), 0.01 + 3.0 * u(rng)});
    }
    const ScoreGrid grid(0.0, 0.05 + u(rng), 400);
    const auto d = quantize(GaussianMixture(comps), grid);
    EXPECT_NEAR(total_mass(d), 1.0, 1e-9);
    EXPECT_NEAR(d.cdf(d.max_bin()), 1.0, 1e-9);
  }
}

// The continuous limit of uniform redistribution: the truncated density plus the
// excess spread evenly over the covered interval. Its mean by Simpson's rule.
TEST(Quantize, MeanConvergesToTheLimitDensity) {
  const GaussianMixture mix({{0.3, 4.37, 0.9}, {0.7, 6.11, 0.4}});
  const double lo = 4.37 - 2.7;
  const double hi = 6.11 + 1.2;
  const double excess = 2.0 * (1.0 - phi_hp(3.0));
  auto density = [&](double x) {
    double f = 0.0;
    for (const auto& c : mix.components()) {
      if (std::abs(x - c.mean) <= 3.0 * c.stddev) {
        const double z = (x - c.mean) / c.stddev;
        f += c.weight * std::exp(-0.5 * z * z) / (c.stddev * std::sqrt(2.0 * M_PI));
      }
    }
    return f + excess / (hi - lo);
  };
  // Split at every truncation point so Simpson sees smooth pieces.
  const std::vector<double> knots{lo, 6.11 - 1.2, 4.37 + 2.7, hi};
  double mass = 0.0;
  double first = 0.0;
  for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
    const int n = 20000;
    const double h = (knots[k + 1] - knots[k]) / n;
    for (int i = 0; i <= n; ++i) {
      // Endpoints take the one-sided limit from inside the piece.
      const double x = i == 0 ? knots[k] + 1e-12 : (i == n ? knots[k + 1] - 1e-12 : knots[k] + i * h);
      const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      mass += w * h / 3.0 * density(x);
      first += w * h / 3.0 * x * density(x);
    }
  }
  ASSERT_NEAR(mass, 1.0, 1e-9);
  const double limit_mean = first / mass;

  double previous = std::numeric_limits<double>::infinity();
  for (const double step : {1.0, 0.1, 0.01}) {
    const ScoreGrid grid(0.0, step, static_cast<Bin>(std::ceil(10.0 / step)) + 2);
    const double err = std::abs(quantize(mix, grid).mean_score() - limit_mean);
    EXPECT_LT(err, previous) << "step " << step;
    previous = err;
  }
  EXPECT_LT(previous, 1e-3);
}

TEST(DiscreteScoreDist, CdfMatchesBruteSum) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const ScoreGrid grid = ScoreGrid::counting(40);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::pair<Bin, double>> probs;
    double total = 0.0;
    for (Bin b = 5; b < 25; ++b) {
      if (u(rng) < 0.5) {
        const double p = u(rng);
        probs.emplace_back(b, p);
        total += p;
      }
    }
    if (probs.empty()) {
      continue;
    }
    for (auto& [b, p] : probs) {
      p /= total;
    }
    const auto d = DiscreteScoreDist::from_probabilities(grid, probs);
    for (Bin t = -2; t < 42; ++t) {
      double brute = 0.0;
      for (const auto& [b, p] : probs) {
        if (b <= t) {
          brute += p;
        }
      }
      if (t >= d.max_bin()) {
        EXPECT_EQ(d.cdf(t), 1.0);
      } else {
        EXPECT_NEAR(d.cdf(t), brute, 1e-12) << "t=" << t;
      }
    }
  }
}

TEST(DiscreteScoreDist, ThreeFrameCdf) {
  const ScoreGrid g = ScoreGrid::counting(3);
  const std::vector<std::pair<Bin, double>> f1{{0, 0.78}, {1, 0.21}, {2, 0.01}};
  const std::vector<std::pair<Bin, double>> f3{{0, 0.16}, {1, 0.48}, {2, 0.36}};
  const auto d1 = DiscreteScoreDist::from_probabilities(g, f1);
  const auto d3 = DiscreteScoreDist::from_probabilities(g, f3);
  EXPECT_NEAR(d1.cdf(1), 0.99, 1e-15);
  EXPECT_EQ(d1.cdf(-1), 0.0);
  EXPECT_EQ(d3.cdf(2), 1.0);
  EXPECT_NEAR(d3.mean_bin(), 1.2, 1e-15);
}

TEST(DiscreteScoreDist, RejectsInvalidProbabilities) {
  const ScoreGrid g = ScoreGrid::counting(3);
  const std::vector<std::pair<Bin, double>> short_mass{{0, 0.5}, {1, 0.4}};
  const std::vector<std::pair<Bin, double>> negative{{0, 1.5}, {1, -0.5}};
  const std::vector<std::pair<Bin, double>> off_grid{{0, 0.5}, {3, 0.5}};
  EXPECT_THROW(DiscreteScoreDist::from_probabilities(g, short_mass), InvalidArgument);
  EXPECT_THROW(DiscreteScoreDist::from_probabilities(g, negative), InvalidArgument);
  EXPECT_THROW(DiscreteScoreDist::from_probabilities(g, off_grid), InvalidArgument);
}

TEST(MixtureMoments, ClosedFormCases) {
  const auto a = mixture_moments(GaussianMixture::normal(2.0, 1.0));
  EXPECT_DOUBLE_EQ(a.mean, 2.0);
  EXPECT_DOUBLE_EQ(a.variance, 1.0);
  const auto b = mixture_moments(GaussianMixture({{0.5, 0.0, 1.0}, {0.5, 2.0, 1.0}}));
  EXPECT_NEAR(b.mean, 1.0, 1e-15);
  EXPECT_NEAR(b.variance, 2.0, 1e-15);
  const auto c = mixture_moments(GaussianMixture({{0.3, 0.0, 1e-9}, {0.7, 10.0, 1e-9}}));
  EXPECT_NEAR(c.mean, 7.0, 1e-12);
  EXPECT_NEAR(c.variance, 0.3 * 0.7 * 100.0, 1e-6);
}

TEST(MixtureMoments, AgreesWithMonteCarlo) {
  const GaussianMixture mix({{0.2, -1.0, 0.5}, {0.5, 3.0, 2.0}, {0.3, 8.0, 1.0}});
  const auto m = mixture_moments(mix);
  std::mt19937_64 rng(99);
  std::discrete_distribution<int> pick({0.2, 0.5, 0.3});
  std::normal_distribution<double> z(0.0, 1.0);
  const int n = 1'000'000;
  double sum = 0.0;
  double sumsq = 0.0;
  double sum4 = 0.0;
  std::vector<double> xs(n);
  for (int i = 0; i < n; ++i) {
    const auto& c = mix.components()[static_cast<std::size_t>(pick(rng))];
    xs[i] = c.mean + c.stddev * z(rng);
    sum += xs[i];
  }
  const double mean = sum / n;
  for (const double x : xs) {
    const double d = x - mean;
    sumsq += d * d;
    sum4 += d * d * d * d;
  }
  const double var = sumsq / (n - 1);
  const double se_mean = std::sqrt(var / n);
  const double se_var = std::sqrt((sum4 / n - var * var) / n);
  EXPECT_LT(std::abs(mean - m.mean), 4.0 * se_mean);
  EXPECT_LT(std::abs(var - m.variance), 4.0 * se_var);
}

TEST(LogProduct, ZeroFactorsDivideOutExactly) {
  LogProduct p;
  p.multiply(0.5);
  p.multiply(0.0);
  p.multiply(1.0);
  EXPECT_EQ(p.value(), 0.0);
  p.divide(0.0);
  EXPECT_DOUBLE_EQ(p.value(), 0.5);
  p.divide(0.5);
  EXPECT_EQ(p.value(), 1.0);
}

TEST(CompensatedSum, RecoversLostLowBits) {
  CompensatedSum s;
  s += 1.0;
  for (int i = 0; i < 1000; ++i) {
    s += 1e-16;
  }
  s -= 1.0;
  EXPECT_NEAR(s.value(), 1e-13, 1e-25);
}
