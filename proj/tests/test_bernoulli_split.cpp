#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "softroute/bernoulli_split.hpp"

using namespace softroute;

namespace {

SystemConfig base_instance(double rho, double R, const char* deadline = "const:1") {
  return SystemConfig::at_load(rho, R, {ClusterConfig(4, 5.0), ClusterConfig(8, 3.0)},
                               DeadlineDistribution::parse(deadline));
}

// Minimizes R l0 + f1(l1) + f2(l2) over a 1000 x 1000 grid, then again over
// a 1000 x 1000 grid zoomed around the best cell.
double grid_search(const SystemConfig& config) {
  const double lambda = config.arrival_rate();
  const auto& c1 = config.cluster(0);
  const auto& c2 = config.cluster(1);
  const auto& d = config.deadline();
  const double cap1 = c1.capacity() * (1 - 1e-9), cap2 = c2.capacity() * (1 - 1e-9);
  auto cost = [&](double l1, double l2) {
    return config.rejection_cost() * (lambda - l1 - l2) + miss_rate(c1, l1, d) + miss_rate(c2, l2, d);
  };
  const int N = 1000;
  double lo1 = 0.0, hi1 = std::min(cap1, lambda);
  double best = INFINITY, best1 = 0.0;
  for (int stage = 0; stage < 2; ++stage) {
    const double h = (hi1 - lo1) / (N - 1);
    for (int i = 0; i < N; ++i) {
      const double l1 = lo1 + i * h;
      const double top = std::min(cap2, lambda - l1);
      if (top < 0) continue;
      for (int k = 0; k < N; ++k) {
        const double l2 = top * k / (N - 1);
        const double v = cost(l1, l2);
        if (v < best) {
          best = v;
          best1 = l1;
        }
      }
    }
    lo1 = std::max(0.0, best1 - 2 * h);
    hi1 = std::min(std::min(cap1, lambda), best1 + 2 * h);
  }
  return best;
}

}  // namespace

TEST(StationaryMiss, ExponentialMM2) {
  EXPECT_NEAR(stationary_miss_prob(ClusterConfig(2, 1.0), 1.5, DeadlineDistribution::exponential(1.0)), 5.0 / 7.0,
              1e-14);
}

TEST(StationaryMiss, MatchesStationarySum) {
  EXPECT_NEAR(stationary_miss_prob(ClusterConfig(4, 5.0), 18.0, DeadlineDistribution::constant(1.0)),
              0.17557623266708609, 1e-13);
  EXPECT_NEAR(stationary_miss_prob(ClusterConfig(8, 3.0), 20.0, DeadlineDistribution::uniform(0.3, 1.7)),
              0.16209350063542201, 1e-13);
}

TEST(StationaryMiss, SingleServerClosedForm) {
  // M/M/1 sojourn is Exp(mu - lambda)
  const ClusterConfig c(1, 2.0);
  const auto d = DeadlineDistribution::constant(1.0);
  EXPECT_NEAR(stationary_miss_prob(c, 1.0, d), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(miss_rate_derivative(c, 1.0, d), 2.0 / std::exp(1.0), 1e-14);
}

TEST(StationaryMiss, Endpoints) {
  const ClusterConfig c(3, 2.0);
  for (const char* spec : {"const:1", "unif:0.3:1.7", "exp:2"}) {
    const auto d = DeadlineDistribution::parse(spec);
    EXPECT_DOUBLE_EQ(stationary_miss_prob(c, c.capacity(), d), 1.0);
    EXPECT_NEAR(stationary_miss_prob(c, 0.0, d), miss_prob(c, 0, d), 1e-15) << spec;
    EXPECT_NEAR(marginal_floor(c, d), miss_prob(c, 0, d), 1e-15) << spec;
    EXPECT_THROW(stationary_miss_prob(c, c.capacity() * 1.01, d), std::domain_error);
  }
}

TEST(MissRate, DerivativeMatchesFiniteDifference) {
  EXPECT_NEAR(miss_rate_derivative(ClusterConfig(4, 5.0), 18.0, DeadlineDistribution::constant(1.0)),
              2.7509245422006574, 1e-11);
  for (const char* spec : {"const:1", "unif:0.3:1.7", "exp:0.5", "const:0.2"}) {
    const auto d = DeadlineDistribution::parse(spec);
    const ClusterConfig c(5, 1.3);
    for (double frac : {0.05, 0.3, 0.7, 0.95}) {
      const double l = frac * c.capacity();
      const double h = 1e-5 * c.capacity();
      const double fd = (miss_rate(c, l + h, d) - miss_rate(c, l - h, d)) / (2 * h);
      EXPECT_NEAR(miss_rate_derivative(c, l, d), fd, 1e-7 * std::max(1.0, fd)) << spec << ' ' << frac;
    }
  }
}

TEST(MissRate, MarginalIsIncreasing) {
  for (const char* spec : {"const:1", "unif:0.3:1.7", "exp:1", "const:3"}) {
    for (const auto& c : {ClusterConfig(1, 1.0), ClusterConfig(4, 5.0), ClusterConfig(8, 3.0)}) {
      EXPECT_EQ(check_marginal_monotone(c, DeadlineDistribution::parse(spec), 1000), "") << spec;
    }
  }
}

TEST(MissRate, InverseMarginal) {
  const ClusterConfig c(4, 5.0);
  const auto d = DeadlineDistribution::constant(1.0);
  for (double l : {0.5, 5.0, 12.0, 19.0}) {
    const double a = miss_rate_derivative(c, l, d);
    EXPECT_NEAR(inverse_marginal(c, a, d), l, 1e-9 * c.capacity());
  }
  EXPECT_DOUBLE_EQ(inverse_marginal(c, 0.5 * marginal_floor(c, d), d), 0.0);
}

TEST(OptimalSplit, KktOnRandomInstances) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> pools(1, 10), count(2, 4), family(0, 2);
  std::uniform_real_distribution<double> rate(0.3, 6.0), load(0.1, 0.98), cost(1.0, 30.0), tdist(0.2, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ClusterConfig> cl;
    for (int k = count(rng); k > 0; --k) cl.emplace_back(pools(rng), rate(rng));
    DeadlineDistribution d = DeadlineDistribution::constant(tdist(rng));
    switch (trial % 3) {
      case 1: {
        const double a = tdist(rng);
        d = DeadlineDistribution::uniform(0.1 * a, 1.9 * a);
        break;
      }
      case 2: d = DeadlineDistribution::exponential(1.0 / tdist(rng)); break;
      default: break;
    }
    const double R = trial % 5 == 4 ? kInfiniteRejectionCost : cost(rng);
    const auto config = SystemConfig::at_load(load(rng), R, cl, d);
    const auto sol = solve_optimal_bs(config);
    EXPECT_LT(sol.certificate.max_residual(), 1e-8) << "trial " << trial << ' ' << d.to_string();
    EXPECT_NEAR(sol.split.total(), config.arrival_rate(), 1e-9 * config.arrival_rate());
    for (std::size_t k = 0; k < cl.size(); ++k) {
      EXPECT_GE(sol.split.routed[k], 0.0);
      EXPECT_LE(sol.split.routed[k], cl[k].capacity());
      if (sol.certificate.status[k] != QueueStatus::Saturated) {
        EXPECT_LT(sol.split.routed[k], cl[k].capacity());
      }
    }
    if (std::isinf(R)) {
      EXPECT_EQ(sol.split.rejected, 0.0);
    }
  }
}

TEST(OptimalSplit, MatchesGridSearch) {
  const std::vector<ClusterConfig> cl = {ClusterConfig(2, 1.0), ClusterConfig(1, 1.5)};
  for (const char* spec : {"const:1", "unif:0.3:1.7", "exp:1"}) {
    for (double R : {1.2, 3.0}) {
      const SystemConfig config(2.8, R, cl, DeadlineDistribution::parse(spec));
      const auto sol = solve_optimal_bs(config);
      const double opt = bs_objective(config, sol.split);
      const double grid = grid_search(config);
      EXPECT_NEAR(opt, grid, 1e-5) << spec << " R=" << R;
      EXPECT_LE(opt, grid + 1e-12) << spec << " R=" << R;
    }
  }
}

TEST(OptimalSplit, UnitRejectionCostIsInterior) {
  const auto sol = solve_optimal_bs(base_instance(0.9, 1.0));
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(sol.certificate.status[k], QueueStatus::Interior);
    EXPECT_GT(sol.split.routed[k], 0.0);
    EXPECT_LT(sol.split.routed[k], sol.split.total());
  }
}

TEST(OptimalSplit, LoadCases) {
  const auto d = DeadlineDistribution::constant(1.0);
  // light: the slow pool is not worth using yet
  const SystemConfig lightly(2.0, 50.0, {ClusterConfig(4, 5.0), ClusterConfig(1, 0.2)}, d);
  const auto light = solve_optimal_bs(lightly);
  EXPECT_EQ(light.certificate.load_case, LoadCase::Light);
  EXPECT_EQ(light.certificate.status[1], QueueStatus::Zero);
  EXPECT_EQ(light.split.routed[1], 0.0);
  EXPECT_LT(light.certificate.max_residual(), 1e-9);

  const auto medium = solve_optimal_bs(base_instance(0.9, 5.0));
  EXPECT_EQ(medium.certificate.load_case, LoadCase::Medium);
  EXPECT_LT(medium.certificate.max_residual(), 1e-12);

  // heavy: the single slow server has the lowest ceiling 1 + mu t and saturates
  const SystemConfig heavily(0.98 * 24.1, kInfiniteRejectionCost, {ClusterConfig(8, 3.0), ClusterConfig(1, 0.1)}, d);
  const auto heavy = solve_optimal_bs(heavily);
  EXPECT_EQ(heavy.certificate.load_case, LoadCase::Heavy);
  EXPECT_EQ(heavy.certificate.status[1], QueueStatus::Saturated);
  EXPECT_NEAR(heavy.split.routed[1], 0.1, 1e-12);
  EXPECT_LT(heavy.certificate.max_residual(), 1e-8);
}

TEST(OptimalSplit, CheapRejectionRejectsEverything) {
  const auto config = base_instance(0.5, 1e-3);
  const auto sol = solve_optimal_bs(config);
  EXPECT_NEAR(sol.split.rejected, config.arrival_rate(), 1e-12);
  EXPECT_DOUBLE_EQ(sol.certificate.multiplier, 1e-3);
}

TEST(OptimalSplit, IdenticalClustersSplitEvenly) {
  const SystemConfig config(10.0, kInfiniteRejectionCost, {ClusterConfig(3, 2.0), ClusterConfig(3, 2.0)},
                            DeadlineDistribution::uniform(0.3, 1.7));
  const auto sol = solve_optimal_bs(config);
  EXPECT_NEAR(sol.split.routed[0], 5.0, 1e-9);
  EXPECT_NEAR(sol.split.routed[1], 5.0, 1e-9);
}

TEST(OptimalSplit, EvaluateSplit) {
  const auto config = base_instance(0.7, 4.0);
  const auto sol = solve_optimal_bs(config);
  const auto perf = evaluate_split(config, sol.split);
  EXPECT_NEAR(perf.cost_rate, bs_objective(config, sol.split), 1e-14);
  EXPECT_NEAR(perf.rejection_ratio * 4.0 + perf.miss_ratio, perf.cost_rate / config.arrival_rate(), 1e-14);
}

TEST(OptimalSplit, CertificateDetectsBadSplits) {
  const auto config = base_instance(0.8, 5.0);
  const auto sol = solve_optimal_bs(config);
  BernoulliSplit bad = sol.split;
  bad.routed[0] += 0.5;
  bad.routed[1] -= 0.5;
  EXPECT_GT(certify_split(config, bad, sol.certificate.multiplier).max_residual(), 1e-4);
}
