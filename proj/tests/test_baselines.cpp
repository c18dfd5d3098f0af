#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "test_util.hpp"
#include "uavgnn/baselines.hpp"

using namespace uavgnn;
using namespace uavgnn::testing;

namespace {

const Region kRegion{{0.0, 0.0}, 50.0};

Dataset tiny(std::size_t n, std::uint64_t seed, std::size_t n_uav, std::size_t n_du, std::size_t n_d2d) {
  GenConfig g;
  g.n_samples = n;
  g.seed = seed;
  g.n_uav = n_uav;
  g.n_du = n_du;
  g.n_d2d = n_d2d;
  return generate(g);
}

void expect_within_caps(const Scenario& s, const Decisions<double>& d) {
  for (const auto& p : d.uav_xy) EXPECT_TRUE(kRegion.contains(p, 1e-9));
  for (double p : d.p_uav) {
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, s.constants.p_max_uav);
  }
  for (double p : d.p_d2d) {
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, s.constants.p_max_d2d);
  }
}

}  // namespace

TEST(Ao, ObjectiveTraceNeverDecreases) {
  for (const auto& s : small_dataset(5, 40).items) {
    const auto r = alternating_optimization(s, 4, kRegion, AoConfig{}, 10.0);
    ASSERT_FALSE(r.objective_trace.empty());
    for (std::size_t i = 1; i < r.objective_trace.size(); ++i) {
      EXPECT_GE(r.objective_trace[i], r.objective_trace[i - 1] - 1e-12);
    }
    EXPECT_EQ(r.objective, r.objective_trace.back());
  }
}

TEST(Ao, SingleLinkConvergesAboveTheUser) {
  for (const auto& s : tiny(5, 41, 1, 1, 0).items) {
    const auto r = alternating_optimization(s, 1, kRegion, AoConfig{}, 10.0);
    EXPECT_LE(distance(r.decisions.uav_xy[0], s.du_xy[0]), 5.0);
    EXPECT_GT(r.decisions.p_uav[0], 0.85);
  }
}

TEST(Oracle, SingleLinkPicksNearestGridPointAtTopPower) {
  const GridConfig gc{11, 4};
  for (const auto& s : tiny(5, 42, 1, 1, 0).items) {
    const auto r = grid_oracle(s, 1, kRegion, gc, 10.0);
    double best = std::numeric_limits<double>::infinity();
    Vec2 nearest{};
    for (int i = 0; i < 11; ++i) {
      for (int j = 0; j < 11; ++j) {
        const Vec2 p{-50.0 + 10.0 * i, -50.0 + 10.0 * j};
        if (distance(p, s.du_xy[0]) < best) {
          best = distance(p, s.du_xy[0]);
          nearest = p;
        }
      }
    }
    EXPECT_NEAR(r.decisions.uav_xy[0].x, nearest.x, 1e-9);
    EXPECT_NEAR(r.decisions.uav_xy[0].y, nearest.y, 1e-9);
    EXPECT_EQ(r.decisions.p_uav[0], 1.0);
  }
}

TEST(Oracle, RefinedGridNeverLoses) {
  for (const auto& s : tiny(4, 43, 1, 2, 1).items) {
    const auto coarse = grid_oracle(s, 1, kRegion, GridConfig{11, 4}, 10.0);
    const auto fine = grid_oracle(s, 1, kRegion, GridConfig{21, 8}, 10.0);
    EXPECT_GE(fine.objective, coarse.objective - 1e-12);
  }
}

TEST(Oracle, BoundsAoUpToQuantization) {
  for (const auto& s : tiny(5, 44, 1, 2, 1).items) {
    const auto ao = alternating_optimization(s, 1, kRegion, AoConfig{}, 10.0);
    const auto oracle = grid_oracle(s, 1, kRegion, GridConfig{21, 8}, 10.0);
    EXPECT_GE(oracle.objective, ao.objective - 0.05 * std::abs(ao.objective));
  }
}

TEST(Oracle, RefusesOversizedEnumeration) {
  const auto s = small_dataset(1, 1).items[0];
  EXPECT_GT(oracle_combinations(4, 6, GridConfig{}), kOracleCombinationCap);
  EXPECT_THROW(grid_oracle(s, 4, kRegion, GridConfig{}, 10.0), ConfigError);
  EXPECT_THROW(grid_oracle(s, 1, kRegion, GridConfig{1, 8}, 10.0), ConfigError);
}

TEST(Random, SeededAndPowerOnly) {
  const auto s = small_dataset(1, 45).items[0];
  const auto a = random_deployment(s, 4, kRegion, 7, AoConfig{}, 10.0);
  const auto b = random_deployment(s, 4, kRegion, 7, AoConfig{}, 10.0);
  const auto c = random_deployment(s, 4, kRegion, 8, AoConfig{}, 10.0);
  EXPECT_EQ(a.decisions.uav_xy, b.decisions.uav_xy);
  EXPECT_EQ(a.decisions.p_uav, b.decisions.p_uav);
  EXPECT_NE(a.decisions.uav_xy, c.decisions.uav_xy);
  // Positions stay where they were drawn.
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (std::size_t n = 0; n < 4; ++n) {
    const double x = u(rng), y = u(rng);
    EXPECT_EQ(a.decisions.uav_xy[n].x, x);
    EXPECT_EQ(a.decisions.uav_xy[n].y, y);
  }
}

TEST(FixedPower, PowersSitAtCaps) {
  for (const auto& s : small_dataset(3, 46).items) {
    const auto r = fixed_power(s, 4, kRegion, AoConfig{}, 10.0);
    for (double p : r.decisions.p_uav) EXPECT_EQ(p, s.constants.p_max_uav);
    for (double p : r.decisions.p_d2d) EXPECT_EQ(p, s.constants.p_max_d2d);
  }
}

TEST(Baselines, ReportedObjectiveMatchesPhysicsAndCaps) {
  for (const auto& s : small_dataset(3, 47).items) {
    const std::vector<BaselineResult> rs{
        alternating_optimization(s, 4, kRegion, AoConfig{}, 10.0),
        random_deployment(s, 4, kRegion, 3, AoConfig{}, 10.0),
        fixed_power(s, 4, kRegion, AoConfig{}, 10.0),
    };
    for (const auto& r : rs) {
      EXPECT_EQ(r.objective, -penalized_loss(s, r.decisions, 10.0));
      expect_within_caps(s, r.decisions);
    }
  }
  for (const auto& s : tiny(2, 48, 1, 2, 1).items) {
    const auto r = grid_oracle(s, 1, kRegion, GridConfig{11, 4}, 10.0);
    EXPECT_EQ(r.objective, -penalized_loss(s, r.decisions, 10.0));
    expect_within_caps(s, r.decisions);
  }
}

TEST(Baselines, ConfigValidation) {
  const auto s = small_dataset(1, 1).items[0];
  AoConfig bad;
  bad.outer_iters = 0;
  EXPECT_THROW(alternating_optimization(s, 4, kRegion, bad, 10.0), ConfigError);
  bad = {};
  bad.step_size_pos = -1.0;
  EXPECT_THROW(fixed_power(s, 4, kRegion, bad, 10.0), ConfigError);
}
