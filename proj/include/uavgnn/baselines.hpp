#pragma once

// Comparison schemes: alternating optimization (AO), random deployment,
// fixed power, and an exhaustive grid oracle for tiny instances.
//
// AO is block projected-gradient ascent on J = -penalized_loss. Positions are
// projected onto the deployment square; powers are cap * sigmoid(logit), so
// the logit block is unconstrained. Each block step moves along the
// normalized gradient and backtracks until J does not decrease, which makes
// the recorded objective sequence non-decreasing.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "uavgnn/autodiff.hpp"
#include "uavgnn/error.hpp"
#include "uavgnn/graph.hpp"
#include "uavgnn/physics.hpp"

namespace uavgnn {

struct AoConfig {
  std::size_t outer_iters = 60;
  std::size_t inner_steps = 8;
  double step_size_pos = 5.0;    // m
  double step_size_logit = 1.0;
  double tolerance = 1e-7;       // stop when an outer round gains less than this

  void validate() const {
    if (outer_iters == 0 || inner_steps == 0) throw ConfigError("ao: iteration counts must be >= 1");
    if (!(step_size_pos > 0.0) || !(step_size_logit > 0.0)) throw ConfigError("ao: step sizes must be > 0");
    if (!(tolerance > 0.0)) throw ConfigError("ao: tolerance must be > 0");
  }
};

struct GridConfig {
  std::size_t pos_resolution = 21;
  std::size_t power_levels = 8;

  void validate() const {
    if (pos_resolution < 2 || power_levels < 2) throw ConfigError("grid: resolution and levels must be >= 2");
  }
};

inline constexpr double kOracleCombinationCap = 1e7;

struct BaselineResult {
  Decisions<double> decisions;
  double objective = 0.0;                 // -penalized_loss of `decisions`
  std::vector<double> objective_trace;    // AO only: value after every accepted block step
};

namespace detail {

inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// AO state: positions, power logits, and which blocks are free.
class AoProblem {
public:
  AoProblem(const Scenario& s, const Region& region, double alpha, bool powers_free)
      : s_(&s), region_(region), alpha_(alpha), powers_free_(powers_free) {}

  std::vector<Vec2> xy;
  std::vector<double> logit_uav;
  std::vector<double> logit_d2d;

  Decisions<double> decisions() const {
    Decisions<double> d;
    d.uav_xy = xy;
    const auto& c = s_->constants;
    for (double l : logit_uav) d.p_uav.push_back(powers_free_ ? c.p_max_uav * sigmoid(l) : c.p_max_uav);
    for (double l : logit_d2d) d.p_d2d.push_back(powers_free_ ? c.p_max_d2d * sigmoid(l) : c.p_max_d2d);
    return d;
  }

  double objective() const { return -penalized_loss(*s_, decisions(), alpha_); }

  /// Gradient of J with respect to the position block (pos = true) or the logit block.
  std::vector<double> gradient(bool pos) const {
    ad::Trace t;
    const auto& c = s_->constants;
    Decisions<Var> d;
    std::vector<Var> free;
    for (const auto& p : xy) {
      const Var x = t.leaf(p.x), y = t.leaf(p.y);
      d.uav_xy.push_back({x, y});
      if (pos) free.insert(free.end(), {x, y});
    }
    auto power = [&](double l, double cap) {
      if (!powers_free_) return t.constant(cap);
      const Var v = t.leaf(l);
      if (!pos) free.push_back(v);
      return cap * ad::sigmoid(v);
    };
    for (double l : logit_uav) d.p_uav.push_back(power(l, c.p_max_uav));
    for (double l : logit_d2d) d.p_d2d.push_back(power(l, c.p_max_d2d));
    const Var j = -penalized_loss(*s_, d, alpha_);
    const auto g = t.backward(j);
    std::vector<double> out;
    for (const auto& v : free) out.push_back(g[v]);
    return out;
  }

  std::vector<double> get(bool pos) const {
    std::vector<double> v;
    if (pos) {
      for (const auto& p : xy) v.insert(v.end(), {p.x, p.y});
    } else {
      v = logit_uav;
      v.insert(v.end(), logit_d2d.begin(), logit_d2d.end());
    }
    return v;
  }

  void set(bool pos, const std::vector<double>& v) {
    if (pos) {
      for (std::size_t n = 0; n < xy.size(); ++n) {
        xy[n] = {std::clamp(v[2 * n], region_.center.x - region_.half, region_.center.x + region_.half),
                 std::clamp(v[2 * n + 1], region_.center.y - region_.half, region_.center.y + region_.half)};
      }
    } else {
      std::copy(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(logit_uav.size()), logit_uav.begin());
      std::copy(v.begin() + static_cast<std::ptrdiff_t>(logit_uav.size()), v.end(), logit_d2d.begin());
    }
  }

  bool powers_free() const noexcept { return powers_free_; }

private:
  const Scenario* s_;
  Region region_;
  double alpha_;
  bool powers_free_;
};

/// Up to `steps` normalized-gradient steps on one block with backtracking.
/// Only improving (non-decreasing) moves are accepted.
inline void block_ascent(AoProblem& prob, bool pos, std::size_t steps, double& step,
                         double& current, std::vector<double>& trace) {
  for (std::size_t s = 0; s < steps; ++s) {
    const auto g = prob.gradient(pos);
    double norm = 0.0;
    for (double v : g) norm += v * v;
    norm = std::sqrt(norm);
    if (!std::isfinite(norm)) throw NumericError("ao: non-finite gradient");
    if (norm == 0.0) return;
    const auto x0 = prob.get(pos);
    bool accepted = false;
    for (int tries = 0; tries < 40 && !accepted; ++tries) {
      auto x = x0;
      for (std::size_t i = 0; i < x.size(); ++i) x[i] += step * g[i] / norm;
      prob.set(pos, x);
      const double j = prob.objective();
      if (!std::isfinite(j)) throw NumericError("ao: non-finite objective");
      if (j >= current) {
        // A step the projection maps back onto x0 makes no progress.
        if (prob.get(pos) == x0) return;
        accepted = true;
        current = j;
        trace.push_back(j);
        step *= 1.5;
      } else {
        step *= 0.5;
      }
    }
    if (!accepted) {
      prob.set(pos, x0);
      return;
    }
  }
}

inline BaselineResult run_ao(AoProblem& prob, const AoConfig& cfg, bool optimize_pos, bool optimize_pow) {
  BaselineResult r;
  double current = prob.objective();
  if (!std::isfinite(current)) throw NumericError("ao: non-finite initial objective");
  r.objective_trace.push_back(current);
  double pos_step = cfg.step_size_pos;
  double pow_step = cfg.step_size_logit;
  for (std::size_t it = 0; it < cfg.outer_iters; ++it) {
    const double before = current;
    if (optimize_pos) block_ascent(prob, true, cfg.inner_steps, pos_step, current, r.objective_trace);
    if (optimize_pow && prob.powers_free()) {
      block_ascent(prob, false, cfg.inner_steps, pow_step, current, r.objective_trace);
    }
    // Keep steps from collapsing to zero between rounds.
    pos_step = std::max(pos_step, cfg.step_size_pos * 1e-4);
    pow_step = std::max(pow_step, cfg.step_size_logit * 1e-4);
    if (current - before < cfg.tolerance) break;
  }
  r.decisions = prob.decisions();
  r.objective = current;
  return r;
}

inline constexpr double kInitialLogit = 2.0;

}  // namespace detail

/// Alternating position / power-logit ascent starting from the default reference deployment.
inline BaselineResult alternating_optimization(const Scenario& s, std::size_t n_uav, const Region& region,
                                               const AoConfig& cfg, double alpha) {
  cfg.validate();
  detail::AoProblem prob(s, region, alpha, true);
  prob.xy = default_init(s, n_uav, region).uav_xy;
  for (auto& p : prob.xy) {
    p.x = std::clamp(p.x, region.center.x - region.half, region.center.x + region.half);
    p.y = std::clamp(p.y, region.center.y - region.half, region.center.y + region.half);
  }
  prob.logit_uav.assign(n_uav, detail::kInitialLogit);
  prob.logit_d2d.assign(s.n_d2d(), detail::kInitialLogit);
  return detail::run_ao(prob, cfg, true, true);
}

/// UAVs uniform over the region, then the power-only loop with positions frozen.
inline BaselineResult random_deployment(const Scenario& s, std::size_t n_uav, const Region& region,
                                        std::uint64_t seed, const AoConfig& cfg, double alpha) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(region.center.x - region.half, region.center.x + region.half);
  std::uniform_real_distribution<double> uy(region.center.y - region.half, region.center.y + region.half);
  detail::AoProblem prob(s, region, alpha, true);
  for (std::size_t n = 0; n < n_uav; ++n) {
    const double x = ux(rng);
    prob.xy.push_back({x, uy(rng)});
  }
  prob.logit_uav.assign(n_uav, detail::kInitialLogit);
  prob.logit_d2d.assign(s.n_d2d(), detail::kInitialLogit);
  return detail::run_ao(prob, cfg, false, true);
}

/// Every power at its cap; positions from the position-only loop.
inline BaselineResult fixed_power(const Scenario& s, std::size_t n_uav, const Region& region,
                                  const AoConfig& cfg, double alpha) {
  cfg.validate();
  detail::AoProblem prob(s, region, alpha, false);
  prob.xy = default_init(s, n_uav, region).uav_xy;
  for (auto& p : prob.xy) {
    p.x = std::clamp(p.x, region.center.x - region.half, region.center.x + region.half);
    p.y = std::clamp(p.y, region.center.y - region.half, region.center.y + region.half);
  }
  prob.logit_uav.assign(n_uav, 0.0);
  prob.logit_d2d.assign(s.n_d2d(), 0.0);
  return detail::run_ao(prob, cfg, true, false);
}

inline double oracle_combinations(std::size_t n_uav, std::size_t n_d2d, const GridConfig& cfg) {
  return std::pow(static_cast<double>(cfg.pos_resolution), 2.0 * static_cast<double>(n_uav)) *
         std::pow(static_cast<double>(cfg.power_levels), static_cast<double>(n_uav + n_d2d));
}

/// Exhaustive argmax of -penalized_loss over a position grid (pos_resolution
/// points per axis spanning the region) and power levels cap * l / L, l = 1..L.
inline BaselineResult grid_oracle(const Scenario& s, std::size_t n_uav, const Region& region,
                                  const GridConfig& cfg, double alpha) {
  cfg.validate();
  const auto M = s.n_d2d();
  if (oracle_combinations(n_uav, M, cfg) > kOracleCombinationCap) {
    throw ConfigError("grid_oracle: " + std::to_string(oracle_combinations(n_uav, M, cfg)) +
                      " combinations exceed the enumeration cap of 1e7");
  }
  const auto R = cfg.pos_resolution;
  const auto L = cfg.power_levels;
  auto axis = [&](std::size_t i, double c) {
    return c - region.half + 2.0 * region.half * static_cast<double>(i) / static_cast<double>(R - 1);
  };
  const auto& c = s.constants;

  std::vector<std::size_t> pos_idx(n_uav, 0);     // each in [0, R*R)
  std::vector<std::size_t> pow_idx(n_uav + M, 0);  // each in [0, L)
  Decisions<double> d;
  d.uav_xy.resize(n_uav);
  d.p_uav.resize(n_uav);
  d.p_d2d.resize(M);

  auto advance = [](std::vector<std::size_t>& idx, std::size_t base) {
    for (auto& i : idx) {
      if (++i < base) return true;
      i = 0;
    }
    return false;
  };

  BaselineResult best;
  best.objective = -std::numeric_limits<double>::infinity();
  do {
    for (std::size_t n = 0; n < n_uav; ++n) {
      d.uav_xy[n] = {axis(pos_idx[n] % R, region.center.x), axis(pos_idx[n] / R, region.center.y)};
    }
    std::fill(pow_idx.begin(), pow_idx.end(), 0);
    do {
      for (std::size_t n = 0; n < n_uav; ++n) {
        d.p_uav[n] = c.p_max_uav * static_cast<double>(pow_idx[n] + 1) / static_cast<double>(L);
      }
      for (std::size_t m = 0; m < M; ++m) {
        d.p_d2d[m] = c.p_max_d2d * static_cast<double>(pow_idx[n_uav + m] + 1) / static_cast<double>(L);
      }
      const double j = -penalized_loss(s, d, alpha);
      if (j > best.objective) {
        best.objective = j;
        best.decisions = d;
      }
    } while (advance(pow_idx, L));
  } while (advance(pos_idx, R * R));
  return best;
}

}  // namespace uavgnn
