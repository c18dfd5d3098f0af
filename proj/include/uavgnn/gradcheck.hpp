#pragma once

// Reverse-mode gradients checked against central finite differences.
//
// A coordinate is reported as a kink when any ReLU node of the trace switches
// between active and inactive across x - eps, x, x + eps; the difference
// quotient straddles a non-differentiable point there and is excluded from
// the error statistic. Node ids line up between evaluations because the
// recorded graph does not depend on the values.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "uavgnn/autodiff.hpp"
#include "uavgnn/gnn.hpp"
#include "uavgnn/graph.hpp"
#include "uavgnn/physics.hpp"
#include "uavgnn/scenario.hpp"

namespace uavgnn {

/// A traced scalar function of the given leaves.
using TracedFn = std::function<Var(std::span<const Var>)>;

struct CoordinateCheck {
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
  bool kink = false;
};

struct FiniteDiffResult {
  std::vector<CoordinateCheck> coords;
  double max_rel_error = 0.0;  // over non-kink coordinates
  std::size_t kinks = 0;
};

namespace detail {

inline std::vector<bool> relu_pattern(const ad::Trace& t) {
  std::vector<bool> p;
  for (std::uint32_t id = 0; id < t.size(); ++id) {
    if (t.op(id) == ad::Op::max0) p.push_back(t.value(id) > 0.0);
  }
  return p;
}

/// Evaluates f at x on a cleared trace; returns the value and the ReLU pattern.
inline double eval_traced(ad::Trace& t, const TracedFn& f, std::span<const double> x, std::vector<bool>& pattern) {
  t.clear();
  std::vector<Var> leaves;
  leaves.reserve(x.size());
  for (double v : x) leaves.push_back(t.leaf(v));
  const double value = f(leaves).value;
  pattern = relu_pattern(t);
  return value;
}

/// Analytic gradient of f at x plus the base ReLU pattern.
inline std::vector<double> analytic_gradient(ad::Trace& t, const TracedFn& f, std::span<const double> x,
                                             std::vector<bool>& pattern) {
  t.clear();
  std::vector<Var> leaves;
  leaves.reserve(x.size());
  for (double v : x) leaves.push_back(t.leaf(v));
  const Var y = f(leaves);
  pattern = relu_pattern(t);
  const auto g = t.backward(y);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = g[leaves[i]];
  return out;
}

/// One central-difference probe of coordinate i; `work` equals x on entry and exit.
inline CoordinateCheck probe(ad::Trace& t, const TracedFn& f, std::vector<double>& work, std::size_t i,
                             double analytic, double eps, const std::vector<bool>& base_pattern, double floor) {
  CoordinateCheck c;
  c.index = i;
  c.analytic = analytic;
  const double xi = work[i];
  std::vector<bool> plus, minus;
  work[i] = xi + eps;
  const double up = eval_traced(t, f, work, plus);
  work[i] = xi - eps;
  const double down = eval_traced(t, f, work, minus);
  work[i] = xi;
  c.numeric = (up - down) / (2.0 * eps);
  c.kink = plus != base_pattern || minus != base_pattern;
  c.rel_error = std::abs(c.analytic - c.numeric) / std::max({std::abs(c.analytic), std::abs(c.numeric), floor});
  return c;
}

}  // namespace detail

/// Central differences with step `eps` on the listed coordinates (all when
/// empty); relative error uses max(|analytic|, |numeric|, floor).
inline FiniteDiffResult finite_diff_check(const TracedFn& f, std::span<const double> x, double eps,
                                          std::vector<std::size_t> coords = {}, double floor = 1e-8) {
  if (!(eps > 0.0)) throw ConfigError("finite_diff_check: eps must be > 0");
  if (coords.empty()) {
    coords.resize(x.size());
    std::iota(coords.begin(), coords.end(), 0);
  }
  ad::Trace t;
  std::vector<bool> base;
  const auto grad = detail::analytic_gradient(t, f, x, base);
  std::vector<double> work(x.begin(), x.end());
  FiniteDiffResult r;
  for (auto i : coords) {
    if (i >= x.size()) throw DimensionError("finite_diff_check: coordinate out of range");
    const auto c = detail::probe(t, f, work, i, grad[i], eps, base, floor);
    if (c.kink) {
      ++r.kinks;
    } else {
      r.max_rel_error = std::max(r.max_rel_error, c.rel_error);
    }
    r.coords.push_back(c);
  }
  return r;
}

// ---- GNN loss check -------------------------------------------------------

struct GradCheckConfig {
  std::size_t n_params = 1000;   // checked (non-kink) samples, total across scenarios
  std::size_t n_scenarios = 5;
  double tolerance = 1e-4;
  double step = 1e-3;            // scaled by max(1, |theta|); smaller steps drown in roundoff
  double denom_floor = 1e-8;
  double alpha = 10.0;
  std::uint64_t seed = 7;

  void validate() const {
    if (n_params == 0 || n_scenarios == 0) throw ConfigError("gradcheck: counts must be >= 1");
    if (!(tolerance > 0.0)) throw ConfigError("gradcheck.tolerance must be > 0");
    if (!(step > 0.0)) throw ConfigError("gradcheck.step must be > 0");
    if (!(denom_floor > 0.0)) throw ConfigError("gradcheck.denom_floor must be > 0");
    if (!(alpha >= 0.0)) throw ConfigError("gradcheck.alpha must be >= 0");
  }
};

struct GradSample {
  std::size_t scenario = 0;
  std::size_t block = 0;
  CoordinateCheck check;
};

struct BlockSummary {
  std::string name;
  std::size_t checked = 0;
  std::size_t excluded = 0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradSample> samples;
  std::vector<BlockSummary> blocks;  // only blocks that received samples
  std::size_t checked = 0;
  std::size_t excluded = 0;
  double max_rel_error = 0.0;
  double tolerance = 0.0;

  bool passed() const noexcept { return checked > 0 && max_rel_error < tolerance; }
};

/// Attempts per requested sample before a scenario is declared kink-bound.
inline constexpr std::size_t kMaxAttemptsPerSample = 10;

/// Penalized loss of scenario `s` through the GNN as a function of the flat parameters.
inline TracedFn gnn_loss_fn(const Scenario& s, const InterferenceGraph& g, const ParamLayout& layout,
                            const Region& region, double alpha) {
  return [&s, &g, &layout, region, alpha](std::span<const Var> leaves) {
    const ParamView<Var> view(leaves, layout);
    return penalized_loss(s, forward(g, view, s.constants, region), alpha);
  };
}

/// Draws parameters until `cfg.n_params` non-kink samples are checked, spread
/// evenly over the first `cfg.n_scenarios` items of `ds`.
inline GradCheckReport gradient_check(const GnnParams& params, const Dataset& ds, const GradCheckConfig& cfg) {
  cfg.validate();
  if (ds.items.size() < cfg.n_scenarios) throw ConfigError("gradcheck: dataset has fewer scenarios than requested");
  const Region region{{0.0, 0.0}, ds.meta.area_half};
  const auto& layout = params.layout;

  GradCheckReport rep;
  rep.tolerance = cfg.tolerance;
  std::vector<BlockSummary> per_block(layout.blocks().size());
  for (std::size_t b = 0; b < per_block.size(); ++b) per_block[b].name = layout.block(b).name;

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, layout.total() - 1);
  ad::Trace trace;
  std::vector<double> work = params.values;
  std::vector<bool> base;

  for (std::size_t si = 0; si < cfg.n_scenarios; ++si) {
    const auto& s = ds.items[si];
    const auto g = build_graph(s, ds.meta.n_uav, region);
    const auto f = gnn_loss_fn(s, g, layout, region, cfg.alpha);
    const auto analytic = detail::analytic_gradient(trace, f, params.values, base);

    const std::size_t quota = cfg.n_params / cfg.n_scenarios + (si < cfg.n_params % cfg.n_scenarios ? 1 : 0);
    std::size_t done = 0;
    for (std::size_t attempt = 0; done < quota; ++attempt) {
      if (attempt == kMaxAttemptsPerSample * quota) {
        throw NumericError("gradcheck: too many kink exclusions on scenario " + std::to_string(si));
      }
      const auto i = pick(rng);
      const double eps = cfg.step * std::max(1.0, std::abs(work[i]));
      GradSample smp{si, layout.block_of(i), detail::probe(trace, f, work, i, analytic[i], eps, base, cfg.denom_floor)};
      auto& bs = per_block[smp.block];
      if (smp.check.kink) {
        ++bs.excluded;
        ++rep.excluded;
      } else {
        ++done;
        ++bs.checked;
        ++rep.checked;
        bs.max_rel_error = std::max(bs.max_rel_error, smp.check.rel_error);
        rep.max_rel_error = std::max(rep.max_rel_error, smp.check.rel_error);
      }
      rep.samples.push_back(smp);
    }
  }
  for (auto& b : per_block) {
    if (b.checked + b.excluded > 0) rep.blocks.push_back(std::move(b));
  }
  return rep;
}

}  // namespace uavgnn
