#pragma once

// Unsupervised training of the GNN on the penalized loss, and evaluation.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "uavgnn/autodiff.hpp"
#include "uavgnn/error.hpp"
#include "uavgnn/gnn.hpp"
#include "uavgnn/graph.hpp"
#include "uavgnn/physics.hpp"
#include "uavgnn/scenario.hpp"

namespace uavgnn {

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  double alpha = 10.0;
  std::size_t iters = 500;
  std::size_t batch = 16;
  std::uint64_t seed = 1;
  std::size_t eval_every = 10;
  std::vector<std::size_t> widths = kDefaultWidths;

  void validate() const {
    if (!(lr > 0.0)) throw ConfigError("train.lr must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("train.beta1 must be in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("train.beta2 must be in [0, 1)");
    if (!(eps_adam > 0.0)) throw ConfigError("train.eps_adam must be > 0");
    if (!(alpha >= 0.0)) throw ConfigError("train.alpha must be >= 0");
    if (batch == 0) throw ConfigError("train.batch must be >= 1");
    if (eval_every == 0) throw ConfigError("train.eval_every must be >= 1");
    if (widths.empty()) throw ConfigError("train.widths must list at least one layer");
  }
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t t = 0;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// Bias-corrected Adam update in place. A non-finite gradient aborts the step
/// before anything is modified.
inline void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
                      const TrainConfig& cfg, const ParamLayout* layout = nullptr) {
  if (params.size() != grads.size() || state.m.size() != params.size()) {
    throw DimensionError("adam_step: parameter/gradient/state size mismatch");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      const std::string where = layout ? layout->block(layout->block_of(i)).name
                                       : "index " + std::to_string(i);
      throw NumericError("non-finite gradient in parameter block '" + where + "'");
    }
  }
  ++state.t;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps_adam);
  }
}

// ---- metrics --------------------------------------------------------------

struct ScenarioMetrics {
  double du_sum_rate = 0.0;
  double loss = 0.0;
  std::vector<double> d2d_rates;
  std::size_t violations = 0;
  double min_d2d_rate = 0.0;  // +inf when there are no D2D pairs

  bool qos_satisfied() const noexcept { return violations == 0; }
};

inline ScenarioMetrics scenario_metrics(const Scenario& s, const Decisions<double>& d, double alpha) {
  ScenarioMetrics m;
  m.du_sum_rate = du_sum_rate(s, d);
  m.loss = penalized_loss(s, d, alpha);
  m.d2d_rates = d2d_rates(s, d);
  m.min_d2d_rate = m.d2d_rates.empty() ? std::numeric_limits<double>::infinity()
                                       : *std::min_element(m.d2d_rates.begin(), m.d2d_rates.end());
  for (double r : m.d2d_rates) m.violations += r < s.constants.r_min ? 1 : 0;
  return m;
}

struct EvalResult {
  std::vector<ScenarioMetrics> per_scenario;
  double mean_sum_rate = 0.0;
  double std_sum_rate = 0.0;
  double mean_loss = 0.0;
  double mean_violations = 0.0;
  double qos_fraction = 0.0;  // share of scenarios with every D2D rate >= R_min
};

inline EvalResult aggregate(std::vector<ScenarioMetrics> per) {
  EvalResult r;
  r.per_scenario = std::move(per);
  const auto n = static_cast<double>(r.per_scenario.size());
  if (r.per_scenario.empty()) return r;
  for (const auto& m : r.per_scenario) {
    r.mean_sum_rate += m.du_sum_rate;
    r.mean_loss += m.loss;
    r.mean_violations += static_cast<double>(m.violations);
    r.qos_fraction += m.qos_satisfied() ? 1.0 : 0.0;
  }
  r.mean_sum_rate /= n;
  r.mean_loss /= n;
  r.mean_violations /= n;
  r.qos_fraction /= n;
  double ss = 0.0;
  for (const auto& m : r.per_scenario) ss += (m.du_sum_rate - r.mean_sum_rate) * (m.du_sum_rate - r.mean_sum_rate);
  r.std_sum_rate = std::sqrt(ss / n);
  return r;
}

inline Region region_of(const Dataset& ds) { return Region{{0.0, 0.0}, ds.meta.area_half}; }

inline EvalResult evaluate_decisions(const Dataset& ds, const std::vector<Decisions<double>>& decisions,
                                     double alpha) {
  if (decisions.size() != ds.items.size()) throw DimensionError("evaluate: one decision per scenario required");
  std::vector<ScenarioMetrics> per;
  per.reserve(ds.items.size());
  for (std::size_t i = 0; i < ds.items.size(); ++i) per.push_back(scenario_metrics(ds.items[i], decisions[i], alpha));
  return aggregate(std::move(per));
}

inline std::vector<Decisions<double>> gnn_decisions(const GnnParams& p, const Dataset& ds) {
  const auto region = region_of(ds);
  std::vector<Decisions<double>> out;
  out.reserve(ds.items.size());
  for (const auto& s : ds.items) out.push_back(forward(s, ds.meta.n_uav, p, region));
  return out;
}

inline EvalResult evaluate(const GnnParams& p, const Dataset& ds, double alpha) {
  return evaluate_decisions(ds, gnn_decisions(p, ds), alpha);
}

// ---- training -------------------------------------------------------------

struct HistoryRecord {
  std::size_t iter = 0;
  double train_loss = 0.0;     // mean penalized loss over the whole training set
  double test_sum_rate = 0.0;  // mean DU sum rate over the test set
  double violations = 0.0;     // mean QoS violation count per test scenario
  double seconds = 0.0;
};

using TrainHistory = std::vector<HistoryRecord>;

struct TrainResult {
  GnnParams params;
  TrainHistory history;
};

/// Graphs and the traced loss for one scenario. Returns the loss value and
/// accumulates scale * dloss/dparams into `grad`.
class LossEvaluator {
public:
  LossEvaluator(const GnnParams& params, double alpha) : params_(&params), alpha_(alpha) {}

  double accumulate(const Scenario& s, const InterferenceGraph& g, const Region& region,
                    std::span<double> grad, double scale) {
    trace_.clear();
    const auto leaves = bind(trace_, *params_);
    const ParamView<Var> view(leaves, params_->layout);
    const auto d = forward(g, view, s.constants, region);
    const Var loss = penalized_loss(s, d, alpha_);
    const auto grads = trace_.backward(loss);
    const auto adj = grads.adjoints();
    for (std::size_t i = 0; i < leaves.size(); ++i) grad[i] += scale * adj[leaves[i].id];
    return loss.value;
  }

  /// Loss on the trace only (no backward), for consistency checks.
  Var traced_loss(const Scenario& s, const InterferenceGraph& g, const Region& region,
                  Decisions<double>* emitted = nullptr) {
    trace_.clear();
    leaves_ = bind(trace_, *params_);
    const ParamView<Var> view(leaves_, params_->layout);
    const auto d = forward(g, view, s.constants, region);
    if (emitted) *emitted = values_of(d);
    return penalized_loss(s, d, alpha_);
  }

  const ad::Trace& trace() const noexcept { return trace_; }

private:
  const GnnParams* params_;
  double alpha_;
  ad::Trace trace_;
  std::vector<Var> leaves_;
};

inline void check_compatible(const Dataset& a, const Dataset& b) {
  if (a.meta.n_uav != b.meta.n_uav) throw ConfigError("datasets disagree on n_uav");
  if (a.meta.area_half != b.meta.area_half) throw ConfigError("datasets disagree on area_half");
  if (a.items.empty() || b.items.empty()) return;
  const auto& x = a.items.front();
  const auto& y = b.items.front();
  if (x.n_du() != y.n_du() || x.n_d2d() != y.n_d2d()) throw ConfigError("datasets disagree on DU/D2D counts");
  if (!(x.constants == y.constants)) throw ConfigError("datasets disagree on physical constants");
}

/// Mean loss of the last step is guarded against blow-up relative to the
/// first step: abort when it is non-finite or worse than the initial value by
/// more than nine times its magnitude (i.e. above 10x for positive losses).
inline bool diverged(double initial, double current) {
  if (!std::isfinite(current)) return true;
  return current > initial + 9.0 * std::max(std::abs(initial), 1e-12);
}

using ProgressFn = std::function<void(const HistoryRecord&)>;

inline TrainResult train(const Dataset& train_set, const Dataset& test_set, const TrainConfig& cfg,
                         const ProgressFn& progress = {}) {
  cfg.validate();
  check_compatible(train_set, test_set);
  if (train_set.items.empty()) throw ConfigError("training set is empty");

  const auto region = region_of(train_set);
  const auto n_uav = train_set.meta.n_uav;
  std::vector<InterferenceGraph> graphs;
  graphs.reserve(train_set.items.size());
  for (const auto& s : train_set.items) graphs.push_back(build_graph(s, n_uav, region));

  TrainResult out{init_params(cfg.seed, cfg.widths), {}};
  auto& params = out.params;
  AdamState state(params.values.size());
  LossEvaluator evaluator(params, cfg.alpha);

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(train_set.items.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;

  const auto start = std::chrono::steady_clock::now();
  auto record = [&](std::size_t iter) {
    HistoryRecord r;
    r.iter = iter;
    r.train_loss = evaluate(params, train_set, cfg.alpha).mean_loss;
    const auto test = evaluate(params, test_set, cfg.alpha);
    r.test_sum_rate = test.mean_sum_rate;
    r.violations = test.mean_violations;
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.history.push_back(r);
    if (progress) progress(r);
  };

  record(0);
  std::vector<double> grad(params.values.size());
  double initial_loss = 0.0;
  for (std::size_t it = 1; it <= cfg.iters; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double batch_loss = 0.0;
    const double scale = 1.0 / static_cast<double>(cfg.batch);
    for (std::size_t b = 0; b < cfg.batch; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const auto idx = order[cursor++];
      batch_loss += scale * evaluator.accumulate(train_set.items[idx], graphs[idx], region, grad, scale);
    }
    if (it == 1) initial_loss = batch_loss;
    if (diverged(initial_loss, batch_loss)) {
      throw NumericError("training diverged at iteration " + std::to_string(it) + ": batch loss " +
                         std::to_string(batch_loss) + " vs initial " + std::to_string(initial_loss));
    }
    adam_step(params.values, grad, state, cfg, &params.layout);
    if (it % cfg.eval_every == 0 || it == cfg.iters) record(it);
  }
  return out;
}

}  // namespace uavgnn
