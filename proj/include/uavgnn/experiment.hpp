#pragma once

// Experiment harness shared by the command-line tool and the acceptance run:
// merged run configuration, dataset pairs, scheme dispatch, sweeps, and CSV
// output. Every CSV starts with '#' lines carrying the tool version, the
// effective configuration, and its hash.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uavgnn/baselines.hpp"
#include "uavgnn/error.hpp"
#include "uavgnn/gradcheck.hpp"
#include "uavgnn/scenario.hpp"
#include "uavgnn/training.hpp"

#ifndef UAVGNN_VERSION
#define UAVGNN_VERSION "0.1.0"
#endif

namespace uavgnn {

inline constexpr const char* kVersion = UAVGNN_VERSION;

/// The test set is drawn with the training seed plus this offset.
inline constexpr std::uint64_t kTestSeedOffset = 1000003;
/// Sweep point v regenerates its data with seed + kSweepSeedStride * v.
inline constexpr std::uint64_t kSweepSeedStride = 7919;

struct RunConfig {
  std::string experiment = "default";
  std::string out_dir = "runs";
  GenConfig gen;                  // gen.n_samples is the training-set size
  std::size_t n_test = 200;
  std::uint64_t baseline_seed = 99;  // random_deployment uses baseline_seed + scenario id
  TrainConfig train;
  AoConfig ao;
  GridConfig grid;
  GradCheckConfig gradcheck;      // alpha follows train.alpha

  void validate() const {
    if (experiment.empty()) throw ConfigError("experiment must be a non-empty name");
    if (out_dir.empty()) throw ConfigError("out_dir must be non-empty");
    if (n_test == 0) throw ConfigError("n_test must be >= 1");
    gen.validate();
    train.validate();
    ao.validate();
    grid.validate();
    gradcheck.validate();
  }
};

// ---- JSON -----------------------------------------------------------------

inline json to_json(const TrainConfig& c) {
  return json{{"lr", c.lr},       {"beta1", c.beta1}, {"beta2", c.beta2},   {"eps_adam", c.eps_adam},
              {"alpha", c.alpha}, {"iters", c.iters}, {"batch", c.batch},   {"seed", c.seed},
              {"eval_every", c.eval_every}, {"widths", c.widths}};
}

inline TrainConfig train_config_from_json(const json& j, TrainConfig c = {}) {
  const std::string w = "train";
  detail::reject_unknown_keys(
      j, {"lr", "beta1", "beta2", "eps_adam", "alpha", "iters", "batch", "seed", "eval_every", "widths"}, w);
  detail::read_if(j, "lr", c.lr, w);
  detail::read_if(j, "beta1", c.beta1, w);
  detail::read_if(j, "beta2", c.beta2, w);
  detail::read_if(j, "eps_adam", c.eps_adam, w);
  detail::read_if(j, "alpha", c.alpha, w);
  detail::read_if(j, "iters", c.iters, w);
  detail::read_if(j, "batch", c.batch, w);
  detail::read_if(j, "seed", c.seed, w);
  detail::read_if(j, "eval_every", c.eval_every, w);
  detail::read_if(j, "widths", c.widths, w);
  return c;
}

inline json to_json(const AoConfig& c) {
  return json{{"outer_iters", c.outer_iters},     {"inner_steps", c.inner_steps},
              {"step_size_pos", c.step_size_pos}, {"step_size_logit", c.step_size_logit},
              {"tolerance", c.tolerance}};
}

inline AoConfig ao_config_from_json(const json& j, AoConfig c = {}) {
  const std::string w = "ao";
  detail::reject_unknown_keys(j, {"outer_iters", "inner_steps", "step_size_pos", "step_size_logit", "tolerance"}, w);
  detail::read_if(j, "outer_iters", c.outer_iters, w);
  detail::read_if(j, "inner_steps", c.inner_steps, w);
  detail::read_if(j, "step_size_pos", c.step_size_pos, w);
  detail::read_if(j, "step_size_logit", c.step_size_logit, w);
  detail::read_if(j, "tolerance", c.tolerance, w);
  return c;
}

inline json to_json(const GridConfig& c) {
  return json{{"pos_resolution", c.pos_resolution}, {"power_levels", c.power_levels}};
}

inline GridConfig grid_config_from_json(const json& j, GridConfig c = {}) {
  detail::reject_unknown_keys(j, {"pos_resolution", "power_levels"}, "grid");
  detail::read_if(j, "pos_resolution", c.pos_resolution, "grid");
  detail::read_if(j, "power_levels", c.power_levels, "grid");
  return c;
}

inline json to_json(const GradCheckConfig& c) {
  return json{{"n_params", c.n_params}, {"n_scenarios", c.n_scenarios}, {"tolerance", c.tolerance},
              {"step", c.step},         {"denom_floor", c.denom_floor}, {"seed", c.seed}};
}

inline GradCheckConfig gradcheck_config_from_json(const json& j, GradCheckConfig c = {}) {
  const std::string w = "gradcheck";
  detail::reject_unknown_keys(j, {"n_params", "n_scenarios", "tolerance", "step", "denom_floor", "seed"}, w);
  detail::read_if(j, "n_params", c.n_params, w);
  detail::read_if(j, "n_scenarios", c.n_scenarios, w);
  detail::read_if(j, "tolerance", c.tolerance, w);
  detail::read_if(j, "step", c.step, w);
  detail::read_if(j, "denom_floor", c.denom_floor, w);
  detail::read_if(j, "seed", c.seed, w);
  return c;
}

inline json to_json(const RunConfig& c) {
  return json{{"experiment", c.experiment}, {"out_dir", c.out_dir},       {"n_test", c.n_test},
              {"baseline_seed", c.baseline_seed}, {"gen", to_json(c.gen)}, {"train", to_json(c.train)},
              {"ao", to_json(c.ao)},        {"grid", to_json(c.grid)},     {"gradcheck", to_json(c.gradcheck)}};
}

/// Overlays `j` on `base`; unknown keys at any level are rejected.
inline RunConfig run_config_from_json(const json& j, RunConfig base = {}) {
  detail::reject_unknown_keys(
      j, {"experiment", "out_dir", "n_test", "baseline_seed", "gen", "train", "ao", "grid", "gradcheck"}, "config");
  detail::read_if(j, "experiment", base.experiment, "config");
  detail::read_if(j, "out_dir", base.out_dir, "config");
  detail::read_if(j, "n_test", base.n_test, "config");
  detail::read_if(j, "baseline_seed", base.baseline_seed, "config");
  if (j.contains("gen")) base.gen = gen_config_from_json(j["gen"], base.gen);
  if (j.contains("train")) base.train = train_config_from_json(j["train"], base.train);
  if (j.contains("ao")) base.ao = ao_config_from_json(j["ao"], base.ao);
  if (j.contains("grid")) base.grid = grid_config_from_json(j["grid"], base.grid);
  if (j.contains("gradcheck")) base.gradcheck = gradcheck_config_from_json(j["gradcheck"], base.gradcheck);
  base.gradcheck.alpha = base.train.alpha;
  return base;
}

/// 64-bit FNV-1a of the compact JSON dump (object keys are sorted).
inline std::uint64_t config_hash(const RunConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_json(c).dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// '#'-free provenance lines: version, effective configuration, hash.
inline std::vector<std::string> provenance(const RunConfig& c) {
  return {std::string("uavgnn ") + kVersion, "config " + to_json(c).dump(), "config_hash " + hex(config_hash(c))};
}

// ---- datasets -------------------------------------------------------------

struct DatasetPair {
  Dataset train;
  Dataset test;
};

inline GenConfig test_gen_config(const RunConfig& c) {
  GenConfig g = c.gen;
  g.seed = c.gen.seed + kTestSeedOffset;
  g.n_samples = c.n_test;
  if (g.fading_seed) *g.fading_seed += kTestSeedOffset;
  return g;
}

inline DatasetPair make_datasets(const RunConfig& c) {
  c.validate();
  return {generate(c.gen), generate(test_gen_config(c))};
}

// ---- schemes --------------------------------------------------------------

enum class Scheme { gnn, random, fixed_power, ao, oracle };

inline const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::gnn: return "gnn";
    case Scheme::random: return "random";
    case Scheme::fixed_power: return "fixed_power";
    case Scheme::ao: return "ao";
    case Scheme::oracle: return "oracle";
  }
  return "?";
}

inline Scheme parse_scheme(const std::string& s) {
  for (auto v : {Scheme::gnn, Scheme::random, Scheme::fixed_power, Scheme::ao, Scheme::oracle}) {
    if (s == scheme_name(v)) return v;
  }
  throw ConfigError("unknown scheme '" + s + "' (expected gnn, random, fixed_power, ao, oracle)");
}

/// Per-scenario decisions of one scheme on `ds`. `params` is required for gnn only.
inline std::vector<Decisions<double>> scheme_decisions(Scheme scheme, const Dataset& ds, const RunConfig& c,
                                                       const GnnParams* params) {
  const auto region = region_of(ds);
  const auto n_uav = ds.meta.n_uav;
  const double alpha = c.train.alpha;
  if (scheme == Scheme::gnn) {
    if (!params) throw ConfigError("scheme gnn needs a checkpoint");
    return gnn_decisions(*params, ds);
  }
  if (scheme == Scheme::oracle && !ds.items.empty() &&
      oracle_combinations(n_uav, ds.items.front().n_d2d(), c.grid) > kOracleCombinationCap) {
    throw ConfigError("oracle: " + std::to_string(oracle_combinations(n_uav, ds.items.front().n_d2d(), c.grid)) +
                      " grid combinations per scenario exceed the cap of 1e7");
  }
  std::vector<Decisions<double>> out;
  out.reserve(ds.items.size());
  for (std::size_t i = 0; i < ds.items.size(); ++i) {
    const auto& s = ds.items[i];
    switch (scheme) {
      case Scheme::random:
        out.push_back(random_deployment(s, n_uav, region, c.baseline_seed + i, c.ao, alpha).decisions);
        break;
      case Scheme::fixed_power: out.push_back(fixed_power(s, n_uav, region, c.ao, alpha).decisions); break;
      case Scheme::ao: out.push_back(alternating_optimization(s, n_uav, region, c.ao, alpha).decisions); break;
      case Scheme::oracle: out.push_back(grid_oracle(s, n_uav, region, c.grid, alpha).decisions); break;
      case Scheme::gnn: break;
    }
  }
  return out;
}

inline EvalResult evaluate_scheme(Scheme scheme, const Dataset& ds, const RunConfig& c,
                                  const GnnParams* params = nullptr) {
  return evaluate_decisions(ds, scheme_decisions(scheme, ds, c, params), c.train.alpha);
}

// ---- sweeps ---------------------------------------------------------------

enum class SweepAxis { M, N };

inline SweepAxis parse_axis(const std::string& s) {
  if (s == "M") return SweepAxis::M;
  if (s == "N") return SweepAxis::N;
  throw ConfigError("unknown sweep axis '" + s + "' (expected M or N)");
}

inline const char* axis_name(SweepAxis a) { return a == SweepAxis::M ? "M" : "N"; }

/// Configuration of one sweep point: the axis count set to `value` and every
/// seed shifted so that points are reproducible independently.
inline RunConfig sweep_point_config(const RunConfig& base, SweepAxis axis, std::size_t value) {
  RunConfig c = base;
  if (axis == SweepAxis::M) {
    c.gen.n_d2d = value;
  } else {
    c.gen.n_uav = value;
  }
  const auto shift = kSweepSeedStride * static_cast<std::uint64_t>(value);
  c.gen.seed += shift;
  if (c.gen.fading_seed) *c.gen.fading_seed += shift;
  c.train.seed += shift;
  return c;
}

struct SweepRow {
  SweepAxis axis = SweepAxis::M;
  std::size_t value = 0;
  RunConfig config;
  std::map<std::string, EvalResult> schemes;  // keyed by scheme name
  TrainHistory history;
  double seconds = 0.0;
};

inline const std::vector<Scheme>& default_sweep_schemes() {
  static const std::vector<Scheme> s{Scheme::gnn, Scheme::random, Scheme::fixed_power, Scheme::ao};
  return s;
}

using SweepProgressFn = std::function<void(const SweepRow&)>;

/// For each value (strictly ascending): regenerate data, train a fresh GNN,
/// and evaluate every scheme on that point's test set. Points run in order.
inline std::vector<SweepRow> run_sweep(const RunConfig& base, SweepAxis axis, const std::vector<std::size_t>& values,
                                       const std::vector<Scheme>& schemes = default_sweep_schemes(),
                                       const SweepProgressFn& progress = {}) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] == 0 && axis == SweepAxis::N) throw ConfigError("sweep: N values must be >= 1");
    if (i > 0 && values[i] <= values[i - 1]) throw ConfigError("sweep values must be strictly ascending");
  }
  std::vector<SweepRow> rows;
  for (auto v : values) {
    const auto start = std::chrono::steady_clock::now();
    SweepRow row;
    row.axis = axis;
    row.value = v;
    row.config = sweep_point_config(base, axis, v);
    const auto data = make_datasets(row.config);
    GnnParams params;
    bool have_params = false;
    for (auto s : schemes) {
      if (s == Scheme::gnn && !have_params) {
        auto tr = train(data.train, data.test, row.config.train);
        params = std::move(tr.params);
        row.history = std::move(tr.history);
        have_params = true;
      }
      row.schemes[scheme_name(s)] = evaluate_scheme(s, data.test, row.config, have_params ? &params : nullptr);
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (progress) progress(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---- CSV ------------------------------------------------------------------

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void comments(std::ostream& os, const std::vector<std::string>& lines) {
  for (const auto& l : lines) os << "# " << l << '\n';
}

}  // namespace detail

inline void write_history_csv(std::ostream& os, const TrainHistory& h, const std::vector<std::string>& header) {
  detail::comments(os, header);
  os << "iter,train_loss,test_sum_rate,violations,seconds\n";
  for (const auto& r : h) {
    os << r.iter << ',' << detail::num(r.train_loss) << ',' << detail::num(r.test_sum_rate) << ','
       << detail::num(r.violations) << ',' << detail::num(r.seconds) << '\n';
  }
}

/// One row per scenario (scenario = dataset id), then "mean" and "std" rows.
/// On aggregate rows violations is the mean count and qos_ok the satisfied share.
inline void write_eval_csv(std::ostream& os, Scheme scheme, const EvalResult& r,
                           const std::vector<std::string>& header) {
  detail::comments(os, header);
  os << "scheme,scenario,du_sum_rate,penalized_loss,violations,min_d2d_rate,qos_ok\n";
  const char* name = scheme_name(scheme);
  for (std::size_t i = 0; i < r.per_scenario.size(); ++i) {
    const auto& m = r.per_scenario[i];
    os << name << ',' << i << ',' << detail::num(m.du_sum_rate) << ',' << detail::num(m.loss) << ','
       << m.violations << ',' << detail::num(m.min_d2d_rate) << ',' << (m.qos_satisfied() ? 1 : 0) << '\n';
  }
  double loss_ss = 0.0;
  double viol_ss = 0.0;
  double qos_ss = 0.0;
  for (const auto& m : r.per_scenario) {
    loss_ss += (m.loss - r.mean_loss) * (m.loss - r.mean_loss);
    const double dv = static_cast<double>(m.violations) - r.mean_violations;
    viol_ss += dv * dv;
    const double dq = (m.qos_satisfied() ? 1.0 : 0.0) - r.qos_fraction;
    qos_ss += dq * dq;
  }
  const double n = std::max<double>(1.0, static_cast<double>(r.per_scenario.size()));
  os << name << ",mean," << detail::num(r.mean_sum_rate) << ',' << detail::num(r.mean_loss) << ','
     << detail::num(r.mean_violations) << ",," << detail::num(r.qos_fraction) << '\n';
  os << name << ",std," << detail::num(r.std_sum_rate) << ',' << detail::num(std::sqrt(loss_ss / n)) << ','
     << detail::num(std::sqrt(viol_ss / n)) << ",," << detail::num(std::sqrt(qos_ss / n)) << '\n';
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows, const std::vector<Scheme>& schemes,
                            const std::vector<std::string>& header) {
  detail::comments(os, header);
  os << "axis,value,n_uav,n_du,n_d2d,config_hash";
  for (auto s : schemes) {
    const std::string n = scheme_name(s);
    os << ',' << n << "_mean_sum_rate," << n << "_std_sum_rate," << n << "_qos_fraction";
  }
  os << ",seconds\n";
  for (const auto& r : rows) {
    os << axis_name(r.axis) << ',' << r.value << ',' << r.config.gen.n_uav << ',' << r.config.gen.n_du << ','
       << r.config.gen.n_d2d << ',' << hex(config_hash(r.config));
    for (auto s : schemes) {
      const auto& e = r.schemes.at(scheme_name(s));
      os << ',' << detail::num(e.mean_sum_rate) << ',' << detail::num(e.std_sum_rate) << ','
         << detail::num(e.qos_fraction);
    }
    os << ',' << detail::num(r.seconds) << '\n';
  }
}

inline void write_gradcheck_csv(std::ostream& os, const GradCheckReport& rep, const std::vector<std::string>& header) {
  detail::comments(os, header);
  os << "block,checked,excluded,max_rel_error\n";
  for (const auto& b : rep.blocks) {
    os << b.name << ',' << b.checked << ',' << b.excluded << ',' << detail::num(b.max_rel_error) << '\n';
  }
  os << "all," << rep.checked << ',' << rep.excluded << ',' << detail::num(rep.max_rel_error) << '\n';
}

}  // namespace uavgnn
