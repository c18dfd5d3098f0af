// uavgnn: dataset generation, training, evaluation, sweeps and gradient
// checks for the UAV/D2D scheduling network.
//
// Exit codes: 0 success, 2 configuration or usage error, 3 runtime error,
// 4 acceptance threshold not met.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "uavgnn/experiment.hpp"

namespace fs = std::filesystem;
using namespace uavgnn;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitThreshold = 4;
constexpr const char* kOutDirEnv = "UAVGNN_OUT_DIR";

struct ThresholdFailure : Error {
  using Error::Error;
};

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool force = false;
};

struct Flags {
  CommonFlags common;
  std::string train_set;
  std::string test_set;
  std::string checkpoint;
  std::vector<std::string> schemes;
  std::string axis;
  std::vector<std::size_t> values;
};

/// defaults <- file <- environment <- flags, reported on stderr.
RunConfig resolve_config(const CommonFlags& f) {
  RunConfig cfg;
  std::vector<std::string> sources{"defaults"};
  if (!f.config_path.empty()) {
    std::ifstream is(f.config_path);
    if (!is) throw ConfigError("cannot open config file '" + f.config_path + "'");
    json j;
    try {
      j = json::parse(is);
    } catch (const json::parse_error& e) {
      throw ConfigError("config file '" + f.config_path + "': " + e.what());
    }
    cfg = run_config_from_json(j, cfg);
    sources.push_back("file " + f.config_path);
  }
  if (const char* env = std::getenv(kOutDirEnv); env && *env) {
    cfg.out_dir = env;
    sources.push_back(std::string("env ") + kOutDirEnv + "=" + env);
  }
  std::string flag_list;
  if (f.seed) {
    cfg.gen.seed = *f.seed;
    cfg.train.seed = *f.seed;
    flag_list += " --seed " + std::to_string(*f.seed);
  }
  if (!f.out.empty()) {
    cfg.out_dir = f.out;
    flag_list += " --out " + f.out;
  }
  if (!flag_list.empty()) sources.push_back("flags" + flag_list);
  cfg.validate();

  std::cerr << "uavgnn " << kVersion << "\nprecedence: flags > env > file > defaults; applied:";
  for (const auto& s : sources) std::cerr << " [" << s << "]";
  std::cerr << "\neffective config: " << to_json(cfg).dump() << "\nconfig hash: " << hex(config_hash(cfg)) << '\n';
  return cfg;
}

fs::path out_path(const RunConfig& cfg, const std::string& file) {
  fs::create_directories(cfg.out_dir);
  return fs::path(cfg.out_dir) / file;
}

std::string or_default(const std::string& given, const RunConfig& cfg, const char* file) {
  return given.empty() ? (fs::path(cfg.out_dir) / file).string() : given;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw Error("cannot open '" + p.string() + "' for writing");
  return os;
}

std::vector<std::string> header(const RunConfig& cfg, std::vector<std::string> extra = {}) {
  auto h = provenance(cfg);
  h.insert(h.end(), extra.begin(), extra.end());
  return h;
}

void print_eval(const char* label, const EvalResult& r, double alpha) {
  std::printf("%-12s mean_sum_rate %.4f std %.4f mean_loss %.4f violations %.3f qos_fraction %.3f (alpha %g)\n",
              label, r.mean_sum_rate, r.std_sum_rate, r.mean_loss, r.mean_violations, r.qos_fraction, alpha);
}

int cmd_gen(const Flags& f) {
  const auto cfg = resolve_config(f.common);
  const auto train_p = out_path(cfg, "train.jsonl");
  const auto test_p = out_path(cfg, "test.jsonl");
  const auto meta_p = out_path(cfg, "meta.json");
  for (const auto& p : {train_p, test_p, meta_p}) {
    if (fs::exists(p) && !f.common.force) {
      throw ConfigError("refusing to overwrite '" + p.string() + "' (pass --force)");
    }
  }
  const auto data = make_datasets(cfg);
  const json prov{{"tool", "uavgnn"}, {"version", kVersion}, {"config", to_json(cfg)}, {"config_hash", hex(config_hash(cfg))}};
  save(data.train, train_p.string(), prov);
  save(data.test, test_p.string(), prov);
  json meta{{"tool", "uavgnn"},
            {"version", kVersion},
            {"config", to_json(cfg)},
            {"config_hash", hex(config_hash(cfg))},
            {"train", {{"path", train_p.filename().string()}, {"count", data.train.items.size()}, {"meta", to_json(data.train.meta)}}},
            {"test", {{"path", test_p.filename().string()}, {"count", data.test.items.size()}, {"meta", to_json(data.test.meta)}}}};
  open_out(meta_p) << meta.dump(2) << '\n';
  std::printf("wrote %zu training and %zu test scenarios to %s\n", data.train.items.size(), data.test.items.size(),
              cfg.out_dir.c_str());
  return 0;
}

int cmd_train(const Flags& f) {
  const auto cfg = resolve_config(f.common);
  const auto train_path = or_default(f.train_set, cfg, "train.jsonl");
  const auto test_path = or_default(f.test_set, cfg, "test.jsonl");
  const auto train_set = load(train_path);
  const auto test_set = load(test_path);
  const auto ckpt = f.checkpoint.empty() ? out_path(cfg, "model.ckpt") : fs::path(f.checkpoint);

  auto result = train(train_set, test_set, cfg.train, [](const HistoryRecord& r) {
    std::fprintf(stderr, "iter %5zu  train_loss %10.4f  test_sum_rate %8.4f  violations %5.3f  %7.1fs\n", r.iter,
                 r.train_loss, r.test_sum_rate, r.violations, r.seconds);
  });
  const std::vector<std::string> extra{"train_set " + train_path, "test_set " + test_path};
  if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
  save_checkpoint(ckpt.string(), result.params, header(cfg, extra));
  auto hist = open_out(out_path(cfg, "history.csv"));
  write_history_csv(hist, result.history, header(cfg, extra));
  const auto& last = result.history.back();
  std::printf("final iter %zu train_loss %.6f test_sum_rate %.6f violations %.4f\ncheckpoint %s\n", last.iter,
              last.train_loss, last.test_sum_rate, last.violations, ckpt.string().c_str());
  return 0;
}

int cmd_eval(const Flags& f) {
  const auto cfg = resolve_config(f.common);
  if (f.schemes.size() > 1) throw ConfigError("eval takes a single --scheme");
  const auto scheme = parse_scheme(f.schemes.empty() ? "gnn" : f.schemes.front());
  const auto test_path = or_default(f.test_set, cfg, "test.jsonl");
  const auto test_set = load(test_path);
  std::optional<GnnParams> params;
  std::vector<std::string> extra{"test_set " + test_path};
  if (scheme == Scheme::gnn) {
    const auto ckpt = or_default(f.checkpoint, cfg, "model.ckpt");
    params = load_checkpoint(ckpt);
    extra.push_back("checkpoint " + ckpt);
  }
  const auto r = evaluate_scheme(scheme, test_set, cfg, params ? &*params : nullptr);
  const auto csv = out_path(cfg, std::string("eval_") + scheme_name(scheme) + ".csv");
  auto os = open_out(csv);
  write_eval_csv(os, scheme, r, header(cfg, extra));
  print_eval(scheme_name(scheme), r, cfg.train.alpha);
  std::printf("wrote %s\n", csv.string().c_str());
  return 0;
}

int cmd_sweep(const Flags& f) {
  const auto cfg = resolve_config(f.common);
  const auto axis = parse_axis(f.axis);
  auto values = f.values;
  if (values.empty()) values = axis == SweepAxis::M ? std::vector<std::size_t>{10, 20, 30} : std::vector<std::size_t>{1, 2, 4};
  std::vector<Scheme> schemes;
  for (const auto& s : f.schemes) schemes.push_back(parse_scheme(s));
  if (schemes.empty()) schemes = default_sweep_schemes();

  const auto rows = run_sweep(cfg, axis, values, schemes, [&](const SweepRow& r) {
    std::fprintf(stderr, "%s=%zu (%.1fs)", axis_name(axis), r.value, r.seconds);
    for (auto s : schemes) std::fprintf(stderr, "  %s %.4f", scheme_name(s), r.schemes.at(scheme_name(s)).mean_sum_rate);
    std::fprintf(stderr, "\n");
  });
  const auto csv = out_path(cfg, std::string("sweep_") + axis_name(axis) + ".csv");
  auto os = open_out(csv);
  write_sweep_csv(os, rows, schemes, header(cfg));
  std::printf("wrote %s\n", csv.string().c_str());
  return 0;
}

int cmd_gradcheck(const Flags& f) {
  auto cfg = resolve_config(f.common);
  GenConfig g = cfg.gen;
  g.n_samples = cfg.gradcheck.n_scenarios;
  const auto ds = generate(g);
  std::vector<std::string> extra;
  GnnParams params;
  if (!f.checkpoint.empty()) {
    params = load_checkpoint(f.checkpoint);
    extra.push_back("checkpoint " + f.checkpoint);
  } else {
    params = init_params(cfg.train.seed, cfg.train.widths);
    extra.push_back("parameters init_params(seed " + std::to_string(cfg.train.seed) + ")");
  }
  const auto rep = gradient_check(params, ds, cfg.gradcheck);
  const auto csv = out_path(cfg, "gradcheck.csv");
  auto os = open_out(csv);
  write_gradcheck_csv(os, rep, header(cfg, extra));
  for (const auto& b : rep.blocks) {
    std::printf("%-20s checked %4zu  excluded %3zu  max_rel_error %.3e\n", b.name.c_str(), b.checked, b.excluded,
                b.max_rel_error);
  }
  std::printf("all                  checked %4zu  excluded %3zu  max_rel_error %.3e  tolerance %.1e  %s\n", rep.checked,
              rep.excluded, rep.max_rel_error, rep.tolerance, rep.passed() ? "PASS" : "FAIL");
  if (!rep.passed()) throw ThresholdFailure("gradient check above tolerance");
  return 0;
}

void add_common(CLI::App* sub, CommonFlags& c) {
  sub->add_option("--config", c.config_path, "JSON run configuration; unknown keys are rejected");
  sub->add_option("--seed", c.seed, "Overrides gen.seed and train.seed");
  sub->add_option("--out", c.out, std::string("Output directory (overrides ") + kOutDirEnv + " and out_dir)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UAV positioning and power control with a graph neural network"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Flags f;

  auto* gen = app.add_subcommand("gen", "Generate training and test datasets");
  add_common(gen, f.common);
  gen->add_flag("--force", f.common.force, "Overwrite existing dataset files");

  auto* tr = app.add_subcommand("train", "Train the GNN; writes a checkpoint and history.csv");
  add_common(tr, f.common);
  tr->add_option("--train-set", f.train_set, "Training dataset (default <out>/train.jsonl)");
  tr->add_option("--test-set", f.test_set, "Test dataset (default <out>/test.jsonl)");
  tr->add_option("--checkpoint", f.checkpoint, "Checkpoint to write (default <out>/model.ckpt)");

  auto* ev = app.add_subcommand("eval", "Evaluate one scheme on a test set; writes eval_<scheme>.csv");
  add_common(ev, f.common);
  ev->add_option("--test-set", f.test_set, "Test dataset (default <out>/test.jsonl)");
  ev->add_option("--checkpoint", f.checkpoint, "Checkpoint for scheme gnn (default <out>/model.ckpt)");
  ev->add_option("--scheme", f.schemes, "gnn | random | fixed_power | ao | oracle")->expected(1);

  auto* sw = app.add_subcommand("sweep", "Retrain and evaluate over M or N; writes sweep_<axis>.csv");
  add_common(sw, f.common);
  sw->add_option("--axis", f.axis, "M (D2D pairs) or N (UAVs)")->required();
  sw->add_option("--values", f.values, "Strictly ascending values, comma separated")->delimiter(',');
  sw->add_option("--scheme", f.schemes, "Schemes to evaluate (repeatable; default gnn, random, fixed_power, ao)");

  auto* gc = app.add_subcommand("gradcheck", "Autodiff vs central finite differences; writes gradcheck.csv");
  add_common(gc, f.common);
  gc->add_option("--checkpoint", f.checkpoint, "Check at these parameters instead of a fresh initialization");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_gen(f);
    if (tr->parsed()) return cmd_train(f);
    if (ev->parsed()) return cmd_eval(f);
    if (sw->parsed()) return cmd_sweep(f);
    if (gc->parsed()) return cmd_gradcheck(f);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ThresholdFailure& e) {
    std::cerr << "threshold failure: " << e.what() << '\n';
    return kExitThreshold;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}
