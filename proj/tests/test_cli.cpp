#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "uavgnn/experiment.hpp"

#ifndef UAVGNN_CLI_PATH
#error "UAVGNN_CLI_PATH must point at the uavgnn executable"
#endif

namespace fs = std::filesystem;
using namespace uavgnn;

namespace {

class Cli : public ::testing::Test {
protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("uavgnn_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    write(dir_ / "small.json", R"({
      "gen": {"n_samples": 16},
      "n_test": 6,
      "train": {"iters": 4, "batch": 4, "eval_every": 2, "widths": [8, 8]},
      "ao": {"outer_iters": 3},
      "gradcheck": {"n_params": 30, "n_scenarios": 2}
    })");
  }
  void TearDown() override { fs::remove_all(dir_); }

  static void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

  static std::string read(const fs::path& p) {
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
  }

  int run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " " + UAVGNN_CLI_PATH + " " + args + " >" + (dir_ / "stdout.txt").string() +
                            " 2>" + (dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string small() const { return "--config " + (dir_ / "small.json").string() + " --out " + out().string(); }
  fs::path out() const { return dir_ / "run"; }
  std::string err() const { return read(dir_ / "stderr.txt"); }

  static std::vector<std::string> rows(const std::string& text) {
    std::vector<std::string> r;
    std::istringstream is(text);
    for (std::string l; std::getline(is, l);) {
      if (!l.empty() && l[0] != '#') r.push_back(l);
    }
    return r;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, GenWritesDefaultCountsAndRefusesOverwrite) {
  ASSERT_EQ(run("gen --out " + out().string()), 0) << err();
  EXPECT_EQ(load((out() / "train.jsonl").string()).items.size(), 500u);
  EXPECT_EQ(load((out() / "test.jsonl").string()).items.size(), 200u);
  const auto meta = json::parse(read(out() / "meta.json"));
  EXPECT_EQ(meta["config_hash"], hex(config_hash(run_config_from_json(meta["config"]))));

  std::ifstream ds(out() / "test.jsonl");
  std::string first;
  std::getline(ds, first);
  const auto header = json::parse(first);
  EXPECT_EQ(header["provenance"]["config_hash"], meta["config_hash"]);
  EXPECT_EQ(header["provenance"]["version"], kVersion);

  const auto before = read(out() / "train.jsonl");
  EXPECT_EQ(run("gen --out " + out().string()), 2);
  EXPECT_NE(err().find("--force"), std::string::npos);
  ASSERT_EQ(run("gen --force --out " + out().string()), 0);
  EXPECT_EQ(read(out() / "train.jsonl"), before);
}

TEST_F(Cli, SeedFlagChangesData) {
  ASSERT_EQ(run("gen " + small()), 0);
  const auto a = read(out() / "train.jsonl");
  ASSERT_EQ(run("gen --force --seed 5 " + small()), 0);
  EXPECT_NE(read(out() / "train.jsonl"), a);
  EXPECT_NE(err().find("\"seed\":5"), std::string::npos);
}

TEST_F(Cli, ConfigErrorsExitWithTwo) {
  write(dir_ / "bad.json", R"({"gen": {"n_du": 0}})");
  EXPECT_EQ(run("gen --config " + (dir_ / "bad.json").string() + " --out " + out().string()), 2);
  EXPECT_NE(err().find("n_du"), std::string::npos);
  write(dir_ / "typo.json", R"({"trian": {}})");
  EXPECT_EQ(run("gen --config " + (dir_ / "typo.json").string() + " --out " + out().string()), 2);
  EXPECT_NE(err().find("trian"), std::string::npos);
  EXPECT_EQ(run("gen --config " + (dir_ / "missing.json").string()), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("sweep --axis Q " + small()), 2);
}

TEST_F(Cli, TrainThenEvalReproducesFinalMetric) {
  ASSERT_EQ(run("gen " + small()), 0) << err();
  ASSERT_EQ(run("train " + small()), 0) << err();
  const auto hist = rows(read(out() / "history.csv"));
  ASSERT_EQ(hist.size(), 1u + 3u);  // header + iters 0, 2, 4
  EXPECT_EQ(hist[0], "iter,train_loss,test_sum_rate,violations,seconds");
  EXPECT_EQ(hist.back().substr(0, 2), "4,");
  EXPECT_NE(read(out() / "model.ckpt").find("# config_hash "), std::string::npos);

  ASSERT_EQ(run("eval --scheme gnn " + small()), 0) << err();
  const auto eval = rows(read(out() / "eval_gnn.csv"));
  ASSERT_EQ(eval.size(), 1u + 6u + 2u);
  auto field = [](const std::string& line, int idx) {
    std::istringstream is(line);
    std::string f;
    for (int i = 0; i <= idx; ++i) std::getline(is, f, ',');
    return f;
  };
  EXPECT_EQ(field(eval[7], 1), "mean");
  EXPECT_EQ(field(eval[7], 2), field(hist.back(), 2));
}

TEST_F(Cli, EvalBaselinesAndOracleCap) {
  ASSERT_EQ(run("gen " + small()), 0) << err();
  for (const char* s : {"random", "fixed_power", "ao"}) {
    ASSERT_EQ(run(std::string("eval --scheme ") + s + " " + small()), 0) << err();
    const auto r = rows(read(out() / (std::string("eval_") + s + ".csv")));
    ASSERT_EQ(r.size(), 9u) << s;
    for (int i = 0; i < 6; ++i) EXPECT_EQ(r[1 + i].rfind(std::string(s) + "," + std::to_string(i) + ",", 0), 0u);
  }
  EXPECT_EQ(run("eval --scheme oracle " + small()), 2);
  EXPECT_NE(err().find("1e7"), std::string::npos);
  EXPECT_EQ(run("eval --scheme greedy " + small()), 2);
  EXPECT_EQ(run("eval --scheme gnn " + small()), 3);  // no checkpoint yet
}

TEST_F(Cli, EnvironmentSelectsOutputDirectoryBelowFlags) {
  const auto env_dir = dir_ / "from_env";
  ASSERT_EQ(run("gen --config " + (dir_ / "small.json").string(), "UAVGNN_OUT_DIR=" + env_dir.string()), 0);
  EXPECT_TRUE(fs::exists(env_dir / "train.jsonl"));
  ASSERT_EQ(run("gen " + small(), "UAVGNN_OUT_DIR=" + env_dir.string()), 0);
  EXPECT_TRUE(fs::exists(out() / "train.jsonl"));
  EXPECT_NE(err().find("precedence: flags > env > file > defaults"), std::string::npos);
}

TEST_F(Cli, SweepWritesOneRowPerValue) {
  ASSERT_EQ(run("sweep --axis M --values 1,3 --scheme gnn --scheme random " + small()), 0) << err();
  const auto r = rows(read(out() / "sweep_M.csv"));
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[1].rfind("M,1,4,4,1,", 0), 0u);
  EXPECT_EQ(r[2].rfind("M,3,4,4,3,", 0), 0u);
  EXPECT_EQ(run("sweep --axis M --values 3,1 " + small()), 2);
}

TEST_F(Cli, GradcheckPassesAndThresholdFailureExitsFour) {
  ASSERT_EQ(run("gradcheck " + small()), 0) << err();
  const auto r = rows(read(out() / "gradcheck.csv"));
  EXPECT_EQ(r.back().rfind("all,30,", 0), 0u);
  write(dir_ / "strict.json", R"({"train": {"widths": [8, 8]}, "gradcheck": {"n_params": 30, "n_scenarios": 2, "tolerance": 1e-30}})");
  EXPECT_EQ(run("gradcheck --config " + (dir_ / "strict.json").string() + " --out " + out().string()), 4);
}
