#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "cilab/cli.hpp"
#include "cilab/corpus.hpp"

using namespace cilab;
using namespace cilab::cli;
namespace fs = std::filesystem;
using replay::StrategyKind;

namespace {

ExperimentConfig tiny_experiment() {
  ExperimentConfig cfg;
  cfg.n_tasks = 2;
  cfg.suite = taskforge::SuiteParams{6, 12, 24};
  cfg.suite_seed = 13;
  cfg.train.net.image_size = 12;
  cfg.train.net.z_dim = 8;
  cfg.train.net.base_channels = 6;
  cfg.train.net.head_hidden = 32;
  cfg.train.net.predictor_bottleneck = 64;
  cfg.train.net.action_embed = 8;
  cfg.train.m_demos = 5;
  cfg.train.heldout_demos = 3;
  cfg.train.eval_episodes = 4;
  cfg.train.epochs = 1;
  cfg.train.batch_size = 8;
  cfg.train.critic_steps = 2;
  cfg.train.t_max = 8;
  cfg.train.video_window = 3;
  cfg.train.video_content_dim = 8;
  cfg.train.video_motion_dim = 4;
  cfg.train.seed = 3;
  cfg.methods = {StrategyKind::cril};
  return cfg;
}

std::string write_config(const ExperimentConfig& cfg, const std::string& name) {
  std::string path = "/tmp/cilab_cli_" + name + ".json";
  save_experiment_config(cfg, path);
  return path;
}

// Order-independent digest of every regular file under a directory.
std::map<std::string, std::string> dir_contents(const fs::path& root) {
  std::map<std::string, std::string> contents;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream bytes;
    bytes << in.rdbuf();
    contents[fs::relative(e.path(), root).string()] = bytes.str();
  }
  return contents;
}

int run(std::vector<std::string> args, std::string* out_text = nullptr,
        std::string* err_text = nullptr) {
  std::vector<const char*> argv{"cilab"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

}  // namespace

TEST_CASE("experiment config round trip and strict validation") {
  ExperimentConfig cfg = tiny_experiment();
  std::string path = write_config(cfg, "roundtrip");
  ExperimentConfig back = load_experiment_config(path);
  CHECK(back.n_tasks == cfg.n_tasks);
  CHECK(back.suite.grid_size == cfg.suite.grid_size);
  CHECK(back.suite_seed == cfg.suite_seed);
  CHECK(back.methods == cfg.methods);
  CHECK(back.train.net == cfg.train.net);
  CHECK(back.train.m_demos == cfg.train.m_demos);
  CHECK_NOTHROW(back.validate());

  SUBCASE("unknown top-level key rejected") {
    std::ofstream(path) << R"({"n_tasks": 2, "bogus": 1})";
    CHECK_THROWS_WITH_AS(load_experiment_config(path),
                         doctest::Contains("unknown key"), std::runtime_error);
  }
  SUBCASE("unknown nested train key rejected") {
    std::ofstream(path) << R"({"n_tasks": 2, "train": {"bogus": 1}})";
    CHECK_THROWS_WITH_AS(load_experiment_config(path),
                         doctest::Contains("unknown key"), std::runtime_error);
  }
  SUBCASE("validation names the offending field") {
    ExperimentConfig bad = cfg;
    bad.n_tasks = 0;
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("n_tasks"),
                         std::invalid_argument);
    bad = cfg;
    bad.train.net.image_size = 24;
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("image_size"),
                         std::invalid_argument);
  }
}

TEST_CASE("gen-demos writes per-task datasets and is idempotent") {
  ExperimentConfig cfg = tiny_experiment();
  std::string path = write_config(cfg, "gen");
  fs::path out_dir = "/tmp/cilab_cli_demos";
  fs::remove_all(out_dir);

  std::string out_text;
  CHECK(run({"gen-demos", path, "--out", out_dir.string()}, &out_text) ==
        kExitOk);
  CHECK(fs::exists(out_dir / "suite.json"));
  for (int t = 1; t <= 2; ++t) {
    auto demos = corpus::load_dataset(out_dir.string(), t);
    CHECK(demos.trajectories.size() == 5);
  }

  auto first = dir_contents(out_dir);
  CHECK(run({"gen-demos", path, "--out", out_dir.string()}) == kExitOk);
  CHECK(dir_contents(out_dir) == first);  // byte-identical rerun

  SUBCASE("invalid config exits 2 naming the field") {
    ExperimentConfig bad = cfg;
    bad.n_tasks = 0;
    std::string bad_path = write_config(bad, "gen_bad");
    std::string err_text;
    CHECK(run({"gen-demos", bad_path, "--out", out_dir.string()}, nullptr,
              &err_text) == kExitUsage);
    CHECK(err_text.find("n_tasks") != std::string::npos);
  }
}

TEST_CASE("train runs a method and writes the run directory") {
  ExperimentConfig cfg = tiny_experiment();
  std::string path = write_config(cfg, "train");
  fs::path out_root = "/tmp/cilab_cli_train";
  fs::remove_all(out_root);

  std::string out_text;
  CHECK(run({"train", path, "--method", "cril", "--seed", "9", "--out",
             out_root.string()},
            &out_text) == kExitOk);
  CHECK(out_text.find("omega_base") != std::string::npos);

  fs::path run_dir = out_root / "runs" / "cril_seed9";
  REQUIRE(fs::exists(run_dir / "record.csv"));
  std::ifstream rec(run_dir / "record.csv");
  std::string line;
  std::getline(rec, line);  // header
  int rows = 0;
  while (std::getline(rec, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 3);  // (1,1), (2,1), (2,2)

  SUBCASE("unknown method exits 2 and lists the strategies") {
    std::string err_text;
    CHECK(run({"train", path, "--method", "foo"}, nullptr, &err_text) ==
          kExitUsage);
    for (auto k : replay::kAllStrategies)
      CHECK(err_text.find(replay::to_string(k)) != std::string::npos);
  }
}

TEST_CASE("report aggregates runs; plots mirror the CSV numbers") {
  ExperimentConfig cfg = tiny_experiment();
  cfg.train.epochs = 2;
  std::string path = write_config(cfg, "report");
  fs::path out_root = "/tmp/cilab_cli_report_runs";
  fs::remove_all(out_root);
  for (const char* seed : {"1", "2"})
    REQUIRE(run({"train", path, "--method", "finetune", "--seed", seed,
                 "--out", out_root.string()}) == kExitOk);

  fs::path report_dir = "/tmp/cilab_cli_report_out";
  fs::remove_all(report_dir);
  std::vector<std::string> args{"report",
                                (out_root / "runs" / "finetune_seed1").string(),
                                (out_root / "runs" / "finetune_seed2").string(),
                                "--out", report_dir.string()};
  std::string out_text;
  CHECK(run(args, &out_text) == kExitOk);
  for (const char* name :
       {"forgetting_curves.csv", "forgetting_curves.svg", "success_rates.csv",
        "success_rates.svg", "omega.csv", "omega.md"})
    CHECK(fs::exists(report_dir / name));

  // The aggregated curve equals a recomputation from the two run summaries.
  auto s1 = load_run_summary((out_root / "runs" / "finetune_seed1").string());
  auto s2 = load_run_summary((out_root / "runs" / "finetune_seed2").string());
  std::map<int, std::pair<double, double>> expected;  // after_task -> mean,std
  for (int i = 1; i <= 2; ++i) {
    double a = 0, b = 0;
    for (int j = 1; j <= i; ++j) {
      a += s1.matrix.at(i, j);
      b += s2.matrix.at(i, j);
    }
    a /= i;
    b /= i;
    double mean = (a + b) / 2;
    double stddev = std::sqrt(((a - mean) * (a - mean) +
                               (b - mean) * (b - mean)) / 2.0);
    expected[i] = {mean, stddev};
  }
  std::ifstream csv(report_dir / "forgetting_curves.csv");
  std::string line;
  std::getline(csv, line);
  CHECK(line == "method,after_task,mean_accuracy,std_accuracy,n_seeds");
  int seen = 0;
  while (std::getline(csv, line)) {
    std::istringstream row(line);
    std::string method, cell;
    std::getline(row, method, ',');
    CHECK(method == "finetune");
    std::getline(row, cell, ',');
    int after = std::stoi(cell);
    std::getline(row, cell, ',');
    CHECK(std::stod(cell) == doctest::Approx(expected[after].first));
    std::getline(row, cell, ',');
    CHECK(std::stod(cell) == doctest::Approx(expected[after].second));
    std::getline(row, cell, ',');
    CHECK(cell == "2");
    ++seen;
  }
  CHECK(seen == 2);

  SUBCASE("incomplete record names the missing cell") {
    fs::path broken = "/tmp/cilab_cli_broken_run";
    fs::remove_all(broken);
    fs::create_directories(broken);
    fs::copy(out_root / "runs" / "finetune_seed1" / "config.json",
             broken / "config.json");
    std::ofstream(broken / "record.csv")
        << "after_task,eval_task,accuracy,success_rate\n"
        << "1,1,0.5,0.5\n"
        << "2,2,0.5,0.5\n";  // (2,1) missing
    std::string err_text;
    CHECK(run({"report", broken.string(), "--out", report_dir.string()},
              nullptr, &err_text) == kExitRuntime);
    CHECK(err_text.find("after_task=2") != std::string::npos);
    CHECK(err_text.find("eval_task=1") != std::string::npos);
  }
  SUBCASE("empty run dir gives a clear missing-file error") {
    fs::path empty = "/tmp/cilab_cli_empty_run";
    fs::remove_all(empty);
    fs::create_directories(empty);
    std::string err_text;
    CHECK(run({"report", empty.string(), "--out", report_dir.string()},
              nullptr, &err_text) == kExitRuntime);
    CHECK(err_text.find("config.json") != std::string::npos);
  }
}

TEST_CASE("pseudo montage is emitted for generative runs") {
  ExperimentConfig cfg = tiny_experiment();
  std::string path = write_config(cfg, "montage");
  fs::path out_root = "/tmp/cilab_cli_montage";
  fs::remove_all(out_root);
  REQUIRE(run({"train", path, "--method", "cril", "--seed", "4", "--out",
               out_root.string()}) == kExitOk);
  fs::path report_dir = out_root / "report";
  CHECK(run({"report", (out_root / "runs" / "cril_seed4").string(), "--out",
             report_dir.string()}) == kExitOk);
  CHECK(fs::exists(report_dir / "pseudo_cril_seed4.png"));
}

TEST_CASE("usage errors and env-var output root") {
  std::string err_text;
  CHECK(run({"frobnicate"}, nullptr, &err_text) == kExitUsage);
  CHECK(run({}, nullptr, &err_text) == kExitUsage);

  setenv(kOutRootEnv, "/tmp/cilab_env_root", 1);
  CHECK(default_out_root() == "/tmp/cilab_env_root");
  unsetenv(kOutRootEnv);
  CHECK(default_out_root() == "cilab_out");
}
