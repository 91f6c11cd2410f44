#include "cilab/cli.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <ostream>
#include <set>
#include <sstream>

#include "cilab/corpus.hpp"

namespace cilab::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::string strategy_list() {
  std::string s;
  for (auto k : replay::kAllStrategies) {
    if (!s.empty()) s += ", ";
    s += replay::to_string(k);
  }
  return s;
}

}  // namespace

std::string default_out_root() {
  if (const char* env = std::getenv(kOutRootEnv); env != nullptr && *env != 0)
    return env;
  return "cilab_out";
}

void ExperimentConfig::validate() const {
  if (n_tasks < 1)
    throw std::invalid_argument("ExperimentConfig: n_tasks must be >= 1");
  if (suite.grid_size < 6)
    throw std::invalid_argument("ExperimentConfig: grid_size must be >= 6");
  if (suite.image_size < 2 * suite.grid_size ||
      suite.image_size % suite.grid_size != 0)
    throw std::invalid_argument(
        "ExperimentConfig: image_size must be a multiple of grid_size and at "
        "least twice it");
  if (suite.max_steps < 1)
    throw std::invalid_argument("ExperimentConfig: max_steps must be >= 1");
  if (methods.empty())
    throw std::invalid_argument("ExperimentConfig: methods must be non-empty");
  if (train.net.image_size != suite.image_size)
    throw std::invalid_argument(
        "ExperimentConfig: train.image_size must match the suite image_size");
  train.validate();
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("load_experiment_config: cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error(
        std::string("load_experiment_config: malformed JSON: ") + e.what());
  }

  const std::set<std::string> known{"n_tasks",    "grid_size", "image_size",
                                    "max_steps",  "suite_seed", "methods",
                                    "out_root",   "train"};
  for (const auto& [key, value] : j.items())
    if (known.count(key) == 0)
      throw std::runtime_error("load_experiment_config: unknown key '" + key +
                               "'");

  ExperimentConfig cfg;
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key))
        field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("n_tasks", cfg.n_tasks);
    get("grid_size", cfg.suite.grid_size);
    get("image_size", cfg.suite.image_size);
    get("max_steps", cfg.suite.max_steps);
    get("suite_seed", cfg.suite_seed);
    get("out_root", cfg.out_root);
    if (j.contains("methods")) {
      cfg.methods.clear();
      for (const auto& name : j.at("methods"))
        cfg.methods.push_back(
            replay::strategy_from_string(name.get<std::string>()));
    }
    if (j.contains("train"))
      cfg.train = loop::train_config_from_json_text(j.at("train").dump());
  } catch (const json::exception& e) {
    throw std::runtime_error(
        std::string("load_experiment_config: bad field type: ") + e.what());
  }
  // A config that omits "train" still has to agree on image geometry.
  if (!j.contains("train") || !j.at("train").contains("image_size"))
    cfg.train.net.image_size = cfg.suite.image_size;
  return cfg;
}

void save_experiment_config(const ExperimentConfig& cfg,
                            const std::string& path) {
  json methods = json::array();
  for (auto k : cfg.methods) methods.push_back(replay::to_string(k));
  json j{{"n_tasks", cfg.n_tasks},
         {"grid_size", cfg.suite.grid_size},
         {"image_size", cfg.suite.image_size},
         {"max_steps", cfg.suite.max_steps},
         {"suite_seed", cfg.suite_seed},
         {"methods", methods},
         {"out_root", cfg.out_root},
         {"train", json::parse(loop::train_config_to_json_text(cfg.train))}};
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("save_experiment_config: cannot write " + path);
  out << j.dump(2) << "\n";
}

int cmd_gen_demos(const std::string& config_path, const std::string& out_dir,
                  std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  try {
    cfg = load_experiment_config(config_path);
    cfg.validate();
  } catch (const std::exception& e) {
    err << "gen-demos: " << e.what() << "\n";
    return kExitUsage;
  }
  try {
    auto suite = taskforge::make_suite(cfg.n_tasks, cfg.suite_seed, cfg.suite);
    fs::create_directories(out_dir);
    taskforge::save_suite(suite, (fs::path(out_dir) / "suite.json").string());
    for (int t = 1; t <= cfg.n_tasks; ++t) {
      // Same derived seed run_continual uses, so dumped demos match the
      // training data of a run with the same config seed.
      auto demos = corpus::collect_demos(
          suite[static_cast<std::size_t>(t - 1)], cfg.train.m_demos,
          mix_seed(mix_seed(cfg.train.seed, 0x64656d6full),
                   static_cast<std::uint64_t>(t)));
      corpus::save_dataset(demos, out_dir);
      out << "task " << t << ": " << demos.trajectories.size()
          << " trajectories\n";
    }
  } catch (const std::exception& e) {
    err << "gen-demos: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

namespace {

void print_run_summary(const loop::RunRecord& record, std::ostream& out) {
  const int n = record.matrix.n();
  out << "strategy " << replay::to_string(record.strategy) << ", seed "
      << record.seed << ", " << n << " tasks\n";
  out << std::fixed << std::setprecision(3);
  for (int i = 1; i <= n; ++i) {
    out << "  after task " << i << ": acc";
    for (int j = 1; j <= i; ++j) out << " " << record.matrix.at(i, j);
    out << " | success";
    for (int j = 1; j <= i; ++j)
      out << " "
          << record.success[static_cast<std::size_t>(i - 1)]
                           [static_cast<std::size_t>(j - 1)];
    out << "\n";
  }
  if (n >= 2) {
    auto s = evalkit::omega_scores(record.matrix);
    out << "  omega_base " << s.omega_base << "  omega_new " << s.omega_new
        << "  omega_all " << s.omega_all << "\n";
  }
  out.unsetf(std::ios::fixed);
}

}  // namespace

int cmd_train(const std::string& config_path, const std::string& method,
              std::optional<std::uint64_t> seed, const std::string& out_dir,
              std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  std::vector<replay::StrategyKind> methods;
  try {
    cfg = load_experiment_config(config_path);
    cfg.validate();
    if (method.empty()) {
      methods = cfg.methods;
    } else {
      try {
        methods.push_back(replay::strategy_from_string(method));
      } catch (const std::exception&) {
        err << "train: unknown method '" << method << "'; valid methods: "
            << strategy_list() << "\n";
        return kExitUsage;
      }
    }
  } catch (const std::exception& e) {
    err << "train: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    auto suite = taskforge::make_suite(cfg.n_tasks, cfg.suite_seed, cfg.suite);
    std::string root = !out_dir.empty()        ? out_dir
                       : !cfg.out_root.empty() ? cfg.out_root
                                               : default_out_root();
    for (auto strat : methods) {
      loop::TrainConfig train = cfg.train;
      train.strategy = strat;
      if (seed.has_value()) train.seed = *seed;
      train.out_root = root;
      train.run_name =
          replay::to_string(strat) + "_seed" + std::to_string(train.seed);
      auto record = loop::run_continual(suite, train);
      print_run_summary(record, out);
      out << "run dir: "
          << (fs::path(root) / "runs" / train.run_name).string() << "\n";
    }
  } catch (const std::exception& e) {
    err << "train: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err) {
  CLI::App app{
      "cilab: continual imitation learning with deep generative replay"};
  app.require_subcommand(1);

  std::string config_path, method, out_dir;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> run_dirs;

  auto* gen = app.add_subcommand("gen-demos",
                                 "Collect expert demonstrations to disk");
  gen->add_option("config", config_path, "Experiment config JSON")->required();
  gen->add_option("--out", out_dir, "Output directory");

  auto* train =
      app.add_subcommand("train", "Run a continual-learning experiment");
  train->add_option("config", config_path, "Experiment config JSON")
      ->required();
  train->add_option("--method", method,
                    "Strategy (" + strategy_list() + "); default: all "
                    "configured methods");
  train->add_option("--seed", seed, "Override the training seed");
  train->add_option("--out", out_dir, "Output root for run directories");

  auto* report =
      app.add_subcommand("report", "Aggregate runs into plots and tables");
  report->add_option("run_dirs", run_dirs, "Completed run directories")
      ->required();
  report->add_option("--out", out_dir, "Report output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      out << app.help();
      return kExitOk;
    }
    err << e.what() << "\n";
    return kExitUsage;
  }

  if (gen->parsed())
    return cmd_gen_demos(
        config_path,
        out_dir.empty() ? default_out_root() + "/demos" : out_dir, out, err);
  if (train->parsed())
    return cmd_train(config_path, method, seed, out_dir, out, err);
  return cmd_report(
      run_dirs, out_dir.empty() ? default_out_root() + "/report" : out_dir,
      out, err);
}

}  // namespace cilab::cli
