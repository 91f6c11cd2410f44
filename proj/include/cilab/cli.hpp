// Command-line front end: demo generation, experiment launch, and report
// emission (forgetting curves, success-rate bars, pseudo-sample montages,
// omega tables). Commands return process exit codes: 0 success, 1 runtime
// failure, 2 usage/config error.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include "cilab/evalkit.hpp"
#include "cilab/loop.hpp"

namespace cilab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// Default output root when --out is omitted: this env var, else "./cilab_out".
inline constexpr const char* kOutRootEnv = "CILAB_OUT_ROOT";
std::string default_out_root();

struct ExperimentConfig {
  int n_tasks = 4;
  taskforge::SuiteParams suite;  // grid_size, image_size, max_steps
  std::uint64_t suite_seed = 7;
  loop::TrainConfig train;
  // Strategies to run when no --method override is given.
  std::vector<replay::StrategyKind> methods{
      std::begin(replay::kAllStrategies), std::end(replay::kAllStrategies)};
  std::string out_root;  // empty: resolved via default_out_root()

  void validate() const;  // throws std::invalid_argument naming the field
};

// Strict JSON (unknown keys rejected at both levels; the "train" object uses
// the loop module's schema).
ExperimentConfig load_experiment_config(const std::string& path);
void save_experiment_config(const ExperimentConfig& cfg,
                            const std::string& path);

// Writes suite.json plus one corpus-format dataset directory per task under
// out_dir. Deterministic: re-running overwrites with identical bytes.
int cmd_gen_demos(const std::string& config_path, const std::string& out_dir,
                  std::ostream& out, std::ostream& err);

// Runs run_continual for one method (or every configured method when empty)
// and prints the omega/success summary. seed overrides config when present.
int cmd_train(const std::string& config_path, const std::string& method,
              std::optional<std::uint64_t> seed, const std::string& out_dir,
              std::ostream& out, std::ostream& err);

// Aggregates completed run directories into CSV + markdown + SVG/PNG
// artifacts under out_dir. Plotted numbers equal the CSV numbers.
int cmd_report(const std::vector<std::string>& run_dirs,
               const std::string& out_dir, std::ostream& out,
               std::ostream& err);

// One parsed run directory (config.json + record.csv).
struct RunSummary {
  replay::StrategyKind strategy = replay::StrategyKind::finetune;
  std::uint64_t seed = 0;
  evalkit::AccuracyMatrix matrix;
  std::vector<std::vector<double>> success;  // lower triangular like matrix
  std::string dir;
};

// Throws std::runtime_error on missing files or an incomplete record (the
// message names the missing (after_task, eval_task) cell).
RunSummary load_run_summary(const std::string& run_dir);

// Full argv dispatcher used by the binary and the tests.
int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err);

}  // namespace cilab::cli
