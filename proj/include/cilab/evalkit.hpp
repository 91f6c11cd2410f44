// Evaluation: held-out state-action accuracy, environment rollout success,
// the continual-learning scores omega_base/new/all, and predictor rollout
// fidelity diagnostics.
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "cilab/corpus.hpp"
#include "cilab/nets.hpp"

namespace cilab::evalkit {

using corpus::DemoSet;
using taskforge::ActionId;
using taskforge::EnvState;
using taskforge::Frame;
using taskforge::TaskSpec;

// alpha[i][j] (1-based, j <= i): accuracy on task j after training task i.
// Rows are appended once per finished task, so row i carries i entries.
struct AccuracyMatrix {
  std::vector<std::vector<double>> rows;
  double alpha_ideal = 1.0;

  int n() const { return static_cast<int>(rows.size()); }
  void append_row(std::vector<double> row);
  double at(int i, int j) const;  // 1-based, j <= i
};

struct OmegaScores {
  double omega_base = 0.0;
  double omega_new = 0.0;
  double omega_all = 0.0;
};

enum class AlphaIdealMode { unit, joint_oracle };

double set_alpha_ideal(AlphaIdealMode mode,
                       std::optional<double> joint_accuracy = std::nullopt);

// Frame-conditioned policies (the learned net or any stand-in).
using FramePolicy = std::function<ActionId(const Frame&)>;
// State-conditioned policies (scripted experts) for rollout evaluation.
using StatePolicy = std::function<ActionId(const TaskSpec&, const EnvState&)>;

double eval_accuracy(const FramePolicy& policy, const DemoSet& heldout);
double eval_accuracy(const nets::PolicyNet& policy, const DemoSet& heldout);

double eval_success(const StatePolicy& policy, const TaskSpec& task,
                    int n_episodes, std::uint64_t seed);
double eval_success(const FramePolicy& policy, const TaskSpec& task,
                    int n_episodes, std::uint64_t seed);
double eval_success(const nets::PolicyNet& policy, const TaskSpec& task,
                    int n_episodes, std::uint64_t seed);

OmegaScores omega_scores(const AccuracyMatrix& matrix);

// Open-loop predictor rollouts against expert episodes: element k is the mean
// per-pixel MSE at step offset k+1, averaged over episodes that reach it.
std::vector<double> rollout_fidelity(const nets::PredictorNet& predictor,
                                     const TaskSpec& task, int n_episodes,
                                     std::uint64_t seed);

}  // namespace cilab::evalkit
