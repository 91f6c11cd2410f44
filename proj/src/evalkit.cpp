#include "cilab/evalkit.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cilab::evalkit {

namespace {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

void AccuracyMatrix::append_row(std::vector<double> row) {
  if (row.size() != rows.size() + 1)
    throw std::invalid_argument(
        "AccuracyMatrix: row " + std::to_string(rows.size() + 1) +
        " must carry exactly " + std::to_string(rows.size() + 1) + " entries");
  for (double a : row)
    if (!(a >= 0.0 && a <= 1.0))
      throw std::invalid_argument("AccuracyMatrix: accuracy outside [0, 1]");
  rows.push_back(std::move(row));
}

double AccuracyMatrix::at(int i, int j) const {
  if (i < 1 || i > n() || j < 1 || j > i)
    throw std::out_of_range("AccuracyMatrix: index (" + std::to_string(i) +
                            ", " + std::to_string(j) + ") out of range");
  return rows[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j - 1)];
}

double set_alpha_ideal(AlphaIdealMode mode,
                       std::optional<double> joint_accuracy) {
  if (mode == AlphaIdealMode::unit) return 1.0;
  if (!joint_accuracy.has_value())
    throw std::invalid_argument(
        "set_alpha_ideal: joint_oracle mode requires the jointly trained "
        "policy's accuracy");
  if (!(*joint_accuracy > 0.0))
    throw std::invalid_argument("set_alpha_ideal: accuracy must be positive");
  return *joint_accuracy;
}

double eval_accuracy(const FramePolicy& policy, const DemoSet& heldout) {
  std::int64_t total = 0, correct = 0;
  for (const auto& traj : heldout.trajectories)
    for (std::size_t k = 0; k < traj.n_pairs(); ++k) {
      ++total;
      if (policy(traj.frames[k]) == traj.actions[k]) ++correct;
    }
  if (total == 0)
    throw std::invalid_argument("eval_accuracy: held-out set has no pairs");
  return static_cast<double>(correct) / static_cast<double>(total);
}

double eval_accuracy(const nets::PolicyNet& policy, const DemoSet& heldout) {
  return eval_accuracy(
      [&](const Frame& f) {
        return nets::act(policy, f, nets::ActMode::greedy);
      },
      heldout);
}

double eval_success(const StatePolicy& policy, const TaskSpec& task,
                    int n_episodes, std::uint64_t seed) {
  if (n_episodes < 1)
    throw std::invalid_argument("eval_success: n_episodes must be >= 1");
  int wins = 0;
  for (int e = 0; e < n_episodes; ++e) {
    EnvState state =
        taskforge::reset(task, mix_seed(seed, static_cast<std::uint64_t>(e)));
    while (!state.done)
      state = taskforge::step(task, state, policy(task, state));
    if (state.succeeded) ++wins;
  }
  return static_cast<double>(wins) / static_cast<double>(n_episodes);
}

double eval_success(const FramePolicy& policy, const TaskSpec& task,
                    int n_episodes, std::uint64_t seed) {
  return eval_success(
      [&](const TaskSpec& t, const EnvState& s) {
        return policy(taskforge::render(t, s));
      },
      task, n_episodes, seed);
}

double eval_success(const nets::PolicyNet& policy, const TaskSpec& task,
                    int n_episodes, std::uint64_t seed) {
  return eval_success(
      [&](const Frame& f) {
        return nets::act(policy, f, nets::ActMode::greedy);
      },
      task, n_episodes, seed);
}

OmegaScores omega_scores(const AccuracyMatrix& matrix) {
  const int n = matrix.n();
  if (n < 2)
    throw std::domain_error(
        "omega_scores: undefined for fewer than 2 tasks (N = " +
        std::to_string(n) + ")");
  if (!(matrix.alpha_ideal > 0.0))
    throw std::invalid_argument("omega_scores: alpha_ideal must be positive");
  OmegaScores s;
  for (int i = 2; i <= n; ++i) {
    s.omega_base += matrix.at(i, 1) / matrix.alpha_ideal;
    s.omega_new += matrix.at(i, i);
    double mean = 0.0;
    for (int j = 1; j <= i; ++j) mean += matrix.at(i, j);
    mean /= static_cast<double>(i);
    s.omega_all += mean / matrix.alpha_ideal;
  }
  const double norm = 1.0 / static_cast<double>(n - 1);
  s.omega_base *= norm;
  s.omega_new *= norm;
  s.omega_all *= norm;
  return s;
}

std::vector<double> rollout_fidelity(const nets::PredictorNet& predictor,
                                     const TaskSpec& task, int n_episodes,
                                     std::uint64_t seed) {
  if (n_episodes < 1)
    throw std::invalid_argument("rollout_fidelity: n_episodes must be >= 1");
  std::vector<double> sums;
  std::vector<int> counts;
  for (int e = 0; e < n_episodes; ++e) {
    EnvState state =
        taskforge::reset(task, mix_seed(seed, static_cast<std::uint64_t>(e)));
    std::vector<Frame> true_frames{taskforge::render(task, state)};
    std::vector<ActionId> actions;
    while (!state.done) {
      ActionId a = taskforge::expert_action(task, state);
      actions.push_back(a);
      state = taskforge::step(task, state, a);
      true_frames.push_back(taskforge::render(task, state));
    }
    Frame rolled = true_frames[0];
    for (std::size_t k = 0; k < actions.size(); ++k) {
      rolled = nets::predict_next(predictor, rolled, actions[k]);
      const Frame& truth = true_frames[k + 1];
      double mse = 0.0;
      for (std::size_t i = 0; i < truth.pixels.size(); ++i) {
        double d = rolled.pixels[i] - truth.pixels[i];
        mse += d * d;
      }
      mse /= static_cast<double>(truth.pixels.size());
      if (sums.size() <= k) {
        sums.push_back(0.0);
        counts.push_back(0);
      }
      sums[k] += mse;
      ++counts[k];
    }
  }
  std::vector<double> curve(sums.size());
  for (std::size_t k = 0; k < sums.size(); ++k)
    curve[k] = sums[k] / static_cast<double>(counts[k]);
  return curve;
}

}  // namespace cilab::evalkit
