// The continual training driver: per-task buffer preparation, interleaved
// policy / GAN / predictor updates, evaluation after every task, and
// checkpointing across the task sequence.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cilab/corpus.hpp"
#include "cilab/evalkit.hpp"
#include "cilab/nets.hpp"
#include "cilab/replay.hpp"

namespace cilab::loop {

struct TrainConfig {
  // Data volumes.
  int m_demos = 10;
  int heldout_demos = 10;
  int eval_episodes = 20;

  // Optimization.
  int epochs = 20;
  int batch_size = 32;
  // Steps per epoch default to ceil(buffer pairs / batch_size); these cap or
  // override that count so late-task buffers don't blow up the step budget.
  int max_steps_per_epoch = 0;  // 0 = uncapped
  int gan_steps_per_epoch = 0;  // 0 = same as the policy step count
  int critic_steps = 5;        // critic updates per generator update
  double gp_weight = 10.0;
  nets::OptimConfig optim;
  nets::GanMode gan_mode = nets::GanMode::wgan_gp;

  // Which networks train alongside the policy. run_continual narrows these
  // to the models the active strategy actually consumes.
  bool train_gan = true;
  bool train_predictor = true;
  // CRIL default: the generator models first frames only (its rollout seeds);
  // false trains it on every buffer frame instead.
  bool gan_first_frames_only = true;

  // Strategy and rollout caps.
  replay::StrategyKind strategy = replay::StrategyKind::cril;
  int t_max = 40;
  int oversample = 10;              // original DGR
  int video_window = 4;             // video GAN training unroll length
  nets::ActMode cril_act_mode = nets::ActMode::greedy;

  // Geometry.
  nets::NetConfig net;
  int video_content_dim = 32;
  int video_motion_dim = 16;

  // Bookkeeping.
  std::uint64_t seed = 0;
  int eval_cadence = 0;  // epochs between mid-task diagnostics; 0 = off
  std::string run_name = "run";
  std::string out_root;  // empty: keep everything in memory only
  int pseudo_dump_limit = 4;  // trajectories dumped to pseudo_samples/

  void validate() const;  // throws std::invalid_argument
};

struct LossRow {
  int task = 0;
  int epoch = 0;
  std::string net;  // "policy", "critic", "generator", "predictor", ...
  double value = 0.0;
};

// Mid-task diagnostic accuracy points (eval_cadence > 0).
struct DiagRow {
  int task = 0;
  int epoch = 0;
  double accuracy = 0.0;
};

struct RunRecord {
  replay::StrategyKind strategy = replay::StrategyKind::cril;
  std::uint64_t seed = 0;
  evalkit::AccuracyMatrix matrix;
  std::vector<std::vector<double>> success;  // success[i-1][j-1], j <= i
  std::vector<std::string> checkpoint_paths;
  std::vector<std::uint64_t> checkpoint_hashes;     // after task t
  std::vector<std::uint64_t> generation_source_hashes;  // bundle used for task t's pseudo data (t >= 2)
  std::vector<double> task_seconds;
  std::vector<LossRow> losses;
  std::vector<DiagRow> diagnostics;
  // Hashes of every real frame the loop still holds after each task's buffer
  // teardown (rehearsal's archive; empty for every other strategy).
  std::vector<std::vector<std::size_t>> retained_real_frame_hashes;

  int tasks_completed() const { return matrix.n(); }
};

std::size_t frame_content_hash(const taskforge::Frame& f);

// One task's optimization per Algorithm-style interleaving: per epoch, GAN
// steps first, then predictor, then policy. Increments task_counter. Throws
// std::runtime_error with a diagnostic snapshot on any non-finite loss.
void train_task(nets::ModelBundle& bundle, const corpus::ReplayBuffer& buffer,
                const TrainConfig& cfg, int task_index,
                std::vector<LossRow>* losses = nullptr,
                std::vector<DiagRow>* diagnostics = nullptr,
                const corpus::DemoSet* heldout = nullptr);

// Trajectory DGR's separately trained video GAN (kept across tasks).
struct VideoGanState {
  replay::VideoGeneratorNet generator;
  nets::CriticNet image_critic;
  replay::SequenceCriticNet sequence_critic;
  nn::Adam opt_generator, opt_critics;
};

void train_video_gan(VideoGanState& state, const corpus::ReplayBuffer& buffer,
                     const TrainConfig& cfg, int task_index,
                     std::vector<LossRow>* losses = nullptr);

// The full continual run over the suite. Deterministic per cfg.seed. When
// cfg.out_root is set, persists runs/<name>/{config.json, checkpoints/,
// record.csv, losses.csv, pseudo_samples/}; a partial record is persisted if
// a task fails mid-run.
RunRecord run_continual(const std::vector<taskforge::TaskSpec>& suite,
                        const TrainConfig& cfg);

// Persistence helpers (also used by the cli module).
void save_run_record(const RunRecord& record, const std::string& run_dir);
void save_config_json(const TrainConfig& cfg, const std::string& path);
TrainConfig load_config_json(const std::string& path);  // strict: unknown keys rejected

// Text-level variants so other configs can embed a TrainConfig object.
std::string train_config_to_json_text(const TrainConfig& cfg);
TrainConfig train_config_from_json_text(const std::string& text);  // strict

}  // namespace cilab::loop
