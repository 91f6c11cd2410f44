#include "cilab/loop.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <stdexcept>

namespace cilab::loop {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ad::Var;
using corpus::DemoSet;
using corpus::Provenance;
using corpus::ReplayBuffer;
using corpus::Trajectory;
using replay::StrategyKind;
using taskforge::Frame;

namespace {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return mix_seed(mix_seed(a, b), c);
}

// Stream of derived seeds for one task's training, so every batch draw and
// latent sample is reproducible and independent of evaluation order.
class SeedStream {
 public:
  SeedStream(std::uint64_t root, std::uint64_t stream)
      : state_(mix_seed(root, stream)) {}
  std::uint64_t next() { return state_ = mix_seed(state_, ++counter_); }

 private:
  std::uint64_t state_;
  std::uint64_t counter_ = 0;
};

std::vector<Var> vars_of(const nn::NamedParams& named) {
  std::vector<Var> out;
  out.reserve(named.size());
  for (const auto& [name, v] : named) out.push_back(v);
  return out;
}

double param_norm(const std::vector<Var>& params) {
  double s = 0.0;
  for (const auto& p : params)
    for (double v : p.data()) s += v * v;
  return std::sqrt(s);
}

void check_finite(double value, const char* net, int task, int epoch, int step,
                  const std::vector<Var>& params) {
  if (std::isfinite(value)) return;
  throw std::runtime_error(
      "train_task: non-finite " + std::string(net) + " loss at task " +
      std::to_string(task) + " epoch " + std::to_string(epoch) + " step " +
      std::to_string(step) + " (loss = " + std::to_string(value) +
      ", parameter norm = " + std::to_string(param_norm(params)) + ")");
}

// Uniform over the first frames of all buffer trajectories.
Var sample_first_frame_batch(const ReplayBuffer& buffer, int batch_size,
                             std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<std::size_t> d(0, buffer.entries.size() - 1);
  std::vector<const Frame*> batch;
  batch.reserve(static_cast<std::size_t>(batch_size));
  for (int i = 0; i < batch_size; ++i)
    batch.push_back(&buffer.entries[d(gen)].frames.front());
  return nets::frames_to_var(batch);
}

// Uniform over every frame in the buffer.
Var sample_any_frame_batch(const ReplayBuffer& buffer, int batch_size,
                           std::uint64_t seed) {
  std::vector<const Frame*> pool;
  for (const auto& t : buffer.entries)
    for (const auto& f : t.frames) pool.push_back(&f);
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<std::size_t> d(0, pool.size() - 1);
  std::vector<const Frame*> batch;
  batch.reserve(static_cast<std::size_t>(batch_size));
  for (int i = 0; i < batch_size; ++i) batch.push_back(pool[d(gen)]);
  return nets::frames_to_var(batch);
}

std::int64_t total_pairs(const ReplayBuffer& buffer) {
  auto c = buffer.composition();
  return c.real_pairs + c.pseudo_pairs;
}

}  // namespace

void TrainConfig::validate() const {
  auto positive = [](auto v, const char* what) {
    if (!(v > 0))
      throw std::invalid_argument(std::string("TrainConfig: ") + what +
                                  " must be positive");
  };
  positive(m_demos, "m_demos");
  positive(heldout_demos, "heldout_demos");
  positive(eval_episodes, "eval_episodes");
  if (epochs < 0)
    throw std::invalid_argument("TrainConfig: epochs must be >= 0");
  positive(batch_size, "batch_size");
  positive(critic_steps, "critic_steps");
  if (gp_weight < 0)
    throw std::invalid_argument("TrainConfig: gp_weight must be >= 0");
  positive(t_max, "t_max");
  positive(oversample, "oversample");
  positive(video_window, "video_window");
  positive(optim.lr_policy, "lr_policy");
  positive(optim.lr_generator, "lr_generator");
  positive(optim.lr_critic, "lr_critic");
  positive(optim.lr_predictor, "lr_predictor");
  positive(net.image_size, "net.image_size");
  if (run_name.empty())
    throw std::invalid_argument("TrainConfig: run_name must be non-empty");
}

std::size_t frame_content_hash(const Frame& f) {
  std::size_t h = 14695981039346656037ull;
  for (double v : f.pixels) {
    auto bits = static_cast<std::size_t>(v * 1e6 + 2e6);
    h ^= bits;
    h *= 1099511628211ull;
  }
  return h;
}

void train_task(nets::ModelBundle& bundle, const ReplayBuffer& buffer,
                const TrainConfig& cfg, int task_index,
                std::vector<LossRow>* losses,
                std::vector<DiagRow>* diagnostics, const DemoSet* heldout) {
  cfg.validate();
  if (buffer.entries.empty())
    throw std::invalid_argument("train_task: empty buffer");

  auto policy_params = vars_of(bundle.policy.named_params("policy."));
  auto generator_params = vars_of(bundle.generator.named_params("generator."));
  auto critic_params = vars_of(bundle.critic.named_params("critic."));
  auto predictor_params = vars_of(bundle.predictor.named_params("predictor."));

  const auto pairs = total_pairs(buffer);
  int steps = static_cast<int>(
      std::max<std::int64_t>(1, (pairs + cfg.batch_size - 1) / cfg.batch_size));
  if (cfg.max_steps_per_epoch > 0)
    steps = std::min(steps, cfg.max_steps_per_epoch);
  const int gan_steps =
      cfg.gan_steps_per_epoch > 0 ? cfg.gan_steps_per_epoch : steps;
  const bool has_transitions = [&] {
    for (const auto& t : buffer.entries)
      if (t.frames.size() >= 2 && !t.actions.empty()) return true;
    return false;
  }();

  SeedStream seeds(cfg.seed, mix_seed(0x7261696eull,
                                      static_cast<std::uint64_t>(task_index)));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double sum_policy = 0, sum_critic = 0, sum_gen = 0, sum_pred = 0;
    int n_critic = 0, n_gen = 0, n_pred = 0;

    if (cfg.train_gan) {
      for (int s = 0; s < gan_steps; ++s) {
        for (int c = 0; c < cfg.critic_steps; ++c) {
          Var real = cfg.gan_first_frames_only
                         ? sample_first_frame_batch(buffer, cfg.batch_size,
                                                    seeds.next())
                         : sample_any_frame_batch(buffer, cfg.batch_size,
                                                  seeds.next());
          Var fake;
          {
            ad::NoGradGuard ng;
            fake = bundle.generator.forward(nets::sample_latents(
                cfg.batch_size, cfg.net.z_dim, seeds.next()));
          }
          Var loss = cfg.gan_mode == nets::GanMode::wgan_gp
                         ? nets::critic_loss(bundle.critic, real, fake,
                                             cfg.gp_weight, seeds.next())
                         : nets::vanilla_critic_loss(bundle.critic, real, fake);
          check_finite(loss.item(), "critic", task_index, epoch, s,
                       critic_params);
          auto grads = ad::grad(loss, critic_params);
          bundle.opt_critic.step(critic_params, grads);
          sum_critic += loss.item();
          ++n_critic;
        }
        Var z = nets::sample_latents(cfg.batch_size, cfg.net.z_dim,
                                     seeds.next());
        Var gloss = cfg.gan_mode == nets::GanMode::wgan_gp
                        ? nets::generator_loss(bundle.critic, bundle.generator,
                                               z)
                        : nets::vanilla_generator_loss(bundle.critic,
                                                       bundle.generator, z);
        check_finite(gloss.item(), "generator", task_index, epoch, s,
                     generator_params);
        auto ggrads = ad::grad(gloss, generator_params);
        bundle.opt_generator.step(generator_params, ggrads);
        sum_gen += gloss.item();
        ++n_gen;
      }
    }

    if (cfg.train_predictor && has_transitions) {
      for (int s = 0; s < steps; ++s) {
        auto batch =
            corpus::sample_transitions(buffer, cfg.batch_size, seeds.next());
        Var loss = nets::predictor_loss(bundle.predictor, batch);
        check_finite(loss.item(), "predictor", task_index, epoch, s,
                     predictor_params);
        auto grads = ad::grad(loss, predictor_params);
        bundle.opt_predictor.step(predictor_params, grads);
        sum_pred += loss.item();
        ++n_pred;
      }
    }

    for (int s = 0; s < steps; ++s) {
      auto batch = corpus::sample_pairs(buffer, cfg.batch_size, seeds.next());
      Var loss = nets::policy_loss(bundle.policy, batch);
      check_finite(loss.item(), "policy", task_index, epoch, s, policy_params);
      auto grads = ad::grad(loss, policy_params);
      bundle.opt_policy.step(policy_params, grads);
      sum_policy += loss.item();
    }

    if (losses != nullptr) {
      losses->push_back({task_index, epoch, "policy", sum_policy / steps});
      if (n_critic > 0)
        losses->push_back({task_index, epoch, "critic", sum_critic / n_critic});
      if (n_gen > 0)
        losses->push_back({task_index, epoch, "generator", sum_gen / n_gen});
      if (n_pred > 0)
        losses->push_back(
            {task_index, epoch, "predictor", sum_pred / n_pred});
    }
    if (diagnostics != nullptr && heldout != nullptr && cfg.eval_cadence > 0 &&
        (epoch + 1) % cfg.eval_cadence == 0)
      diagnostics->push_back(
          {task_index, epoch, evalkit::eval_accuracy(bundle.policy, *heldout)});
  }

  ++bundle.task_counter;
}

void train_video_gan(VideoGanState& state, const ReplayBuffer& buffer,
                     const TrainConfig& cfg, int task_index,
                     std::vector<LossRow>* losses) {
  auto gen_params = vars_of(state.generator.named_params("video_generator."));
  auto critic_params = vars_of(state.image_critic.named_params("video_image_critic."));
  for (auto& [name, v] :
       state.sequence_critic.named_params("video_sequence_critic."))
    critic_params.push_back(v);

  int steps = static_cast<int>(std::max<std::int64_t>(
      1, (total_pairs(buffer) + cfg.batch_size - 1) / cfg.batch_size));
  if (cfg.max_steps_per_epoch > 0)
    steps = std::min(steps, cfg.max_steps_per_epoch);
  if (cfg.gan_steps_per_epoch > 0) steps = cfg.gan_steps_per_epoch;
  const int window = cfg.video_window;
  const int n = cfg.batch_size;
  SeedStream seeds(cfg.seed, mix_seed(0x766964656full,
                                      static_cast<std::uint64_t>(task_index)));

  // Fixed-length real windows: uniform trajectory, uniform start, pad by
  // repeating the final frame.
  auto sample_real_windows = [&](std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_int_distribution<std::size_t> dt(0,
                                                  buffer.entries.size() - 1);
    std::vector<std::vector<const Frame*>> rows(
        static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const auto& traj = buffer.entries[dt(gen)];
      std::uniform_int_distribution<std::size_t> ds(0, traj.frames.size() - 1);
      std::size_t start = ds(gen);
      for (int k = 0; k < window; ++k) {
        std::size_t idx = std::min(start + static_cast<std::size_t>(k),
                                   traj.frames.size() - 1);
        rows[static_cast<std::size_t>(i)].push_back(&traj.frames[idx]);
      }
    }
    std::vector<Var> steps_out;
    for (int k = 0; k < window; ++k) {
      std::vector<const Frame*> batch;
      for (int i = 0; i < n; ++i)
        batch.push_back(rows[static_cast<std::size_t>(i)]
                            [static_cast<std::size_t>(k)]);
      steps_out.push_back(nets::frames_to_var(batch));
    }
    return steps_out;
  };

  auto content_latents = [&](std::uint64_t seed) {
    nn::Rng rng(seed);
    return ad::constant(
        rng.gaussian_vector(static_cast<std::size_t>(n) *
                            static_cast<std::size_t>(cfg.video_content_dim)),
        {n, cfg.video_content_dim});
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double sum_c = 0, sum_g = 0;
    int n_c = 0, n_g = 0;
    for (int s = 0; s < steps; ++s) {
      for (int c = 0; c < cfg.critic_steps; ++c) {
        auto real_seq = sample_real_windows(seeds.next());
        std::vector<Var> fake_seq;
        {
          ad::NoGradGuard ng;
          fake_seq = state.generator.unroll(content_latents(seeds.next()),
                                            window);
        }
        Var loss = replay::video_critic_loss(state.image_critic,
                                             state.sequence_critic, real_seq,
                                             fake_seq, cfg.gp_weight,
                                             seeds.next());
        check_finite(loss.item(), "video_critic", task_index, epoch, s,
                     critic_params);
        auto grads = ad::grad(loss, critic_params);
        state.opt_critics.step(critic_params, grads);
        sum_c += loss.item();
        ++n_c;
      }
      Var gloss = replay::video_generator_loss(
          state.image_critic, state.sequence_critic,
          state.generator.unroll(content_latents(seeds.next()), window));
      check_finite(gloss.item(), "video_generator", task_index, epoch, s,
                   gen_params);
      auto ggrads = ad::grad(gloss, gen_params);
      state.opt_generator.step(gen_params, ggrads);
      sum_g += gloss.item();
      ++n_g;
    }
    if (losses != nullptr && n_c > 0) {
      losses->push_back({task_index, epoch, "video_critic", sum_c / n_c});
      losses->push_back({task_index, epoch, "video_generator", sum_g / n_g});
    }
  }
}

namespace {

void write_record_csv(const RunRecord& record, const fs::path& path) {
  std::ofstream out(path);
  out << "after_task,eval_task,accuracy,success_rate\n";
  for (int i = 1; i <= record.matrix.n(); ++i)
    for (int j = 1; j <= i; ++j)
      out << i << "," << j << "," << record.matrix.at(i, j) << ","
          << record.success[static_cast<std::size_t>(i - 1)]
                           [static_cast<std::size_t>(j - 1)]
          << "\n";
}

void write_losses_csv(const std::vector<LossRow>& losses,
                      const fs::path& path) {
  std::ofstream out(path);
  out << "task,epoch,net,loss\n";
  for (const auto& row : losses)
    out << row.task << "," << row.epoch << "," << row.net << "," << row.value
        << "\n";
}

}  // namespace

void save_run_record(const RunRecord& record, const std::string& run_dir) {
  fs::create_directories(run_dir);
  write_record_csv(record, fs::path(run_dir) / "record.csv");
  write_losses_csv(record.losses, fs::path(run_dir) / "losses.csv");
}

RunRecord run_continual(const std::vector<taskforge::TaskSpec>& suite,
                        const TrainConfig& cfg) {
  cfg.validate();
  if (suite.empty())
    throw std::invalid_argument("run_continual: empty task suite");
  for (const auto& task : suite)
    if (task.image_size != cfg.net.image_size)
      throw std::invalid_argument(
          "run_continual: task image_size does not match net config");

  RunRecord record;
  record.strategy = cfg.strategy;
  record.seed = cfg.seed;

  fs::path run_dir;
  const bool persist = !cfg.out_root.empty();
  if (persist) {
    run_dir = fs::path(cfg.out_root) / "runs" / cfg.run_name;
    fs::create_directories(run_dir / "checkpoints");
    fs::create_directories(run_dir / "pseudo_samples");
    save_config_json(cfg, (run_dir / "config.json").string());
  }

  nets::ModelBundle bundle(cfg.net, cfg.optim, mix_seed(cfg.seed, 0x696e6974ull));

  std::vector<DemoSet> archive;  // rehearsal only
  VideoGanState video;
  if (cfg.strategy == StrategyKind::trajectory_dgr) {
    nn::Rng vrng(mix_seed(cfg.seed, 0x76696e69ull));
    replay::VideoGenConfig vcfg;
    vcfg.image = cfg.net;
    vcfg.content_dim = cfg.video_content_dim;
    vcfg.motion_dim = cfg.video_motion_dim;
    vcfg.max_len = cfg.t_max;
    video.generator = replay::VideoGeneratorNet(vcfg, vrng);
    video.image_critic = nets::CriticNet(cfg.net, vrng);
    video.sequence_critic = replay::SequenceCriticNet(cfg.net, vrng);
    nn::AdamConfig gcfg{cfg.optim.lr_generator, cfg.optim.adam_beta1_gan,
                        0.999, 1e-8};
    nn::AdamConfig ccfg{cfg.optim.lr_critic, cfg.optim.adam_beta1_gan, 0.999,
                        1e-8};
    video.opt_generator = nn::Adam(gcfg);
    video.opt_critics = nn::Adam(ccfg);
  }

  const int n_tasks = static_cast<int>(suite.size());
  try {
    for (int t = 1; t <= n_tasks; ++t) {
      auto t0 = std::chrono::steady_clock::now();
      const auto& task = suite[static_cast<std::size_t>(t - 1)];

      DemoSet demos = corpus::collect_demos(
          task, cfg.m_demos, mix_seed(cfg.seed, 0x64656d6full,
                                      static_cast<std::uint64_t>(t)));

      // Strategy data from the task-(t-1) models, before any update.
      std::vector<Trajectory> extra;
      bool extra_is_real = false;
      if (t >= 2) {
        record.generation_source_hashes.push_back(bundle.content_hash());
        std::uint64_t gen_seed =
            mix_seed(cfg.seed, 0x67656e65ull, static_cast<std::uint64_t>(t));
        switch (cfg.strategy) {
          case StrategyKind::finetune:
            extra = replay::finetune_provide(t);
            break;
          case StrategyKind::rehearsal:
            extra = replay::rehearsal_provide(archive, t);
            extra_is_real = true;
            break;
          case StrategyKind::original_dgr:
            extra = replay::original_dgr_generate(
                bundle, cfg.m_demos, t, corpus::mean_demo_length(demos),
                cfg.oversample, gen_seed);
            break;
          case StrategyKind::trajectory_dgr:
            extra = replay::trajectory_dgr_generate(video.generator,
                                                    bundle.policy, cfg.m_demos,
                                                    t, gen_seed);
            break;
          case StrategyKind::cril:
            extra = replay::cril_generate(bundle, cfg.m_demos, t, cfg.t_max,
                                          gen_seed, cfg.cril_act_mode);
            break;
        }
      }

      if (persist && !extra.empty() && !extra_is_real) {
        std::vector<Trajectory> dump(
            extra.begin(),
            extra.begin() + std::min<std::size_t>(
                                extra.size(),
                                static_cast<std::size_t>(cfg.pseudo_dump_limit)));
        corpus::save_pseudo(dump, task,
                            (run_dir / "pseudo_samples").string(), t);
      }

      ReplayBuffer buffer;
      if (extra_is_real) {
        // Rehearsal mixes archived real demos directly; buffer_prepare's
        // provenance gate is for generated data.
        buffer.entries = demos.trajectories;
        for (auto& tr : extra) buffer.entries.push_back(std::move(tr));
        buffer.task_index = t;
      } else {
        buffer = corpus::buffer_prepare(demos, std::move(extra));
        buffer.task_index = t;
      }

      // Strategy-aware training: only optimize the models the strategy's
      // generation path consumes (policy always trains).
      TrainConfig task_cfg = cfg;
      switch (cfg.strategy) {
        case StrategyKind::finetune:
        case StrategyKind::rehearsal:
          task_cfg.train_gan = false;
          task_cfg.train_predictor = false;
          break;
        case StrategyKind::original_dgr:
          task_cfg.train_predictor = false;
          task_cfg.gan_first_frames_only = false;
          break;
        case StrategyKind::trajectory_dgr:
          task_cfg.train_gan = false;  // the video GAN trains instead
          task_cfg.train_predictor = false;
          break;
        case StrategyKind::cril:
          break;
      }

      DemoSet heldout = corpus::collect_demos(
          task, cfg.heldout_demos,
          mix_seed(cfg.seed, 0x68656c64ull, static_cast<std::uint64_t>(t)));
      train_task(bundle, buffer, task_cfg, t, &record.losses,
                 &record.diagnostics, &heldout);
      if (cfg.strategy == StrategyKind::trajectory_dgr)
        train_video_gan(video, buffer, task_cfg, t, &record.losses);

      if (cfg.strategy == StrategyKind::rehearsal) archive.push_back(demos);

      // Evaluate on all tasks so far; held-out demos are re-collected from
      // the environment on demand, so no real prior-task frames persist.
      std::vector<double> acc_row, suc_row;
      for (int j = 1; j <= t; ++j) {
        const auto& tj = suite[static_cast<std::size_t>(j - 1)];
        DemoSet hj = j == t ? heldout
                            : corpus::collect_demos(
                                  tj, cfg.heldout_demos,
                                  mix_seed(cfg.seed, 0x68656c64ull,
                                           static_cast<std::uint64_t>(j)));
        acc_row.push_back(evalkit::eval_accuracy(bundle.policy, hj));
        suc_row.push_back(evalkit::eval_success(
            bundle.policy, tj, cfg.eval_episodes,
            mix_seed(cfg.seed, 0x6576616cull,
                     static_cast<std::uint64_t>(t * 1000 + j))));
      }
      record.matrix.append_row(acc_row);
      record.success.push_back(suc_row);

      buffer.teardown();
      std::vector<std::size_t> retained;
      for (const auto& d : archive)
        for (const auto& tr : d.trajectories)
          for (const auto& f : tr.frames)
            retained.push_back(frame_content_hash(f));
      record.retained_real_frame_hashes.push_back(std::move(retained));

      if (persist) {
        std::string ckpt =
            (run_dir / "checkpoints" / ("task_" + std::to_string(t) + ".ckpt"))
                .string();
        bundle.save_checkpoint(ckpt);
        record.checkpoint_paths.push_back(ckpt);
      } else {
        record.checkpoint_paths.emplace_back();
      }
      record.checkpoint_hashes.push_back(bundle.content_hash());

      record.task_seconds.push_back(
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count());
    }
  } catch (...) {
    if (persist) save_run_record(record, run_dir.string());
    throw;
  }

  if (persist) save_run_record(record, run_dir.string());
  return record;
}

std::string train_config_to_json_text(const TrainConfig& cfg) {
  json j{{"m_demos", cfg.m_demos},
         {"heldout_demos", cfg.heldout_demos},
         {"eval_episodes", cfg.eval_episodes},
         {"epochs", cfg.epochs},
         {"batch_size", cfg.batch_size},
         {"max_steps_per_epoch", cfg.max_steps_per_epoch},
         {"gan_steps_per_epoch", cfg.gan_steps_per_epoch},
         {"critic_steps", cfg.critic_steps},
         {"gp_weight", cfg.gp_weight},
         {"lr_policy", cfg.optim.lr_policy},
         {"lr_generator", cfg.optim.lr_generator},
         {"lr_critic", cfg.optim.lr_critic},
         {"lr_predictor", cfg.optim.lr_predictor},
         {"adam_beta1_gan", cfg.optim.adam_beta1_gan},
         {"gan_mode",
          cfg.gan_mode == nets::GanMode::wgan_gp ? "wgan_gp" : "vanilla"},
         {"train_gan", cfg.train_gan},
         {"train_predictor", cfg.train_predictor},
         {"gan_first_frames_only", cfg.gan_first_frames_only},
         {"strategy", replay::to_string(cfg.strategy)},
         {"t_max", cfg.t_max},
         {"oversample", cfg.oversample},
         {"video_window", cfg.video_window},
         {"cril_act_mode",
          cfg.cril_act_mode == nets::ActMode::greedy ? "greedy" : "sample"},
         {"image_size", cfg.net.image_size},
         {"z_dim", cfg.net.z_dim},
         {"base_channels", cfg.net.base_channels},
         {"head_hidden", cfg.net.head_hidden},
         {"predictor_bottleneck", cfg.net.predictor_bottleneck},
         {"action_embed", cfg.net.action_embed},
         {"leaky_slope", cfg.net.leaky_slope},
         {"video_content_dim", cfg.video_content_dim},
         {"video_motion_dim", cfg.video_motion_dim},
         {"seed", cfg.seed},
         {"eval_cadence", cfg.eval_cadence},
         {"run_name", cfg.run_name},
         {"out_root", cfg.out_root},
         {"pseudo_dump_limit", cfg.pseudo_dump_limit}};
  return j.dump(2);
}

void save_config_json(const TrainConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("save_config_json: cannot write " + path);
  out << train_config_to_json_text(cfg) << "\n";
}

TrainConfig load_config_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_config_json: cannot open " + path);
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return train_config_from_json_text(text.str());
  } catch (const std::runtime_error& e) {
    // Re-tag so the message names the file-level entry point.
    throw std::runtime_error("load_config_json(" + path + "): " + e.what());
  }
}

TrainConfig train_config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("load_config_json: malformed JSON: ") +
                             e.what());
  }

  TrainConfig cfg;
  const std::set<std::string> known{
      "m_demos",        "heldout_demos",  "eval_episodes",
      "epochs",         "batch_size",     "critic_steps",
      "max_steps_per_epoch",              "gan_steps_per_epoch",
      "gp_weight",      "lr_policy",      "lr_generator",
      "lr_critic",      "lr_predictor",   "adam_beta1_gan",
      "gan_mode",       "train_gan",      "train_predictor",
      "gan_first_frames_only",            "strategy",
      "t_max",          "oversample",     "video_window",
      "cril_act_mode",  "image_size",     "z_dim",
      "base_channels",  "head_hidden",    "predictor_bottleneck",
      "action_embed",   "leaky_slope",    "video_content_dim",
      "video_motion_dim",                 "seed",
      "eval_cadence",   "run_name",       "out_root",
      "pseudo_dump_limit"};
  for (const auto& [key, value] : j.items())
    if (known.count(key) == 0)
      throw std::runtime_error("load_config_json: unknown key '" + key + "'");

  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key))
        field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("m_demos", cfg.m_demos);
    get("heldout_demos", cfg.heldout_demos);
    get("eval_episodes", cfg.eval_episodes);
    get("epochs", cfg.epochs);
    get("batch_size", cfg.batch_size);
    get("max_steps_per_epoch", cfg.max_steps_per_epoch);
    get("gan_steps_per_epoch", cfg.gan_steps_per_epoch);
    get("critic_steps", cfg.critic_steps);
    get("gp_weight", cfg.gp_weight);
    get("lr_policy", cfg.optim.lr_policy);
    get("lr_generator", cfg.optim.lr_generator);
    get("lr_critic", cfg.optim.lr_critic);
    get("lr_predictor", cfg.optim.lr_predictor);
    get("adam_beta1_gan", cfg.optim.adam_beta1_gan);
    if (j.contains("gan_mode")) {
      auto mode = j.at("gan_mode").get<std::string>();
      if (mode == "wgan_gp") cfg.gan_mode = nets::GanMode::wgan_gp;
      else if (mode == "vanilla") cfg.gan_mode = nets::GanMode::vanilla;
      else throw std::runtime_error("load_config_json: bad gan_mode '" + mode + "'");
    }
    get("train_gan", cfg.train_gan);
    get("train_predictor", cfg.train_predictor);
    get("gan_first_frames_only", cfg.gan_first_frames_only);
    if (j.contains("strategy"))
      cfg.strategy =
          replay::strategy_from_string(j.at("strategy").get<std::string>());
    get("t_max", cfg.t_max);
    get("oversample", cfg.oversample);
    get("video_window", cfg.video_window);
    if (j.contains("cril_act_mode")) {
      auto mode = j.at("cril_act_mode").get<std::string>();
      if (mode == "greedy") cfg.cril_act_mode = nets::ActMode::greedy;
      else if (mode == "sample") cfg.cril_act_mode = nets::ActMode::sample;
      else throw std::runtime_error("load_config_json: bad cril_act_mode '" + mode + "'");
    }
    get("image_size", cfg.net.image_size);
    get("z_dim", cfg.net.z_dim);
    get("base_channels", cfg.net.base_channels);
    get("head_hidden", cfg.net.head_hidden);
    get("predictor_bottleneck", cfg.net.predictor_bottleneck);
    get("action_embed", cfg.net.action_embed);
    get("leaky_slope", cfg.net.leaky_slope);
    get("video_content_dim", cfg.video_content_dim);
    get("video_motion_dim", cfg.video_motion_dim);
    get("seed", cfg.seed);
    get("eval_cadence", cfg.eval_cadence);
    get("run_name", cfg.run_name);
    get("out_root", cfg.out_root);
    get("pseudo_dump_limit", cfg.pseudo_dump_limit);
  } catch (const json::exception& e) {
    throw std::runtime_error(
        std::string("load_config_json: bad field type: ") + e.what());
  }
  return cfg;
}

}  // namespace cilab::loop
