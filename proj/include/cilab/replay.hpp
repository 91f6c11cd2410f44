// The five data-provisioning strategies behind one interface: each produces
// the pseudo (or archived) trajectories that join the new task's demos in the
// replay buffer.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cilab/corpus.hpp"
#include "cilab/nets.hpp"

namespace cilab::replay {

using ad::Var;
using corpus::DemoSet;
using corpus::Trajectory;
using nn::NamedParams;

enum class StrategyKind {
  finetune,
  rehearsal,
  original_dgr,
  trajectory_dgr,
  cril,
};

std::string to_string(StrategyKind kind);
StrategyKind strategy_from_string(const std::string& name);
inline constexpr StrategyKind kAllStrategies[] = {
    StrategyKind::finetune, StrategyKind::rehearsal,
    StrategyKind::original_dgr, StrategyKind::trajectory_dgr,
    StrategyKind::cril};

// Simplified MoCoGAN-style video generator for the Trajectory DGR baseline:
// one content latent per clip, a recurrent motion latent per step, and a
// shared per-frame decoder. Every sample emits exactly max_len frames.
struct VideoGenConfig {
  nets::NetConfig image;
  int content_dim = 32;
  int motion_dim = 16;
  int max_len = 20;

  bool operator==(const VideoGenConfig&) const = default;
};

class VideoGeneratorNet {
 public:
  VideoGeneratorNet() = default;
  VideoGeneratorNet(const VideoGenConfig& cfg, nn::Rng& rng);

  // Differentiable unroll of `len` frames from content latents {N, content_dim};
  // element k of the result is the step-k batch {N, 3, S, S} in (-1, 1).
  std::vector<Var> unroll(const Var& z_content, int len) const;
  NamedParams named_params(const std::string& prefix) const;
  const VideoGenConfig& config() const { return cfg_; }

 private:
  VideoGenConfig cfg_;
  nn::Linear init_fc_, rnn_in_, rnn_rec_, dec_fc_;
  nn::ConvTranspose2d up1_, up2_;
};

// Critic over two channel-stacked consecutive frames {N, 6, S, S}; paired
// with the image critic it scores short-range temporal coherence.
class SequenceCriticNet {
 public:
  SequenceCriticNet() = default;
  SequenceCriticNet(const nets::NetConfig& cfg, nn::Rng& rng);
  Var forward(const Var& stacked_pair) const;  // {N, 6, S, S} -> {N, 1}
  NamedParams named_params(const std::string& prefix) const;

 private:
  nets::NetConfig cfg_;
  nn::Conv2d c1_, c2_;
  nn::Linear fc1_, fc2_;
};

// Channel-concatenates two {N, 3, S, S} batches into {N, 6, S, S}.
Var stack_frame_pair(const Var& a, const Var& b);

// Wasserstein losses over whole fixed-length clips (per-step batches). The
// gradient penalty applies to the image critic on step-0 interpolates.
Var video_critic_loss(const nets::CriticNet& img_critic,
                      const SequenceCriticNet& seq_critic,
                      const std::vector<Var>& real_seq,
                      const std::vector<Var>& fake_seq, double gp_weight,
                      std::uint64_t rng_seed);
Var video_generator_loss(const nets::CriticNet& img_critic,
                         const SequenceCriticNet& seq_critic,
                         const std::vector<Var>& fake_seq);

// Forward-only clip sampling; n clips of max_len frames each.
std::vector<std::vector<taskforge::Frame>> sample_video_clips(
    const VideoGeneratorNet& gen, int n, std::uint64_t rng_seed);

// CRIL (Algorithm-style rollout): first frame from the generator, then
// alternate greedy policy actions with predictor steps until STOP or t_max
// frames. (t-1) * m_per_task trajectories, provenance pseudo.
std::vector<Trajectory> cril_generate(const nets::ModelBundle& bundle,
                                      int m_per_task, int t, int t_max,
                                      std::uint64_t rng_seed,
                                      nets::ActMode mode =
                                          nets::ActMode::greedy);

// Original DGR: round(oversample * (t-1) * m_per_task * mean_demo_length)
// independent frames, each wrapped as a length-1 trajectory labeled by the
// greedy policy.
std::vector<Trajectory> original_dgr_generate(const nets::ModelBundle& bundle,
                                              int m_per_task, int t,
                                              double mean_demo_length,
                                              int oversample,
                                              std::uint64_t rng_seed);

// Trajectory DGR: (t-1) * m_per_task full clips from the video generator,
// actions labeled per frame by the greedy policy.
std::vector<Trajectory> trajectory_dgr_generate(const VideoGeneratorNet& video,
                                                const nets::PolicyNet& policy,
                                                int m_per_task, int t,
                                                std::uint64_t rng_seed);

// Rehearsal: every archived real trajectory of tasks 1..t-1, unchanged.
std::vector<Trajectory> rehearsal_provide(const std::vector<DemoSet>& archive,
                                          int t);

// Finetune: nothing but the new task's demos.
std::vector<Trajectory> finetune_provide(int t);

}  // namespace cilab::replay
