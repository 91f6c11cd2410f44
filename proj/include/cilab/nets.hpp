// The four parametric models and their losses: first-frame generator,
// Wasserstein critic with gradient penalty, behavior-cloning policy, and
// action-conditioned next-frame predictor.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cilab/corpus.hpp"
#include "cilab/nn.hpp"

namespace cilab::nets {

using ad::Var;
using corpus::SampledPair;
using corpus::SampledTransition;
using nn::NamedParams;
using taskforge::ActionId;
using taskforge::Frame;

struct NetConfig {
  int image_size = 32;  // must be divisible by 4
  int z_dim = 32;
  int base_channels = 16;
  int head_hidden = 64;
  int predictor_bottleneck = 256;
  int action_embed = 32;
  double leaky_slope = 0.2;

  bool operator==(const NetConfig&) const = default;
};

enum class GanMode { wgan_gp, vanilla };

class GeneratorNet {
 public:
  GeneratorNet() = default;
  GeneratorNet(const NetConfig& cfg, nn::Rng& rng);
  Var forward(const Var& z) const;  // {N, z_dim} -> {N, 3, S, S}, tanh output
  NamedParams named_params(const std::string& prefix) const;
  NetConfig config() const { return cfg_; }

 private:
  NetConfig cfg_;
  nn::Linear fc_;
  nn::ConvTranspose2d up1_, up2_;
};

class CriticNet {
 public:
  CriticNet() = default;
  CriticNet(const NetConfig& cfg, nn::Rng& rng);
  Var forward(const Var& x) const;  // {N, 3, S, S} -> {N, 1}, unsquashed
  NamedParams named_params(const std::string& prefix) const;

 private:
  NetConfig cfg_;
  nn::Conv2d c1_, c2_;
  nn::Linear fc1_, fc2_;
};

class PolicyNet {
 public:
  PolicyNet() = default;
  PolicyNet(const NetConfig& cfg, nn::Rng& rng);
  Var logits(const Var& x) const;         // {N, 3, S, S} -> {N, A}
  Var probabilities(const Var& x) const;  // rows sum to 1
  NamedParams named_params(const std::string& prefix) const;
  nn::Linear& head() { return fc2_; }  // exposed for tests

 private:
  NetConfig cfg_;
  nn::Conv2d c1_, c2_;
  nn::Linear fc1_, fc2_;
};

class PredictorNet {
 public:
  PredictorNet() = default;
  PredictorNet(const NetConfig& cfg, nn::Rng& rng);
  // frames {N, 3, S, S} + actions -> next frames {N, 3, S, S}, tanh output
  Var forward(const Var& x, const std::vector<ActionId>& actions) const;
  NamedParams named_params(const std::string& prefix) const;

 private:
  NetConfig cfg_;
  nn::Conv2d c1_, c2_;
  nn::Linear enc_fc_, act_fc_, dec_fc_;
  nn::ConvTranspose2d up1_, up2_;
};

struct OptimConfig {
  double lr_policy = 1e-3;
  double lr_generator = 2e-4;
  double lr_critic = 2e-4;
  double lr_predictor = 1e-3;
  double adam_beta1_gan = 0.5;  // generator + critic
};

struct ModelBundle {
  ModelBundle() = default;
  ModelBundle(const NetConfig& net_cfg, const OptimConfig& opt_cfg,
              std::uint64_t init_seed);

  NetConfig net_config;
  GeneratorNet generator;
  CriticNet critic;
  PolicyNet policy;
  PredictorNet predictor;
  nn::Adam opt_policy, opt_generator, opt_critic, opt_predictor;
  int task_counter = 0;

  NamedParams named_params() const;
  std::vector<Var> params_of(const NamedParams& named) const;

  void save_checkpoint(const std::string& path) const;
  static ModelBundle load_checkpoint(const std::string& path);
  std::vector<std::uint8_t> serialize() const;
  std::uint64_t content_hash() const;  // FNV-1a over the serialized bytes
};

// Batch packing.
Var frames_to_var(const std::vector<const Frame*>& frames);
Var frame_to_var(const Frame& f);
Frame var_row_to_frame(const Var& batch, std::int64_t row, int image_size);

// Losses. All return scalar Vars differentiable w.r.t. the networks.
Var policy_loss(const PolicyNet& policy, const std::vector<SampledPair>& batch);
Var predictor_loss(const PredictorNet& predictor,
                   const std::vector<SampledTransition>& batch);
Var gradient_penalty(const CriticNet& critic, const Var& real, const Var& fake,
                     std::uint64_t rng_seed);
Var critic_loss(const CriticNet& critic, const Var& real, const Var& fake,
                double gp_weight, std::uint64_t rng_seed);
Var generator_loss(const CriticNet& critic, const GeneratorNet& generator,
                   const Var& z_batch);
// Log-form GAN objective (config alternative to the Wasserstein losses).
Var vanilla_critic_loss(const CriticNet& critic, const Var& real,
                        const Var& fake);
Var vanilla_generator_loss(const CriticNet& critic,
                           const GeneratorNet& generator, const Var& z_batch);

enum class ActMode { greedy, sample };

ActionId act(const PolicyNet& policy, const Frame& frame, ActMode mode,
             std::uint64_t rng_seed = 0);
std::vector<ActionId> act_greedy_batch(const PolicyNet& policy,
                                       const std::vector<const Frame*>& frames);

Frame predict_next(const PredictorNet& predictor, const Frame& frame,
                   ActionId action);

std::vector<Frame> sample_first_frames(const GeneratorNet& generator, int m,
                                       std::uint64_t rng_seed);
Var sample_latents(int m, int z_dim, std::uint64_t rng_seed);

}  // namespace cilab::nets
