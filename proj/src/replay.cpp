#include "cilab/replay.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cilab::replay {

using corpus::Provenance;
using nets::ActMode;
using taskforge::ActionId;
using taskforge::Frame;

namespace {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

std::string to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::finetune: return "finetune";
    case StrategyKind::rehearsal: return "rehearsal";
    case StrategyKind::original_dgr: return "original_dgr";
    case StrategyKind::trajectory_dgr: return "trajectory_dgr";
    case StrategyKind::cril: return "cril";
  }
  throw std::logic_error("to_string: unknown strategy");
}

StrategyKind strategy_from_string(const std::string& name) {
  for (StrategyKind k : kAllStrategies)
    if (to_string(k) == name) return k;
  throw std::invalid_argument("strategy_from_string: unknown strategy '" +
                              name + "'");
}

VideoGeneratorNet::VideoGeneratorNet(const VideoGenConfig& cfg, nn::Rng& rng)
    : cfg_(cfg) {
  if (cfg.image.image_size % 4 != 0)
    throw std::invalid_argument(
        "VideoGeneratorNet: image_size must be divisible by 4");
  if (cfg.max_len < 1)
    throw std::invalid_argument("VideoGeneratorNet: max_len must be >= 1");
  const std::int64_t c2 = 2 * cfg.image.base_channels;
  const std::int64_t s0 = cfg.image.image_size / 4;
  init_fc_ = nn::Linear(cfg.content_dim, cfg.motion_dim, rng);
  rnn_in_ = nn::Linear(cfg.content_dim, cfg.motion_dim, rng);
  rnn_rec_ = nn::Linear(cfg.motion_dim, cfg.motion_dim, rng);
  dec_fc_ = nn::Linear(cfg.content_dim + cfg.motion_dim, c2 * s0 * s0, rng);
  up1_ = nn::ConvTranspose2d(c2, cfg.image.base_channels, 4, 2, 1, rng);
  up2_ = nn::ConvTranspose2d(cfg.image.base_channels, 3, 4, 2, 1, rng);
}

std::vector<Var> VideoGeneratorNet::unroll(const Var& z_content,
                                           int len) const {
  if (len < 1) throw std::invalid_argument("unroll: len must be >= 1");
  const std::int64_t n = z_content.shape()[0];
  const std::int64_t c2 = 2 * cfg_.image.base_channels;
  const std::int64_t s0 = cfg_.image.image_size / 4;
  Var motion = ad::tanh(init_fc_.forward(z_content));
  Var drive = rnn_in_.forward(z_content);  // constant across steps
  std::vector<Var> frames;
  frames.reserve(static_cast<std::size_t>(len));
  for (int k = 0; k < len; ++k) {
    Var h = dec_fc_.forward(nn::concat_cols(z_content, motion));
    h = ad::reshape(h, {n, c2, s0, s0});
    h = ad::leaky_relu(up1_.forward(h), cfg_.image.leaky_slope);
    frames.push_back(ad::tanh(up2_.forward(h)));
    if (k + 1 < len)
      motion = ad::tanh(ad::add(rnn_rec_.forward(motion), drive));
  }
  return frames;
}

NamedParams VideoGeneratorNet::named_params(const std::string& prefix) const {
  return {{prefix + "init_fc.weight", init_fc_.weight},
          {prefix + "init_fc.bias", init_fc_.bias},
          {prefix + "rnn_in.weight", rnn_in_.weight},
          {prefix + "rnn_in.bias", rnn_in_.bias},
          {prefix + "rnn_rec.weight", rnn_rec_.weight},
          {prefix + "rnn_rec.bias", rnn_rec_.bias},
          {prefix + "dec_fc.weight", dec_fc_.weight},
          {prefix + "dec_fc.bias", dec_fc_.bias},
          {prefix + "up1.weight", up1_.weight},
          {prefix + "up1.bias", up1_.bias},
          {prefix + "up2.weight", up2_.weight},
          {prefix + "up2.bias", up2_.bias}};
}

SequenceCriticNet::SequenceCriticNet(const nets::NetConfig& cfg, nn::Rng& rng)
    : cfg_(cfg) {
  const std::int64_t b = cfg.base_channels;
  c1_ = nn::Conv2d(6, b, 3, 2, 1, rng);
  c2_ = nn::Conv2d(b, 2 * b, 3, 2, 1, rng);
  const std::int64_t s0 = cfg.image_size / 4;
  fc1_ = nn::Linear(2 * b * s0 * s0, cfg.head_hidden, rng);
  fc2_ = nn::Linear(cfg.head_hidden, 1, rng);
}

Var SequenceCriticNet::forward(const Var& stacked_pair) const {
  Var h = ad::leaky_relu(c1_.forward(stacked_pair), cfg_.leaky_slope);
  h = ad::leaky_relu(c2_.forward(h), cfg_.leaky_slope);
  h = ad::leaky_relu(fc1_.forward(nn::flatten_rows(h)), cfg_.leaky_slope);
  return fc2_.forward(h);
}

NamedParams SequenceCriticNet::named_params(const std::string& prefix) const {
  return {{prefix + "c1.weight", c1_.weight},   {prefix + "c1.bias", c1_.bias},
          {prefix + "c2.weight", c2_.weight},   {prefix + "c2.bias", c2_.bias},
          {prefix + "fc1.weight", fc1_.weight}, {prefix + "fc1.bias", fc1_.bias},
          {prefix + "fc2.weight", fc2_.weight}, {prefix + "fc2.bias", fc2_.bias}};
}

Var stack_frame_pair(const Var& a, const Var& b) {
  const auto& s = a.shape();
  if (s != b.shape() || s.size() != 4)
    throw std::invalid_argument("stack_frame_pair: shape mismatch");
  Var flat = nn::concat_cols(nn::flatten_rows(a), nn::flatten_rows(b));
  return ad::reshape(flat, {s[0], 2 * s[1], s[2], s[3]});
}

Var video_critic_loss(const nets::CriticNet& img_critic,
                      const SequenceCriticNet& seq_critic,
                      const std::vector<Var>& real_seq,
                      const std::vector<Var>& fake_seq, double gp_weight,
                      std::uint64_t rng_seed) {
  if (real_seq.size() != fake_seq.size() || real_seq.empty())
    throw std::invalid_argument("video_critic_loss: sequence length mismatch");
  const auto steps = real_seq.size();
  Var img_term;
  for (std::size_t k = 0; k < steps; ++k) {
    Var d = ad::sub(ad::mean_all(img_critic.forward(fake_seq[k])),
                    ad::mean_all(img_critic.forward(real_seq[k])));
    img_term = k == 0 ? d : ad::add(img_term, d);
  }
  Var loss = ad::mul_scalar(img_term, 1.0 / static_cast<double>(steps));
  if (steps > 1) {
    Var seq_term;
    for (std::size_t k = 0; k + 1 < steps; ++k) {
      Var fake_pair = stack_frame_pair(fake_seq[k], fake_seq[k + 1]);
      Var real_pair = stack_frame_pair(real_seq[k], real_seq[k + 1]);
      Var d = ad::sub(ad::mean_all(seq_critic.forward(fake_pair)),
                      ad::mean_all(seq_critic.forward(real_pair)));
      seq_term = k == 0 ? d : ad::add(seq_term, d);
    }
    loss = ad::add(
        loss, ad::mul_scalar(seq_term, 1.0 / static_cast<double>(steps - 1)));
  }
  Var gp = nets::gradient_penalty(img_critic, real_seq[0], fake_seq[0],
                                  rng_seed);
  return ad::add(loss, ad::mul_scalar(gp, gp_weight));
}

Var video_generator_loss(const nets::CriticNet& img_critic,
                         const SequenceCriticNet& seq_critic,
                         const std::vector<Var>& fake_seq) {
  if (fake_seq.empty())
    throw std::invalid_argument("video_generator_loss: empty sequence");
  const auto steps = fake_seq.size();
  Var img_term;
  for (std::size_t k = 0; k < steps; ++k) {
    Var d = ad::mean_all(img_critic.forward(fake_seq[k]));
    img_term = k == 0 ? d : ad::add(img_term, d);
  }
  Var loss =
      ad::neg(ad::mul_scalar(img_term, 1.0 / static_cast<double>(steps)));
  if (steps > 1) {
    Var seq_term;
    for (std::size_t k = 0; k + 1 < steps; ++k) {
      Var pair = stack_frame_pair(fake_seq[k], fake_seq[k + 1]);
      Var d = ad::mean_all(seq_critic.forward(pair));
      seq_term = k == 0 ? d : ad::add(seq_term, d);
    }
    loss = ad::sub(
        loss, ad::mul_scalar(seq_term, 1.0 / static_cast<double>(steps - 1)));
  }
  return loss;
}

std::vector<std::vector<Frame>> sample_video_clips(const VideoGeneratorNet& gen,
                                                   int n,
                                                   std::uint64_t rng_seed) {
  if (n < 1) throw std::invalid_argument("sample_video_clips: n must be >= 1");
  ad::NoGradGuard ng;
  const auto& cfg = gen.config();
  nn::Rng rng(rng_seed);
  Var z = ad::constant(
      rng.gaussian_vector(static_cast<std::size_t>(n) *
                          static_cast<std::size_t>(cfg.content_dim)),
      {n, cfg.content_dim});
  auto steps = gen.unroll(z, cfg.max_len);
  std::vector<std::vector<Frame>> clips(static_cast<std::size_t>(n));
  for (std::size_t k = 0; k < steps.size(); ++k)
    for (int i = 0; i < n; ++i)
      clips[static_cast<std::size_t>(i)].push_back(
          nets::var_row_to_frame(steps[k], i, cfg.image.image_size));
  return clips;
}

std::vector<Trajectory> cril_generate(const nets::ModelBundle& bundle,
                                      int m_per_task, int t, int t_max,
                                      std::uint64_t rng_seed, ActMode mode) {
  if (t < 2) throw std::invalid_argument("cril_generate: t must be >= 2");
  if (m_per_task < 1 || t_max < 1)
    throw std::invalid_argument("cril_generate: bad m_per_task or t_max");
  std::vector<Trajectory> out;
  const int total = (t - 1) * m_per_task;
  out.reserve(static_cast<std::size_t>(total));
  for (int i = 0; i < total; ++i) {
    std::uint64_t traj_seed = mix_seed(rng_seed, static_cast<std::uint64_t>(i));
    Trajectory traj;
    traj.provenance = Provenance::pseudo;
    traj.task_tag = corpus::kUnknownTask;
    traj.frames.push_back(
        nets::sample_first_frames(bundle.generator, 1, traj_seed)[0]);
    for (;;) {
      ActionId a =
          nets::act(bundle.policy, traj.frames.back(), mode,
                    mix_seed(traj_seed, traj.frames.size()));
      traj.actions.push_back(a);
      if (a == ActionId::stop) break;
      if (static_cast<int>(traj.frames.size()) == t_max) {
        traj.truncated = true;
        break;
      }
      traj.frames.push_back(
          nets::predict_next(bundle.predictor, traj.frames.back(), a));
    }
    out.push_back(std::move(traj));
  }
  return out;
}

std::vector<Trajectory> original_dgr_generate(const nets::ModelBundle& bundle,
                                              int m_per_task, int t,
                                              double mean_demo_length,
                                              int oversample,
                                              std::uint64_t rng_seed) {
  if (t < 2) throw std::invalid_argument("original_dgr_generate: t must be >= 2");
  if (oversample < 1)
    throw std::invalid_argument("original_dgr_generate: oversample must be >= 1");
  const auto count = static_cast<int>(std::llround(
      oversample * (t - 1) * static_cast<double>(m_per_task) *
      mean_demo_length));
  std::vector<Trajectory> out;
  if (count <= 0) return out;
  auto frames = nets::sample_first_frames(bundle.generator, count, rng_seed);
  // Label in bounded chunks: the oversampled pool can be tens of thousands of
  // frames, and one batched policy forward over all of them would hold every
  // intermediate activation simultaneously.
  constexpr std::size_t kChunk = 256;
  std::vector<ActionId> actions;
  actions.reserve(frames.size());
  for (std::size_t start = 0; start < frames.size(); start += kChunk) {
    std::size_t end = std::min(start + kChunk, frames.size());
    std::vector<const Frame*> ptrs;
    ptrs.reserve(end - start);
    for (std::size_t i = start; i < end; ++i) ptrs.push_back(&frames[i]);
    auto chunk = nets::act_greedy_batch(bundle.policy, ptrs);
    actions.insert(actions.end(), chunk.begin(), chunk.end());
  }
  out.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    Trajectory traj;
    traj.provenance = Provenance::pseudo;
    traj.task_tag = corpus::kUnknownTask;
    traj.frames.push_back(std::move(frames[i]));
    traj.actions.push_back(actions[i]);
    out.push_back(std::move(traj));
  }
  return out;
}

std::vector<Trajectory> trajectory_dgr_generate(const VideoGeneratorNet& video,
                                                const nets::PolicyNet& policy,
                                                int m_per_task, int t,
                                                std::uint64_t rng_seed) {
  if (t < 2)
    throw std::invalid_argument("trajectory_dgr_generate: t must be >= 2");
  const int total = (t - 1) * m_per_task;
  auto clips = sample_video_clips(video, total, rng_seed);
  std::vector<Trajectory> out;
  out.reserve(clips.size());
  for (auto& clip : clips) {
    Trajectory traj;
    traj.provenance = Provenance::pseudo;
    traj.task_tag = corpus::kUnknownTask;
    std::vector<const Frame*> ptrs;
    ptrs.reserve(clip.size());
    for (const auto& f : clip) ptrs.push_back(&f);
    traj.actions = nets::act_greedy_batch(policy, ptrs);
    traj.frames = std::move(clip);
    out.push_back(std::move(traj));
  }
  return out;
}

std::vector<Trajectory> rehearsal_provide(const std::vector<DemoSet>& archive,
                                          int t) {
  std::vector<Trajectory> out;
  for (int id = 1; id < t; ++id) {
    const DemoSet* found = nullptr;
    for (const auto& d : archive)
      if (d.task.task_id == id) {
        found = &d;
        break;
      }
    if (found == nullptr)
      throw std::runtime_error("rehearsal_provide: archive is missing task " +
                               std::to_string(id));
    out.insert(out.end(), found->trajectories.begin(),
               found->trajectories.end());
  }
  return out;
}

std::vector<Trajectory> finetune_provide(int) { return {}; }

}  // namespace cilab::replay
