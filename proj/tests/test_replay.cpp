#include <doctest.h>

#include <cmath>
#include <unordered_set>

#include "cilab/replay.hpp"
#include "gradcheck.hpp"

using namespace cilab;
using namespace cilab::replay;
using cilab::testing::gradcheck;
using corpus::Provenance;
using taskforge::ActionId;
using taskforge::Frame;

namespace {

nets::NetConfig tiny_image_config() {
  nets::NetConfig cfg;
  cfg.image_size = 8;
  cfg.z_dim = 4;
  cfg.base_channels = 2;
  cfg.head_hidden = 8;
  cfg.predictor_bottleneck = 16;
  cfg.action_embed = 4;
  return cfg;
}

VideoGenConfig tiny_video_config(int max_len = 4) {
  VideoGenConfig cfg;
  cfg.image = tiny_image_config();
  cfg.content_dim = 4;
  cfg.motion_dim = 3;
  cfg.max_len = max_len;
  return cfg;
}

nets::ModelBundle tiny_bundle(std::uint64_t seed) {
  return nets::ModelBundle(tiny_image_config(), nets::OptimConfig{}, seed);
}

std::size_t frame_hash(const Frame& f) {
  std::size_t h = 14695981039346656037ull;
  for (double v : f.pixels) {
    auto bits = static_cast<std::size_t>(v * 1e6 + 2e6);
    h ^= bits;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

TEST_CASE("strategy names round trip") {
  for (StrategyKind k : kAllStrategies)
    CHECK(strategy_from_string(to_string(k)) == k);
  CHECK_THROWS_AS(strategy_from_string("nope"), std::invalid_argument);
}

TEST_CASE("cril_generate counts, provenance, and shape convention") {
  auto bundle = tiny_bundle(3);
  auto trajs = cril_generate(bundle, 10, 3, 12, 7);
  REQUIRE(trajs.size() == 20);  // (t-1) * m
  for (const auto& tr : trajs) {
    CHECK(tr.provenance == Provenance::pseudo);
    CHECK(tr.task_tag == corpus::kUnknownTask);
    CHECK(tr.frames.size() == tr.actions.size());
    CHECK(tr.frames.size() <= 12);
    if (tr.truncated) {
      CHECK(tr.frames.size() == 12);
    } else {
      CHECK(tr.actions.back() == ActionId::stop);
    }
  }
  CHECK_THROWS_AS(cril_generate(bundle, 10, 1, 12, 7), std::invalid_argument);
}

TEST_CASE("cril rollout with an always-STOP policy gives 1 frame, 1 action") {
  auto bundle = tiny_bundle(5);
  // Bias the head so STOP always wins by a wide margin.
  auto& head = bundle.policy.head();
  std::fill(head.weight.mutable_data().begin(),
            head.weight.mutable_data().end(), 0.0);
  std::fill(head.bias.mutable_data().begin(), head.bias.mutable_data().end(),
            0.0);
  head.bias.mutable_data()[static_cast<std::size_t>(ActionId::stop)] = 10.0;
  auto trajs = cril_generate(bundle, 3, 2, 12, 1);
  REQUIRE(trajs.size() == 3);
  for (const auto& tr : trajs) {
    CHECK(tr.frames.size() == 1);
    CHECK(tr.actions.size() == 1);
    CHECK(tr.actions[0] == ActionId::stop);
    CHECK_FALSE(tr.truncated);
  }
}

TEST_CASE("cril rollout without STOP truncates at t_max") {
  auto bundle = tiny_bundle(5);
  auto& head = bundle.policy.head();
  std::fill(head.weight.mutable_data().begin(),
            head.weight.mutable_data().end(), 0.0);
  std::fill(head.bias.mutable_data().begin(), head.bias.mutable_data().end(),
            0.0);
  head.bias.mutable_data()[static_cast<std::size_t>(ActionId::pos_row)] = 10.0;
  auto trajs = cril_generate(bundle, 2, 2, 6, 1);
  for (const auto& tr : trajs) {
    CHECK(tr.truncated);
    CHECK(tr.frames.size() == 6);
    CHECK(tr.actions.size() == 6);
  }
}

TEST_CASE("cril rollouts are stepwise self-consistent and deterministic") {
  auto bundle = tiny_bundle(9);
  auto a = cril_generate(bundle, 4, 3, 8, 21);
  auto b = cril_generate(bundle, 4, 3, 8, 21);
  auto c = cril_generate(bundle, 4, 3, 8, 22);
  CHECK(a == b);
  CHECK(a != c);
  for (const auto& tr : a) {
    for (std::size_t k = 0; k + 1 < tr.frames.size(); ++k) {
      Frame expect =
          nets::predict_next(bundle.predictor, tr.frames[k], tr.actions[k]);
      CHECK(tr.frames[k + 1] == expect);
    }
    for (std::size_t k = 0; k < tr.frames.size(); ++k)
      CHECK(tr.actions[k] ==
            nets::act(bundle.policy, tr.frames[k], nets::ActMode::greedy));
  }
}

TEST_CASE("original_dgr_generate emits the contracted pair pool") {
  auto bundle = tiny_bundle(13);
  SUBCASE("paper example: oversample 1, t 2, m 1, mean length 5") {
    auto trajs = original_dgr_generate(bundle, 1, 2, 5.0, 1, 3);
    CHECK(trajs.size() == 5);
  }
  SUBCASE("default 10x oversample scales the pool") {
    auto trajs = original_dgr_generate(bundle, 2, 3, 4.5, 10, 3);
    CHECK(trajs.size() == 10 * 2 * 2 * 4.5);
  }
  auto trajs = original_dgr_generate(bundle, 2, 3, 3.0, 2, 5);
  for (const auto& tr : trajs) {
    CHECK(tr.provenance == Provenance::pseudo);
    CHECK(tr.frames.size() == 1);
    CHECK(tr.actions.size() == 1);
    CHECK(tr.n_pairs() == 1);
    CHECK(tr.actions[0] ==
          nets::act(bundle.policy, tr.frames[0], nets::ActMode::greedy));
  }
  auto again = original_dgr_generate(bundle, 2, 3, 3.0, 2, 5);
  CHECK(trajs == again);
}

TEST_CASE("video generator unrolls fixed-length in-range clips") {
  nn::Rng rng(17);
  VideoGeneratorNet video(tiny_video_config(5), rng);
  auto clips = sample_video_clips(video, 3, 8);
  REQUIRE(clips.size() == 3);
  for (const auto& clip : clips) {
    CHECK(clip.size() == 5);
    for (const auto& f : clip) {
      CHECK(f.size == 8);
      for (double v : f.pixels) {
        CHECK(v > -1.0);
        CHECK(v < 1.0);
      }
    }
  }
  CHECK(sample_video_clips(video, 3, 8) == clips);
  CHECK(sample_video_clips(video, 3, 9) != clips);
  // Motion latents actually move: consecutive frames differ.
  CHECK(clips[0][0] != clips[0][1]);
}

TEST_CASE("trajectory_dgr_generate counts and labels") {
  nn::Rng rng(19);
  VideoGeneratorNet video(tiny_video_config(4), rng);
  auto bundle = tiny_bundle(23);
  auto trajs = trajectory_dgr_generate(video, bundle.policy, 3, 2, 31);
  REQUIRE(trajs.size() == 3);  // t = 2, m = 3
  for (const auto& tr : trajs) {
    CHECK(tr.provenance == Provenance::pseudo);
    CHECK(tr.frames.size() == 4);  // configured clip length
    CHECK(tr.actions.size() == 4);
    for (std::size_t k = 0; k < tr.frames.size(); ++k)
      CHECK(tr.actions[k] ==
            nets::act(bundle.policy, tr.frames[k], nets::ActMode::greedy));
  }
  auto more = trajectory_dgr_generate(video, bundle.policy, 4, 4, 31);
  CHECK(more.size() == 12);
}

TEST_CASE("gradcheck: video GAN losses") {
  nets::NetConfig icfg = tiny_image_config();
  nn::Rng rng(29);
  VideoGeneratorNet video(tiny_video_config(3), rng);
  nets::CriticNet img_critic(icfg, rng);
  SequenceCriticNet seq_critic(icfg, rng);

  Var z = ad::constant(nn::Rng(4).gaussian_vector(2 * 4), {2, 4});
  std::vector<Var> real_seq;
  {
    nn::Rng fr(5);
    for (int k = 0; k < 3; ++k) {
      auto v = fr.gaussian_vector(2 * 3 * 8 * 8);
      for (double& x : v) x = std::tanh(x);
      real_seq.push_back(ad::constant(std::move(v), {2, 3, 8, 8}));
    }
  }

  SUBCASE("critic parameters") {
    std::vector<Var> params;
    for (auto& [n, v] : img_critic.named_params("i.")) params.push_back(v);
    for (auto& [n, v] : seq_critic.named_params("s.")) params.push_back(v);
    std::vector<Var> fake_seq;
    {
      ad::NoGradGuard ng;
      fake_seq = video.unroll(z, 3);
    }
    auto res = gradcheck(
        [&] {
          return video_critic_loss(img_critic, seq_critic, real_seq, fake_seq,
                                   10.0, 77);
        },
        params, 1e-6);
    CHECK(res.max_rel_error < 1e-3);
  }
  SUBCASE("generator parameters through the unroll") {
    std::vector<Var> params;
    for (auto& [n, v] : video.named_params("v.")) params.push_back(v);
    auto res = gradcheck(
        [&] {
          return video_generator_loss(img_critic, seq_critic,
                                      video.unroll(z, 3));
        },
        params);
    CHECK(res.max_rel_error < 1e-4);
  }
}

TEST_CASE("stack_frame_pair concatenates along channels") {
  Var a = ad::constant({1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12}, {1, 3, 2, 2});
  Var b = ad::constant({-1, -2, -3, -4, -5, -6, -7, -8, -9, -10, -11, -12},
                       {1, 3, 2, 2});
  Var s = stack_frame_pair(a, b);
  CHECK(s.shape() == ad::Shape{1, 6, 2, 2});
  CHECK(s.data()[0] == 1);
  CHECK(s.data()[11] == 12);
  CHECK(s.data()[12] == -1);
  CHECK(s.data()[23] == -12);
}

TEST_CASE("rehearsal returns archived demos bitwise-equal") {
  auto suite = taskforge::make_suite(3, 2, taskforge::SuiteParams{6, 12, 30});
  std::vector<corpus::DemoSet> archive;
  for (const auto& task : suite)
    archive.push_back(corpus::collect_demos(task, 4, 9));
  auto out = rehearsal_provide(archive, 4);
  REQUIRE(out.size() == 12);
  std::size_t idx = 0;
  for (const auto& d : archive)
    for (const auto& tr : d.trajectories) {
      CHECK(out[idx] == tr);
      CHECK(out[idx].provenance == Provenance::real);
      ++idx;
    }
  CHECK(rehearsal_provide(archive, 1).empty());
  CHECK(rehearsal_provide(archive, 3).size() == 8);
  std::vector<corpus::DemoSet> missing{archive[0], archive[2]};
  CHECK_THROWS_AS(rehearsal_provide(missing, 4), std::runtime_error);
}

TEST_CASE("finetune provides nothing") {
  for (int t : {1, 2, 5}) CHECK(finetune_provide(t).empty());
}

TEST_CASE("generative strategies never leak archived real frames") {
  auto suite = taskforge::make_suite(2, 6, taskforge::SuiteParams{6, 12, 20});
  std::unordered_set<std::size_t> real_hashes;
  for (const auto& task : suite)
    for (const auto& tr : corpus::collect_demos(task, 5, 3).trajectories)
      for (const auto& f : tr.frames) real_hashes.insert(frame_hash(f));

  auto bundle = tiny_bundle(41);
  nn::Rng rng(43);
  VideoGeneratorNet video(tiny_video_config(4), rng);
  auto check_clean = [&](const std::vector<corpus::Trajectory>& trajs) {
    for (const auto& tr : trajs)
      for (const auto& f : tr.frames)
        CHECK(real_hashes.count(frame_hash(f)) == 0);
  };
  check_clean(cril_generate(bundle, 5, 3, 10, 1));
  check_clean(original_dgr_generate(bundle, 5, 3, 4.0, 2, 1));
  check_clean(trajectory_dgr_generate(video, bundle.policy, 5, 3, 1));
}
