#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "cilab/nets.hpp"
#include "gradcheck.hpp"

using namespace cilab;
using namespace cilab::nets;
using cilab::testing::gradcheck;

namespace {

NetConfig tiny_config() {
  NetConfig cfg;
  cfg.image_size = 8;
  cfg.z_dim = 4;
  cfg.base_channels = 2;
  cfg.head_hidden = 8;
  cfg.predictor_bottleneck = 16;
  cfg.action_embed = 4;
  return cfg;
}

std::vector<Frame> random_frames(int n, int size, std::uint64_t seed) {
  nn::Rng rng(seed);
  std::vector<Frame> out;
  for (int i = 0; i < n; ++i) {
    Frame f;
    f.size = size;
    for (double v : rng.gaussian_vector(static_cast<std::size_t>(3 * size * size)))
      f.pixels.push_back(std::tanh(v));
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<const Frame*> ptrs(const std::vector<Frame>& frames) {
  std::vector<const Frame*> p;
  for (const auto& f : frames) p.push_back(&f);
  return p;
}

}  // namespace

TEST_CASE("network output shapes and ranges") {
  NetConfig cfg = tiny_config();
  nn::Rng rng(5);
  GeneratorNet gen(cfg, rng);
  CriticNet critic(cfg, rng);
  PolicyNet policy(cfg, rng);
  PredictorNet pred(cfg, rng);

  Var z = sample_latents(3, cfg.z_dim, 1);
  CHECK(z.shape() == ad::Shape{3, cfg.z_dim});
  Var imgs = gen.forward(z);
  CHECK(imgs.shape() == ad::Shape{3, 3, 8, 8});
  for (double v : imgs.data()) {
    CHECK(v > -1.0);
    CHECK(v < 1.0);
  }
  CHECK(critic.forward(imgs).shape() == ad::Shape{3, 1});
  CHECK(policy.logits(imgs).shape() == ad::Shape{3, taskforge::kNumActions});

  std::vector<ActionId> acts{ActionId::pos_row, ActionId::stop,
                             ActionId::neg_col};
  Var nxt = pred.forward(imgs, acts);
  CHECK(nxt.shape() == ad::Shape{3, 3, 8, 8});
  for (double v : nxt.data()) {
    CHECK(v > -1.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("uniform policy head gives ln(num_actions) NLL") {
  NetConfig cfg = tiny_config();
  nn::Rng rng(2);
  PolicyNet policy(cfg, rng);
  // Zero the final layer: logits become constant, distribution uniform.
  std::fill(policy.head().weight.mutable_data().begin(),
            policy.head().weight.mutable_data().end(), 0.0);
  std::fill(policy.head().bias.mutable_data().begin(),
            policy.head().bias.mutable_data().end(), 0.0);
  auto frames = random_frames(4, cfg.image_size, 3);
  std::vector<corpus::SampledPair> batch;
  for (int i = 0; i < 4; ++i)
    batch.push_back({&frames[static_cast<std::size_t>(i)],
                     static_cast<ActionId>(i % taskforge::kNumActions)});
  double nll = policy_loss(policy, batch).item();
  CHECK(nll == doctest::Approx(std::log(5.0)).epsilon(1e-10));
}

TEST_CASE("predictor loss is the mean squared error") {
  NetConfig cfg = tiny_config();
  nn::Rng rng(4);
  PredictorNet pred(cfg, rng);
  auto frames = random_frames(3, cfg.image_size, 6);
  std::vector<corpus::SampledTransition> batch{
      {&frames[0], ActionId::pos_col, &frames[1]},
      {&frames[1], ActionId::stop, &frames[2]}};
  double loss = predictor_loss(pred, batch).item();
  // Recompute independently from the forward pass.
  Var x = frames_to_var({&frames[0], &frames[1]});
  ad::NoGradGuard ng;
  Var y = pred.forward(x, {ActionId::pos_col, ActionId::stop});
  Var t = frames_to_var({&frames[1], &frames[2]});
  double manual = 0.0;
  for (std::size_t i = 0; i < y.data().size(); ++i) {
    double d = y.data()[i] - t.data()[i];
    manual += d * d;
  }
  manual /= static_cast<double>(y.data().size());
  CHECK(loss == doctest::Approx(manual).epsilon(1e-12));
}

TEST_CASE("gradcheck: policy loss over all policy parameters") {
  NetConfig cfg = tiny_config();
  nn::Rng rng(7);
  PolicyNet policy(cfg, rng);
  auto frames = random_frames(2, cfg.image_size, 8);
  std::vector<corpus::SampledPair> batch{{&frames[0], ActionId::neg_row},
                                         {&frames[1], ActionId::stop}};
  auto named = policy.named_params("policy.");
  std::vector<Var> params;
  for (auto& [name, v] : named) params.push_back(v);
  auto res = gradcheck([&] { return policy_loss(policy, batch); }, params);
  CHECK(res.max_rel_error < 1e-4);
}

TEST_CASE("gradcheck: predictor loss over all predictor parameters") {
  NetConfig cfg = tiny_config();
  nn::Rng rng(9);
  PredictorNet pred(cfg, rng);
  auto frames = random_frames(3, cfg.image_size, 10);
  std::vector<corpus::SampledTransition> batch{
      {&frames[0], ActionId::pos_row, &frames[1]},
      {&frames[1], ActionId::neg_col, &frames[2]}};
  auto named = pred.named_params("predictor.");
  std::vector<Var> params;
  for (auto& [name, v] : named) params.push_back(v);
  auto res = gradcheck([&] { return predictor_loss(pred, batch); }, params);
  CHECK(res.max_rel_error < 1e-4);
}

TEST_CASE("gradcheck: WGAN-GP critic loss including the penalty") {
  NetConfig cfg = tiny_config();
  nn::Rng rng(11);
  CriticNet critic(cfg, rng);
  GeneratorNet gen(cfg, rng);
  auto real_frames = random_frames(2, cfg.image_size, 12);
  Var real = frames_to_var(ptrs(real_frames));
  Var fake;
  {
    ad::NoGradGuard ng;
    fake = gen.forward(sample_latents(2, cfg.z_dim, 13));
  }
  auto named = critic.named_params("critic.");
  std::vector<Var> params;
  for (auto& [name, v] : named) params.push_back(v);
  auto res = gradcheck(
      [&] { return critic_loss(critic, real, fake, 10.0, 99); }, params);
  CHECK(res.max_rel_error < 1e-3);
}

TEST_CASE("gradcheck: generator loss through the critic") {
  NetConfig cfg = tiny_config();
  nn::Rng rng(15);
  CriticNet critic(cfg, rng);
  GeneratorNet gen(cfg, rng);
  Var z = sample_latents(2, cfg.z_dim, 16);
  auto named = gen.named_params("generator.");
  std::vector<Var> params;
  for (auto& [name, v] : named) params.push_back(v);
  auto res =
      gradcheck([&] { return generator_loss(critic, gen, z); }, params);
  CHECK(res.max_rel_error < 1e-4);
}

TEST_CASE("gradcheck: vanilla GAN losses") {
  NetConfig cfg = tiny_config();
  nn::Rng rng(17);
  CriticNet critic(cfg, rng);
  GeneratorNet gen(cfg, rng);
  auto real_frames = random_frames(2, cfg.image_size, 18);
  Var real = frames_to_var(ptrs(real_frames));
  Var fake;
  {
    ad::NoGradGuard ng;
    fake = gen.forward(sample_latents(2, cfg.z_dim, 19));
  }
  std::vector<Var> cparams, gparams;
  for (auto& [name, v] : critic.named_params("c.")) cparams.push_back(v);
  for (auto& [name, v] : gen.named_params("g.")) gparams.push_back(v);
  Var z = sample_latents(2, cfg.z_dim, 20);
  // This critic's raw outputs sit near the activation kinks at the default
  // step size, so use a smaller one; the FD estimate converges to the
  // analytic gradient as h shrinks.
  auto rc = gradcheck([&] { return vanilla_critic_loss(critic, real, fake); },
                      cparams, 1e-6);
  CHECK(rc.max_rel_error < 1e-4);
  auto rg = gradcheck(
      [&] { return vanilla_generator_loss(critic, gen, z); }, gparams, 1e-6);
  CHECK(rg.max_rel_error < 1e-4);
}

TEST_CASE("gradient penalty equals one for a constant critic") {
  NetConfig cfg = tiny_config();
  nn::Rng rng(21);
  CriticNet critic(cfg, rng);
  // Zero every parameter: the critic output is constant, so the input
  // gradient vanishes and the penalty is exactly (0 - 1)^2 = 1.
  for (auto& [name, v] : critic.named_params(""))
    std::fill(v.mutable_data().begin(), v.mutable_data().end(), 0.0);
  auto real_frames = random_frames(3, cfg.image_size, 22);
  auto fake_frames = random_frames(3, cfg.image_size, 23);
  Var real = frames_to_var(ptrs(real_frames));
  Var fake = frames_to_var(ptrs(fake_frames));
  double gp = gradient_penalty(critic, real, fake, 1).item();
  CHECK(gp == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("gradient penalty is deterministic in its seed") {
  NetConfig cfg = tiny_config();
  nn::Rng rng(25);
  CriticNet critic(cfg, rng);
  auto real_frames = random_frames(2, cfg.image_size, 26);
  auto fake_frames = random_frames(2, cfg.image_size, 27);
  Var real = frames_to_var(ptrs(real_frames));
  Var fake = frames_to_var(ptrs(fake_frames));
  double a = gradient_penalty(critic, real, fake, 5).item();
  double b = gradient_penalty(critic, real, fake, 5).item();
  double c = gradient_penalty(critic, real, fake, 6).item();
  CHECK(a == b);
  CHECK(a != c);
}

TEST_CASE("greedy action matches the argmax of the probabilities") {
  NetConfig cfg = tiny_config();
  nn::Rng rng(31);
  PolicyNet policy(cfg, rng);
  auto frames = random_frames(6, cfg.image_size, 32);
  for (const auto& f : frames) {
    ActionId a = act(policy, f, ActMode::greedy);
    CHECK(a == act(policy, f, ActMode::greedy));
    ad::NoGradGuard ng;
    Var p = policy.probabilities(frames_to_var({&f}));
    int best = 0;
    for (int j = 1; j < taskforge::kNumActions; ++j)
      if (p.data()[static_cast<std::size_t>(j)] >
          p.data()[static_cast<std::size_t>(best)])
        best = j;
    CHECK(static_cast<int>(a) == best);
  }
  auto batch = act_greedy_batch(policy, ptrs(frames));
  for (std::size_t i = 0; i < frames.size(); ++i)
    CHECK(batch[i] == act(policy, frames[i], ActMode::greedy));
}

TEST_CASE("sampled actions follow the policy distribution") {
  NetConfig cfg = tiny_config();
  nn::Rng rng(33);
  PolicyNet policy(cfg, rng);
  auto frames = random_frames(1, cfg.image_size, 34);
  ad::NoGradGuard ng;
  Var p = policy.probabilities(frames_to_var({&frames[0]}));
  const int n = 20000;
  std::vector<int> counts(taskforge::kNumActions, 0);
  for (int i = 0; i < n; ++i)
    ++counts[static_cast<std::size_t>(
        act(policy, frames[0], ActMode::sample, static_cast<std::uint64_t>(i)))];
  double chi2 = 0.0;
  for (int j = 0; j < taskforge::kNumActions; ++j) {
    double expect = n * p.data()[static_cast<std::size_t>(j)];
    if (expect < 1.0) continue;
    chi2 += (counts[static_cast<std::size_t>(j)] - expect) *
            (counts[static_cast<std::size_t>(j)] - expect) / expect;
  }
  CHECK(chi2 < 18.5);  // 4 dof, 99.9%
}

TEST_CASE("predict_next matches the batched forward pass") {
  NetConfig cfg = tiny_config();
  nn::Rng rng(41);
  PredictorNet pred(cfg, rng);
  auto frames = random_frames(1, cfg.image_size, 42);
  Frame nxt = predict_next(pred, frames[0], ActionId::pos_col);
  CHECK(nxt.size == cfg.image_size);
  ad::NoGradGuard ng;
  Var y = pred.forward(frames_to_var({&frames[0]}), {ActionId::pos_col});
  for (std::size_t i = 0; i < nxt.pixels.size(); ++i)
    CHECK(nxt.pixels[i] == doctest::Approx(y.data()[i]).epsilon(1e-12));
}

TEST_CASE("sample_first_frames is seeded and well-shaped") {
  NetConfig cfg = tiny_config();
  nn::Rng rng(51);
  GeneratorNet gen(cfg, rng);
  auto a = sample_first_frames(gen, 4, 7);
  auto b = sample_first_frames(gen, 4, 7);
  auto c = sample_first_frames(gen, 4, 8);
  REQUIRE(a.size() == 4);
  CHECK(a == b);
  CHECK(a != c);
  for (const auto& f : a) {
    CHECK(f.size == cfg.image_size);
    for (double v : f.pixels) {
      CHECK(v > -1.0);
      CHECK(v < 1.0);
    }
  }
}

TEST_CASE("model bundle checkpoint round trip preserves everything") {
  NetConfig cfg = tiny_config();
  ModelBundle bundle(cfg, OptimConfig{}, 99);
  bundle.task_counter = 3;
  std::string path = "/tmp/cilab_test_bundle.ckpt";
  bundle.save_checkpoint(path);
  ModelBundle loaded = ModelBundle::load_checkpoint(path);
  CHECK(loaded.net_config == cfg);
  CHECK(loaded.task_counter == 3);
  CHECK(loaded.content_hash() == bundle.content_hash());
  auto a = bundle.named_params();
  auto b = loaded.named_params();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].first == b[i].first);
    CHECK(a[i].second.data() == b[i].second.data());
  }
}

TEST_CASE("content hash changes when a parameter changes") {
  NetConfig cfg = tiny_config();
  ModelBundle bundle(cfg, OptimConfig{}, 1);
  std::uint64_t h0 = bundle.content_hash();
  CHECK(bundle.content_hash() == h0);  // stable
  auto named = bundle.named_params();
  named[0].second.mutable_data()[0] += 1e-9;
  CHECK(bundle.content_hash() != h0);
}

TEST_CASE("distinct init seeds give distinct parameters") {
  NetConfig cfg = tiny_config();
  ModelBundle a(cfg, OptimConfig{}, 1);
  ModelBundle b(cfg, OptimConfig{}, 1);
  ModelBundle c(cfg, OptimConfig{}, 2);
  CHECK(a.content_hash() == b.content_hash());
  CHECK(a.content_hash() != c.content_hash());
}

TEST_CASE("corrupt checkpoints are rejected") {
  std::string path = "/tmp/cilab_test_badbundle.ckpt";
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOTACKPT garbage";
  }
  CHECK_THROWS_AS(ModelBundle::load_checkpoint(path), std::runtime_error);
  CHECK_THROWS_AS(ModelBundle::load_checkpoint("/tmp/definitely_missing.ckpt"),
                  std::runtime_error);
}

TEST_CASE("named_params uses unique prefixed names") {
  NetConfig cfg = tiny_config();
  ModelBundle bundle(cfg, OptimConfig{}, 3);
  auto named = bundle.named_params();
  std::set<std::string> names;
  bool saw_all_prefixes[4] = {false, false, false, false};
  for (const auto& [name, v] : named) {
    CHECK(names.insert(name).second);
    if (name.rfind("generator.", 0) == 0) saw_all_prefixes[0] = true;
    if (name.rfind("critic.", 0) == 0) saw_all_prefixes[1] = true;
    if (name.rfind("policy.", 0) == 0) saw_all_prefixes[2] = true;
    if (name.rfind("predictor.", 0) == 0) saw_all_prefixes[3] = true;
  }
  for (bool b : saw_all_prefixes) CHECK(b);
}
