#include "cilab/nets.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cilab::nets {

namespace {

Var lrelu(const Var& x, const NetConfig& cfg) {
  return ad::leaky_relu(x, cfg.leaky_slope);
}

Var one_hot_actions(const std::vector<ActionId>& actions) {
  const std::int64_t n = static_cast<std::int64_t>(actions.size());
  std::vector<double> data(static_cast<std::size_t>(n * taskforge::kNumActions),
                           0.0);
  for (std::int64_t i = 0; i < n; ++i)
    data[static_cast<std::size_t>(i * taskforge::kNumActions +
                                  static_cast<int>(actions[i]))] = 1.0;
  return ad::constant(std::move(data), {n, taskforge::kNumActions});
}

Var relu(const Var& x) { return ad::leaky_relu(x, 0.0); }
Var abs_v(const Var& x) { return ad::leaky_relu(x, -1.0); }

// Numerically stable log(1 + exp(x)).
Var softplus(const Var& x) {
  return ad::add(relu(x),
                 ad::log(ad::add_scalar(ad::exp(ad::neg(abs_v(x))), 1.0)));
}

}  // namespace

GeneratorNet::GeneratorNet(const NetConfig& cfg, nn::Rng& rng) : cfg_(cfg) {
  if (cfg.image_size % 4 != 0)
    throw std::invalid_argument("GeneratorNet: image_size must be divisible by 4");
  const std::int64_t c2 = 2 * cfg.base_channels;
  const std::int64_t s0 = cfg.image_size / 4;
  fc_ = nn::Linear(cfg.z_dim, c2 * s0 * s0, rng);
  up1_ = nn::ConvTranspose2d(c2, cfg.base_channels, 4, 2, 1, rng);
  up2_ = nn::ConvTranspose2d(cfg.base_channels, 3, 4, 2, 1, rng);
}

Var GeneratorNet::forward(const Var& z) const {
  const std::int64_t n = z.shape()[0];
  const std::int64_t c2 = 2 * cfg_.base_channels;
  const std::int64_t s0 = cfg_.image_size / 4;
  Var h = lrelu(fc_.forward(z), cfg_);
  h = ad::reshape(h, {n, c2, s0, s0});
  h = lrelu(up1_.forward(h), cfg_);
  return ad::tanh(up2_.forward(h));
}

NamedParams GeneratorNet::named_params(const std::string& p) const {
  return {{p + ".fc.weight", fc_.weight},   {p + ".fc.bias", fc_.bias},
          {p + ".up1.weight", up1_.weight}, {p + ".up1.bias", up1_.bias},
          {p + ".up2.weight", up2_.weight}, {p + ".up2.bias", up2_.bias}};
}

CriticNet::CriticNet(const NetConfig& cfg, nn::Rng& rng) : cfg_(cfg) {
  const std::int64_t c2 = 2 * cfg.base_channels;
  const std::int64_t s0 = cfg.image_size / 4;
  c1_ = nn::Conv2d(3, cfg.base_channels, 3, 2, 1, rng);
  c2_ = nn::Conv2d(cfg.base_channels, c2, 3, 2, 1, rng);
  fc1_ = nn::Linear(c2 * s0 * s0, cfg.head_hidden, rng);
  fc2_ = nn::Linear(cfg.head_hidden, 1, rng);
}

Var CriticNet::forward(const Var& x) const {
  Var h = lrelu(c1_.forward(x), cfg_);
  h = lrelu(c2_.forward(h), cfg_);
  h = lrelu(fc1_.forward(nn::flatten_rows(h)), cfg_);
  return fc2_.forward(h);
}

NamedParams CriticNet::named_params(const std::string& p) const {
  return {{p + ".c1.weight", c1_.weight},   {p + ".c1.bias", c1_.bias},
          {p + ".c2.weight", c2_.weight},   {p + ".c2.bias", c2_.bias},
          {p + ".fc1.weight", fc1_.weight}, {p + ".fc1.bias", fc1_.bias},
          {p + ".fc2.weight", fc2_.weight}, {p + ".fc2.bias", fc2_.bias}};
}

PolicyNet::PolicyNet(const NetConfig& cfg, nn::Rng& rng) : cfg_(cfg) {
  const std::int64_t c2 = 2 * cfg.base_channels;
  const std::int64_t s0 = cfg.image_size / 4;
  c1_ = nn::Conv2d(3, cfg.base_channels, 3, 2, 1, rng);
  c2_ = nn::Conv2d(cfg.base_channels, c2, 3, 2, 1, rng);
  fc1_ = nn::Linear(c2 * s0 * s0, cfg.head_hidden, rng);
  fc2_ = nn::Linear(cfg.head_hidden, taskforge::kNumActions, rng);
}

Var PolicyNet::logits(const Var& x) const {
  Var h = lrelu(c1_.forward(x), cfg_);
  h = lrelu(c2_.forward(h), cfg_);
  h = lrelu(fc1_.forward(nn::flatten_rows(h)), cfg_);
  return fc2_.forward(h);
}

Var PolicyNet::probabilities(const Var& x) const {
  return nn::softmax_rows(logits(x));
}

NamedParams PolicyNet::named_params(const std::string& p) const {
  return {{p + ".c1.weight", c1_.weight},   {p + ".c1.bias", c1_.bias},
          {p + ".c2.weight", c2_.weight},   {p + ".c2.bias", c2_.bias},
          {p + ".fc1.weight", fc1_.weight}, {p + ".fc1.bias", fc1_.bias},
          {p + ".fc2.weight", fc2_.weight}, {p + ".fc2.bias", fc2_.bias}};
}

PredictorNet::PredictorNet(const NetConfig& cfg, nn::Rng& rng) : cfg_(cfg) {
  const std::int64_t c2 = 2 * cfg.base_channels;
  const std::int64_t s0 = cfg.image_size / 4;
  c1_ = nn::Conv2d(3, cfg.base_channels, 3, 2, 1, rng);
  c2_ = nn::Conv2d(cfg.base_channels, c2, 3, 2, 1, rng);
  enc_fc_ = nn::Linear(c2 * s0 * s0, cfg.predictor_bottleneck, rng);
  act_fc_ = nn::Linear(taskforge::kNumActions, cfg.action_embed, rng);
  dec_fc_ = nn::Linear(cfg.predictor_bottleneck + cfg.action_embed,
                       c2 * s0 * s0, rng);
  up1_ = nn::ConvTranspose2d(c2, cfg.base_channels, 4, 2, 1, rng);
  up2_ = nn::ConvTranspose2d(cfg.base_channels, 3, 4, 2, 1, rng);
}

Var PredictorNet::forward(const Var& x,
                          const std::vector<ActionId>& actions) const {
  const std::int64_t n = x.shape()[0];
  if (static_cast<std::int64_t>(actions.size()) != n)
    throw std::invalid_argument("PredictorNet: action count mismatch");
  const std::int64_t c2 = 2 * cfg_.base_channels;
  const std::int64_t s0 = cfg_.image_size / 4;
  Var h = lrelu(c1_.forward(x), cfg_);
  h = lrelu(c2_.forward(h), cfg_);
  h = lrelu(enc_fc_.forward(nn::flatten_rows(h)), cfg_);
  Var a = act_fc_.forward(one_hot_actions(actions));
  Var d = lrelu(dec_fc_.forward(nn::concat_cols(h, a)), cfg_);
  d = ad::reshape(d, {n, c2, s0, s0});
  d = lrelu(up1_.forward(d), cfg_);
  return ad::tanh(up2_.forward(d));
}

NamedParams PredictorNet::named_params(const std::string& p) const {
  return {{p + ".c1.weight", c1_.weight},
          {p + ".c1.bias", c1_.bias},
          {p + ".c2.weight", c2_.weight},
          {p + ".c2.bias", c2_.bias},
          {p + ".enc_fc.weight", enc_fc_.weight},
          {p + ".enc_fc.bias", enc_fc_.bias},
          {p + ".act_fc.weight", act_fc_.weight},
          {p + ".act_fc.bias", act_fc_.bias},
          {p + ".dec_fc.weight", dec_fc_.weight},
          {p + ".dec_fc.bias", dec_fc_.bias},
          {p + ".up1.weight", up1_.weight},
          {p + ".up1.bias", up1_.bias},
          {p + ".up2.weight", up2_.weight},
          {p + ".up2.bias", up2_.bias}};
}

ModelBundle::ModelBundle(const NetConfig& net_cfg, const OptimConfig& opt_cfg,
                         std::uint64_t init_seed)
    : net_config(net_cfg) {
  nn::Rng rng(init_seed);
  generator = GeneratorNet(net_cfg, rng);
  critic = CriticNet(net_cfg, rng);
  policy = PolicyNet(net_cfg, rng);
  predictor = PredictorNet(net_cfg, rng);
  opt_policy = nn::Adam({opt_cfg.lr_policy, 0.9, 0.999, 1e-8});
  opt_generator =
      nn::Adam({opt_cfg.lr_generator, opt_cfg.adam_beta1_gan, 0.999, 1e-8});
  opt_critic =
      nn::Adam({opt_cfg.lr_critic, opt_cfg.adam_beta1_gan, 0.999, 1e-8});
  opt_predictor = nn::Adam({opt_cfg.lr_predictor, 0.9, 0.999, 1e-8});
}

NamedParams ModelBundle::named_params() const {
  NamedParams all;
  NamedParams g = generator.named_params("generator");
  NamedParams c = critic.named_params("critic");
  NamedParams p = policy.named_params("policy");
  NamedParams f = predictor.named_params("predictor");
  all.insert(all.end(), g.begin(), g.end());
  all.insert(all.end(), c.begin(), c.end());
  all.insert(all.end(), p.begin(), p.end());
  all.insert(all.end(), f.begin(), f.end());
  return all;
}

std::vector<Var> ModelBundle::params_of(const NamedParams& named) const {
  std::vector<Var> out;
  out.reserve(named.size());
  for (const auto& [name, v] : named) out.push_back(v);
  return out;
}

namespace {

void put_i64(std::string& out, std::int64_t v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof(v));
}
void put_f64(std::string& out, double v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof(v));
}
void put_str(std::string& out, const std::string& s) {
  put_i64(out, static_cast<std::int64_t>(s.size()));
  out.append(s);
}
void put_doubles(std::string& out, const std::vector<double>& v) {
  put_i64(out, static_cast<std::int64_t>(v.size()));
  out.append(reinterpret_cast<const char*>(v.data()),
             v.size() * sizeof(double));
}

struct Reader {
  const std::uint8_t* p;
  const std::uint8_t* end;
  void need(std::size_t n) {
    if (p + n > end)
      throw std::runtime_error("checkpoint: truncated file");
  }
  std::int64_t i64() {
    need(8);
    std::int64_t v;
    std::memcpy(&v, p, 8);
    p += 8;
    return v;
  }
  double f64() {
    need(8);
    double v;
    std::memcpy(&v, p, 8);
    p += 8;
    return v;
  }
  std::string str() {
    auto n = static_cast<std::size_t>(i64());
    need(n);
    std::string s(reinterpret_cast<const char*>(p), n);
    p += n;
    return s;
  }
  std::vector<double> doubles() {
    auto n = static_cast<std::size_t>(i64());
    need(n * sizeof(double));
    std::vector<double> v(n);
    std::memcpy(v.data(), p, n * sizeof(double));
    p += n * sizeof(double);
    return v;
  }
};

constexpr char kMagic[] = "CILABCK1";

void put_optimizer(std::string& out, const nn::Adam& opt) {
  const auto& cfg = opt.config();
  put_f64(out, cfg.lr);
  put_f64(out, cfg.beta1);
  put_f64(out, cfg.beta2);
  put_f64(out, cfg.eps);
  put_i64(out, opt.step_count());
  auto& opt_mut = const_cast<nn::Adam&>(opt);
  put_i64(out, static_cast<std::int64_t>(opt_mut.moment1().size()));
  for (std::size_t i = 0; i < opt_mut.moment1().size(); ++i) {
    put_doubles(out, opt_mut.moment1()[i]);
    put_doubles(out, opt_mut.moment2()[i]);
  }
}

nn::Adam read_optimizer(Reader& r) {
  nn::AdamConfig cfg;
  cfg.lr = r.f64();
  cfg.beta1 = r.f64();
  cfg.beta2 = r.f64();
  cfg.eps = r.f64();
  nn::Adam opt(cfg);
  std::int64_t t = r.i64();
  auto n = static_cast<std::size_t>(r.i64());
  std::vector<std::vector<double>> m(n), v(n);
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = r.doubles();
    v[i] = r.doubles();
  }
  opt.restore(t, std::move(m), std::move(v));
  return opt;
}

}  // namespace

std::vector<std::uint8_t> ModelBundle::serialize() const {
  std::string out;
  out.append(kMagic, 8);
  put_i64(out, net_config.image_size);
  put_i64(out, net_config.z_dim);
  put_i64(out, net_config.base_channels);
  put_i64(out, net_config.head_hidden);
  put_i64(out, net_config.predictor_bottleneck);
  put_i64(out, net_config.action_embed);
  put_f64(out, net_config.leaky_slope);
  put_i64(out, task_counter);
  NamedParams named = named_params();
  put_i64(out, static_cast<std::int64_t>(named.size()));
  for (const auto& [name, v] : named) {
    put_str(out, name);
    put_i64(out, static_cast<std::int64_t>(v.shape().size()));
    for (auto d : v.shape()) put_i64(out, d);
    put_doubles(out, v.data());
  }
  put_optimizer(out, opt_policy);
  put_optimizer(out, opt_generator);
  put_optimizer(out, opt_critic);
  put_optimizer(out, opt_predictor);
  return std::vector<std::uint8_t>(out.begin(), out.end());
}

void ModelBundle::save_checkpoint(const std::string& path) const {
  auto bytes = serialize();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

ModelBundle ModelBundle::load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  std::string bytes = ss.str();
  Reader r{reinterpret_cast<const std::uint8_t*>(bytes.data()),
           reinterpret_cast<const std::uint8_t*>(bytes.data()) + bytes.size()};
  r.need(8);
  if (std::memcmp(r.p, kMagic, 8) != 0)
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  r.p += 8;
  NetConfig cfg;
  cfg.image_size = static_cast<int>(r.i64());
  cfg.z_dim = static_cast<int>(r.i64());
  cfg.base_channels = static_cast<int>(r.i64());
  cfg.head_hidden = static_cast<int>(r.i64());
  cfg.predictor_bottleneck = static_cast<int>(r.i64());
  cfg.action_embed = static_cast<int>(r.i64());
  cfg.leaky_slope = r.f64();
  ModelBundle bundle(cfg, OptimConfig{}, /*init_seed=*/0);
  bundle.task_counter = static_cast<int>(r.i64());
  auto n_tensors = static_cast<std::size_t>(r.i64());
  NamedParams named = bundle.named_params();
  for (std::size_t i = 0; i < n_tensors; ++i) {
    std::string name = r.str();
    auto ndim = static_cast<std::size_t>(r.i64());
    ad::Shape shape(ndim);
    for (auto& d : shape) d = r.i64();
    std::vector<double> data = r.doubles();
    auto it = std::find_if(named.begin(), named.end(),
                           [&](const auto& kv) { return kv.first == name; });
    if (it == named.end())
      throw std::runtime_error("load_checkpoint: unknown parameter " + name);
    if (it->second.shape() != shape)
      throw std::runtime_error("load_checkpoint: shape mismatch for parameter " +
                               name);
    it->second.mutable_data() = std::move(data);
  }
  bundle.opt_policy = read_optimizer(r);
  bundle.opt_generator = read_optimizer(r);
  bundle.opt_critic = read_optimizer(r);
  bundle.opt_predictor = read_optimizer(r);
  return bundle;
}

std::uint64_t ModelBundle::content_hash() const {
  std::uint64_t h = 14695981039346656037ull;
  for (std::uint8_t b : serialize()) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

Var frames_to_var(const std::vector<const Frame*>& frames) {
  if (frames.empty())
    throw std::invalid_argument("frames_to_var: empty batch");
  const int s = frames[0]->size;
  const std::int64_t n = static_cast<std::int64_t>(frames.size());
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(n * 3 * s * s));
  for (const Frame* f : frames) {
    if (f->size != s)
      throw std::invalid_argument("frames_to_var: mixed frame sizes");
    data.insert(data.end(), f->pixels.begin(), f->pixels.end());
  }
  return ad::constant(std::move(data), {n, 3, s, s});
}

Var frame_to_var(const Frame& f) { return frames_to_var({&f}); }

Frame var_row_to_frame(const Var& batch, std::int64_t row, int image_size) {
  Frame f;
  f.size = image_size;
  const std::size_t d = static_cast<std::size_t>(3 * image_size * image_size);
  f.pixels.assign(batch.data().begin() + static_cast<std::ptrdiff_t>(row * d),
                  batch.data().begin() +
                      static_cast<std::ptrdiff_t>((row + 1) * d));
  return f;
}

Var policy_loss(const PolicyNet& policy,
                const std::vector<SampledPair>& batch) {
  if (batch.empty()) throw std::invalid_argument("policy_loss: empty batch");
  std::vector<const Frame*> frames;
  std::vector<std::int64_t> actions;
  for (const auto& p : batch) {
    frames.push_back(p.frame);
    actions.push_back(static_cast<std::int64_t>(p.action));
  }
  Var logp = nn::log_softmax_rows(policy.logits(frames_to_var(frames)));
  return ad::neg(ad::mean_all(nn::pick_rows(logp, actions)));
}

Var predictor_loss(const PredictorNet& predictor,
                   const std::vector<SampledTransition>& batch) {
  if (batch.empty())
    throw std::invalid_argument("predictor_loss: empty batch");
  std::vector<const Frame*> frames, next;
  std::vector<ActionId> actions;
  for (const auto& t : batch) {
    frames.push_back(t.frame);
    actions.push_back(t.action);
    next.push_back(t.next);
  }
  Var pred = predictor.forward(frames_to_var(frames), actions);
  Var diff = ad::sub(pred, frames_to_var(next));
  return ad::mean_all(ad::mul(diff, diff));
}

Var gradient_penalty(const CriticNet& critic, const Var& real, const Var& fake,
                     std::uint64_t rng_seed) {
  if (real.shape() != fake.shape())
    throw std::invalid_argument("gradient_penalty: batch shape mismatch");
  const std::int64_t n = real.shape()[0];
  const std::int64_t d = real.size() / n;
  std::mt19937_64 gen(rng_seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> interp(real.data().size());
  for (std::int64_t i = 0; i < n; ++i) {
    double eps = u(gen);
    for (std::int64_t j = 0; j < d; ++j) {
      std::size_t k = static_cast<std::size_t>(i * d + j);
      interp[k] = eps * real.data()[k] + (1.0 - eps) * fake.data()[k];
    }
  }
  Var x = ad::leaf(std::move(interp), real.shape());
  Var score_sum = ad::sum_all(critic.forward(x));
  Var g = ad::grad(score_sum, {x}, /*create_graph=*/true)[0];
  Var sq = ad::mul(g, g);
  Var per_sample = nn::row_sum(ad::reshape(sq, {n, d}));
  // Small floor keeps the sqrt differentiable at zero-gradient points.
  Var norm = ad::pow_scalar(ad::add_scalar(per_sample, 1e-12), 0.5);
  Var excess = ad::add_scalar(norm, -1.0);
  return ad::mean_all(ad::mul(excess, excess));
}

Var critic_loss(const CriticNet& critic, const Var& real, const Var& fake,
                double gp_weight, std::uint64_t rng_seed) {
  if (real.shape() != fake.shape())
    throw std::invalid_argument("critic_loss: batch shape mismatch");
  Var sep = ad::sub(ad::mean_all(critic.forward(fake)),
                    ad::mean_all(critic.forward(real)));
  Var gp = gradient_penalty(critic, real, fake, rng_seed);
  return ad::add(sep, ad::mul_scalar(gp, gp_weight));
}

Var generator_loss(const CriticNet& critic, const GeneratorNet& generator,
                   const Var& z_batch) {
  return ad::neg(ad::mean_all(critic.forward(generator.forward(z_batch))));
}

Var vanilla_critic_loss(const CriticNet& critic, const Var& real,
                        const Var& fake) {
  Var l_real = ad::mean_all(softplus(ad::neg(critic.forward(real))));
  Var l_fake = ad::mean_all(softplus(critic.forward(fake)));
  return ad::add(l_real, l_fake);
}

Var vanilla_generator_loss(const CriticNet& critic,
                           const GeneratorNet& generator, const Var& z_batch) {
  return ad::mean_all(
      softplus(ad::neg(critic.forward(generator.forward(z_batch)))));
}

ActionId act(const PolicyNet& policy, const Frame& frame, ActMode mode,
             std::uint64_t rng_seed) {
  ad::NoGradGuard ng;
  Var p = policy.probabilities(frame_to_var(frame));
  const auto& probs = p.data();
  if (mode == ActMode::greedy) {
    int best = 0;
    for (int a = 1; a < taskforge::kNumActions; ++a)
      if (probs[static_cast<std::size_t>(a)] >
          probs[static_cast<std::size_t>(best)])
        best = a;
    return static_cast<ActionId>(best);
  }
  std::mt19937_64 gen(rng_seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double r = u(gen), acc = 0.0;
  for (int a = 0; a < taskforge::kNumActions; ++a) {
    acc += probs[static_cast<std::size_t>(a)];
    if (r < acc) return static_cast<ActionId>(a);
  }
  return static_cast<ActionId>(taskforge::kNumActions - 1);
}

std::vector<ActionId> act_greedy_batch(
    const PolicyNet& policy, const std::vector<const Frame*>& frames) {
  ad::NoGradGuard ng;
  Var p = policy.probabilities(frames_to_var(frames));
  const std::int64_t n = p.shape()[0];
  std::vector<ActionId> out;
  out.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    int best = 0;
    for (int a = 1; a < taskforge::kNumActions; ++a)
      if (p.data()[static_cast<std::size_t>(i * taskforge::kNumActions + a)] >
          p.data()[static_cast<std::size_t>(i * taskforge::kNumActions + best)])
        best = a;
    out.push_back(static_cast<ActionId>(best));
  }
  return out;
}

Frame predict_next(const PredictorNet& predictor, const Frame& frame,
                   ActionId action) {
  ad::NoGradGuard ng;
  Var out = predictor.forward(frame_to_var(frame), {action});
  return var_row_to_frame(out, 0, frame.size);
}

Var sample_latents(int m, int z_dim, std::uint64_t rng_seed) {
  nn::Rng rng(rng_seed);
  return ad::constant(rng.gaussian_vector(static_cast<std::size_t>(m * z_dim)),
                      {m, z_dim});
}

std::vector<Frame> sample_first_frames(const GeneratorNet& generator, int m,
                                       std::uint64_t rng_seed) {
  if (m < 1)
    throw std::invalid_argument("sample_first_frames: m must be >= 1");
  ad::NoGradGuard ng;
  const int z_dim = generator.config().z_dim;
  // One latent draw for the whole request, forwarded in bounded chunks so a
  // large oversampled pool never materializes all layer activations at once.
  // Every op is per-sample, so chunking is numerically identical to a single
  // batched forward.
  nn::Rng rng(rng_seed);
  std::vector<double> latents =
      rng.gaussian_vector(static_cast<std::size_t>(m) * z_dim);
  constexpr int kChunk = 256;
  std::vector<Frame> frames;
  frames.reserve(static_cast<std::size_t>(m));
  for (int start = 0; start < m; start += kChunk) {
    int n = std::min(kChunk, m - start);
    std::vector<double> slice(
        latents.begin() + static_cast<std::size_t>(start) * z_dim,
        latents.begin() + static_cast<std::size_t>(start + n) * z_dim);
    Var z = ad::constant(std::move(slice), {n, z_dim});
    Var out = generator.forward(z);
    for (int i = 0; i < n; ++i)
      frames.push_back(
          var_row_to_frame(out, i, generator.config().image_size));
  }
  return frames;
}

}  // namespace cilab::nets
