// Small neural-network layer library on top of the autodiff engine.
// Convolutions are expressed as gather (im2col) + matmul, and transposed
// convolutions as matmul + scatter_add, so every layer is differentiable to
// arbitrary order.
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "cilab/autodiff.hpp"

namespace cilab::nn {

using ad::Shape;
using ad::Var;

using NamedParams = std::vector<std::pair<std::string, Var>>;

// Deterministic per-purpose random stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform(double lo, double hi);
  double gaussian();
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);  // inclusive
  std::vector<double> gaussian_vector(std::size_t n);
  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

// Scaled-uniform fan-in initialization: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Var init_param(const Shape& shape, std::int64_t fan_in, Rng& rng);

struct Linear {
  Linear() = default;
  Linear(std::int64_t in, std::int64_t out, Rng& rng);
  Var forward(const Var& x) const;  // x: {N, in} -> {N, out}
  Var weight;                       // {out, in}
  Var bias;                         // {out}
};

struct Conv2d {
  Conv2d() = default;
  Conv2d(std::int64_t in_ch, std::int64_t out_ch, std::int64_t kernel,
         std::int64_t stride, std::int64_t pad, Rng& rng);
  Var forward(const Var& x) const;  // x: {N, C, H, W}
  std::int64_t out_dim(std::int64_t in_dim) const;
  Var weight;  // {out_ch, in_ch*kernel*kernel}
  Var bias;    // {out_ch}
  std::int64_t in_ch = 0, out_ch = 0, kernel = 0, stride = 1, pad = 0;
};

struct ConvTranspose2d {
  ConvTranspose2d() = default;
  ConvTranspose2d(std::int64_t in_ch, std::int64_t out_ch, std::int64_t kernel,
                  std::int64_t stride, std::int64_t pad, Rng& rng);
  Var forward(const Var& x) const;  // x: {N, C, H, W}
  std::int64_t out_dim(std::int64_t in_dim) const;
  Var weight;  // {in_ch, out_ch*kernel*kernel}
  Var bias;    // {out_ch}
  std::int64_t in_ch = 0, out_ch = 0, kernel = 0, stride = 1, pad = 0;
};

// Row-wise helpers on {N, D} matrices.
Var row_sum(const Var& x);                        // {N, D} -> {N, 1}
Var broadcast_cols(const Var& col, std::int64_t d);  // {N, 1} -> {N, d}
Var softmax_rows(const Var& logits);
Var log_softmax_rows(const Var& logits);
// picks[i] = x[i, index[i]]; result {N, 1}
Var pick_rows(const Var& x, const std::vector<std::int64_t>& index);
Var concat_cols(const Var& a, const Var& b);  // {N, da} ++ {N, db}
Var flatten_rows(const Var& x);  // {N, ...} -> {N, prod(rest)}

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam over a fixed parameter list; state is positional, so the parameter
// order must stay stable across steps and checkpoint round trips.
class Adam {
 public:
  Adam() = default;
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}
  void step(std::vector<Var>& params, const std::vector<Var>& grads);
  const AdamConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }

  std::int64_t step_count() const { return t_; }
  std::vector<std::vector<double>>& moment1() { return m_; }
  std::vector<std::vector<double>>& moment2() { return v_; }
  void restore(std::int64_t t, std::vector<std::vector<double>> m,
               std::vector<std::vector<double>> v);

 private:
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace cilab::nn
