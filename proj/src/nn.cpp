#include "cilab/nn.hpp"

#include <cmath>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace cilab::nn {

namespace {

using ad::IndexMap;

// Index maps depend only on geometry, so they are built once and shared.
std::mutex g_cache_mutex;
std::unordered_map<std::string, IndexMap>& cache() {
  static std::unordered_map<std::string, IndexMap> c;
  return c;
}

IndexMap cached(const std::string& key,
                const std::function<std::vector<std::int64_t>()>& build) {
  std::lock_guard<std::mutex> lock(g_cache_mutex);
  auto& c = cache();
  auto it = c.find(key);
  if (it != c.end()) return it->second;
  auto m = std::make_shared<std::vector<std::int64_t>>(build());
  c.emplace(key, m);
  return m;
}

std::string geom_key(const char* tag, std::initializer_list<std::int64_t> v) {
  std::ostringstream os;
  os << tag;
  for (auto x : v) os << ':' << x;
  return os.str();
}

// Column r = (ci, ki, kj), column index c = (n, oh, ow). Entry is the flat
// index into the {N, C, H, W} input, or -1 for padding.
IndexMap im2col_idx(std::int64_t n, std::int64_t c, std::int64_t h,
                    std::int64_t w, std::int64_t k, std::int64_t s,
                    std::int64_t p, std::int64_t oh, std::int64_t ow) {
  return cached(geom_key("im2col", {n, c, h, w, k, s, p}), [=] {
    std::vector<std::int64_t> idx(
        static_cast<std::size_t>(c * k * k * n * oh * ow));
    std::size_t j = 0;
    for (std::int64_t ci = 0; ci < c; ++ci)
      for (std::int64_t ki = 0; ki < k; ++ki)
        for (std::int64_t kj = 0; kj < k; ++kj)
          for (std::int64_t ni = 0; ni < n; ++ni)
            for (std::int64_t oi = 0; oi < oh; ++oi)
              for (std::int64_t oj = 0; oj < ow; ++oj) {
                std::int64_t hi = oi * s - p + ki;
                std::int64_t wi = oj * s - p + kj;
                bool inside = hi >= 0 && hi < h && wi >= 0 && wi < w;
                idx[j++] = inside ? ((ni * c + ci) * h + hi) * w + wi : -1;
              }
    return idx;
  });
}

// {OC, N*OH*OW} matmul result -> {N, OC, OH, OW}.
IndexMap perm_to_nchw_idx(std::int64_t n, std::int64_t oc, std::int64_t oh,
                          std::int64_t ow) {
  return cached(geom_key("permnchw", {n, oc, oh, ow}), [=] {
    std::vector<std::int64_t> idx(static_cast<std::size_t>(n * oc * oh * ow));
    std::size_t j = 0;
    for (std::int64_t ni = 0; ni < n; ++ni)
      for (std::int64_t ci = 0; ci < oc; ++ci)
        for (std::int64_t oi = 0; oi < oh; ++oi)
          for (std::int64_t oj = 0; oj < ow; ++oj)
            idx[j++] = ci * (n * oh * ow) + (ni * oh + oi) * ow + oj;
    return idx;
  });
}

// {N, C, H, W} -> {C, N*H*W}.
IndexMap perm_to_cnhw_idx(std::int64_t n, std::int64_t c, std::int64_t h,
                          std::int64_t w) {
  return cached(geom_key("permcnhw", {n, c, h, w}), [=] {
    std::vector<std::int64_t> idx(static_cast<std::size_t>(n * c * h * w));
    std::size_t j = 0;
    for (std::int64_t ci = 0; ci < c; ++ci)
      for (std::int64_t ni = 0; ni < n; ++ni)
        for (std::int64_t hi = 0; hi < h; ++hi)
          for (std::int64_t wi = 0; wi < w; ++wi)
            idx[j++] = ((ni * c + ci) * h + hi) * w + wi;
    return idx;
  });
}

// Broadcast a {C} bias over {N, C, H, W}.
IndexMap bias_nchw_idx(std::int64_t n, std::int64_t c, std::int64_t h,
                       std::int64_t w) {
  return cached(geom_key("biasnchw", {n, c, h, w}), [=] {
    std::vector<std::int64_t> idx(static_cast<std::size_t>(n * c * h * w));
    std::size_t j = 0;
    for (std::int64_t ni = 0; ni < n; ++ni)
      for (std::int64_t ci = 0; ci < c; ++ci)
        for (std::int64_t k = 0; k < h * w; ++k) idx[j++] = ci;
    return idx;
  });
}

IndexMap bias_rows_idx(std::int64_t n, std::int64_t d) {
  return cached(geom_key("biasrows", {n, d}), [=] {
    std::vector<std::int64_t> idx(static_cast<std::size_t>(n * d));
    for (std::int64_t j = 0; j < n * d; ++j) idx[j] = j % d;
    return idx;
  });
}

IndexMap broadcast_cols_idx(std::int64_t n, std::int64_t d) {
  return cached(geom_key("bccols", {n, d}), [=] {
    std::vector<std::int64_t> idx(static_cast<std::size_t>(n * d));
    for (std::int64_t j = 0; j < n * d; ++j) idx[j] = j / d;
    return idx;
  });
}

}  // namespace

double Rng::uniform(double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  return d(gen_);
}

double Rng::gaussian() {
  std::normal_distribution<double> d(0.0, 1.0);
  return d(gen_);
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  std::uniform_int_distribution<std::int64_t> d(lo, hi);
  return d(gen_);
}

std::vector<double> Rng::gaussian_vector(std::size_t n) {
  std::vector<double> v(n);
  std::normal_distribution<double> d(0.0, 1.0);
  for (auto& x : v) x = d(gen_);
  return v;
}

Var init_param(const Shape& shape, std::int64_t fan_in, Rng& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> data(static_cast<std::size_t>(ad::numel(shape)));
  for (auto& x : data) x = rng.uniform(-bound, bound);
  return ad::leaf(std::move(data), shape);
}

Linear::Linear(std::int64_t in, std::int64_t out, Rng& rng) {
  weight = init_param({out, in}, in, rng);
  bias = ad::leaf(std::vector<double>(static_cast<std::size_t>(out), 0.0),
                  {out});
}

Var Linear::forward(const Var& x) const {
  const std::int64_t n = x.shape()[0];
  const std::int64_t out = weight.shape()[0];
  Var y = ad::matmul(x, ad::transpose(weight));
  Var b = ad::gather(bias, bias_rows_idx(n, out), {n, out});
  return ad::add(y, b);
}

Conv2d::Conv2d(std::int64_t in_ch_, std::int64_t out_ch_, std::int64_t kernel_,
               std::int64_t stride_, std::int64_t pad_, Rng& rng)
    : in_ch(in_ch_), out_ch(out_ch_), kernel(kernel_), stride(stride_),
      pad(pad_) {
  std::int64_t fan_in = in_ch * kernel * kernel;
  weight = init_param({out_ch, fan_in}, fan_in, rng);
  bias = ad::leaf(std::vector<double>(static_cast<std::size_t>(out_ch), 0.0),
                  {out_ch});
}

std::int64_t Conv2d::out_dim(std::int64_t in_dim) const {
  return (in_dim + 2 * pad - kernel) / stride + 1;
}

Var Conv2d::forward(const Var& x) const {
  const auto& s = x.shape();
  if (s.size() != 4 || s[1] != in_ch)
    throw std::invalid_argument("Conv2d: bad input shape");
  const std::int64_t n = s[0], h = s[2], w = s[3];
  const std::int64_t oh = out_dim(h), ow = out_dim(w);
  const std::int64_t ckk = in_ch * kernel * kernel;
  Var col = ad::gather(x, im2col_idx(n, in_ch, h, w, kernel, stride, pad, oh, ow),
                       {ckk, n * oh * ow});
  Var y0 = ad::matmul(weight, col);
  Var y = ad::gather(y0, perm_to_nchw_idx(n, out_ch, oh, ow),
                     {n, out_ch, oh, ow});
  Var b = ad::gather(bias, bias_nchw_idx(n, out_ch, oh, ow),
                     {n, out_ch, oh, ow});
  return ad::add(y, b);
}

ConvTranspose2d::ConvTranspose2d(std::int64_t in_ch_, std::int64_t out_ch_,
                                 std::int64_t kernel_, std::int64_t stride_,
                                 std::int64_t pad_, Rng& rng)
    : in_ch(in_ch_), out_ch(out_ch_), kernel(kernel_), stride(stride_),
      pad(pad_) {
  std::int64_t fan_in = in_ch * kernel * kernel;
  weight = init_param({in_ch, out_ch * kernel * kernel}, fan_in, rng);
  bias = ad::leaf(std::vector<double>(static_cast<std::size_t>(out_ch), 0.0),
                  {out_ch});
}

std::int64_t ConvTranspose2d::out_dim(std::int64_t in_dim) const {
  return (in_dim - 1) * stride - 2 * pad + kernel;
}

Var ConvTranspose2d::forward(const Var& x) const {
  const auto& s = x.shape();
  if (s.size() != 4 || s[1] != in_ch)
    throw std::invalid_argument("ConvTranspose2d: bad input shape");
  const std::int64_t n = s[0], h = s[2], w = s[3];
  const std::int64_t oh = out_dim(h), ow = out_dim(w);
  // Adjoint of the conv that would map {N, OC, OH, OW} down to {N, C, H, W}.
  Var xm = ad::gather(x, perm_to_cnhw_idx(n, in_ch, h, w), {in_ch, n * h * w});
  Var cols = ad::matmul(ad::transpose(weight), xm);
  Var y = ad::scatter_add(
      cols, im2col_idx(n, out_ch, oh, ow, kernel, stride, pad, h, w),
      {n, out_ch, oh, ow});
  Var b = ad::gather(bias, bias_nchw_idx(n, out_ch, oh, ow),
                     {n, out_ch, oh, ow});
  return ad::add(y, b);
}

Var row_sum(const Var& x) {
  const std::int64_t d = x.shape()[1];
  return ad::matmul(x, ad::ones({d, 1}));
}

Var broadcast_cols(const Var& col, std::int64_t d) {
  const std::int64_t n = col.shape()[0];
  return ad::gather(col, broadcast_cols_idx(n, d), {n, d});
}

namespace {
// Row max as a constant shift; the shift cancels in softmax so treating it
// as non-differentiable is exact.
Var row_max_const(const Var& x) {
  const std::int64_t n = x.shape()[0], d = x.shape()[1];
  std::vector<double> m(static_cast<std::size_t>(n * d));
  for (std::int64_t i = 0; i < n; ++i) {
    double mx = x.data()[static_cast<std::size_t>(i * d)];
    for (std::int64_t j = 1; j < d; ++j)
      mx = std::max(mx, x.data()[static_cast<std::size_t>(i * d + j)]);
    for (std::int64_t j = 0; j < d; ++j)
      m[static_cast<std::size_t>(i * d + j)] = mx;
  }
  return ad::constant(std::move(m), {n, d});
}
}  // namespace

Var softmax_rows(const Var& logits) {
  const std::int64_t d = logits.shape()[1];
  Var e = ad::exp(ad::sub(logits, row_max_const(logits)));
  Var s = broadcast_cols(row_sum(e), d);
  return ad::div(e, s);
}

Var log_softmax_rows(const Var& logits) {
  const std::int64_t d = logits.shape()[1];
  Var shifted = ad::sub(logits, row_max_const(logits));
  Var lse = broadcast_cols(ad::log(row_sum(ad::exp(shifted))), d);
  return ad::sub(shifted, lse);
}

Var pick_rows(const Var& x, const std::vector<std::int64_t>& index) {
  const std::int64_t n = x.shape()[0], d = x.shape()[1];
  if (static_cast<std::int64_t>(index.size()) != n)
    throw std::invalid_argument("pick_rows: index size mismatch");
  auto idx = std::make_shared<std::vector<std::int64_t>>(index.size());
  for (std::int64_t i = 0; i < n; ++i) {
    if (index[static_cast<std::size_t>(i)] < 0 ||
        index[static_cast<std::size_t>(i)] >= d)
      throw std::out_of_range("pick_rows: index out of range");
    (*idx)[static_cast<std::size_t>(i)] =
        i * d + index[static_cast<std::size_t>(i)];
  }
  return ad::gather(x, idx, {n, 1});
}

Var concat_cols(const Var& a, const Var& b) {
  const std::int64_t n = a.shape()[0], da = a.shape()[1], db = b.shape()[1];
  if (b.shape()[0] != n)
    throw std::invalid_argument("concat_cols: row count mismatch");
  auto ia = cached(geom_key("concatA", {n, da, db}), [=] {
    std::vector<std::int64_t> idx(static_cast<std::size_t>(n * da));
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < da; ++j)
        idx[static_cast<std::size_t>(i * da + j)] = i * (da + db) + j;
    return idx;
  });
  auto ib = cached(geom_key("concatB", {n, da, db}), [=] {
    std::vector<std::int64_t> idx(static_cast<std::size_t>(n * db));
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < db; ++j)
        idx[static_cast<std::size_t>(i * db + j)] = i * (da + db) + da + j;
    return idx;
  });
  return ad::add(ad::scatter_add(a, ia, {n, da + db}),
                 ad::scatter_add(b, ib, {n, da + db}));
}

Var flatten_rows(const Var& x) {
  const std::int64_t n = x.shape()[0];
  return ad::reshape(x, {n, x.size() / n});
}

void Adam::step(std::vector<Var>& params, const std::vector<Var>& grads) {
  if (params.size() != grads.size())
    throw std::invalid_argument("Adam: params/grads size mismatch");
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i].data().size(), 0.0);
      v_[i].assign(params[i].data().size(), 0.0);
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].mutable_data();
    const auto& g = grads[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m_[i][k] = cfg_.beta1 * m_[i][k] + (1.0 - cfg_.beta1) * g[k];
      v_[i][k] = cfg_.beta2 * v_[i][k] + (1.0 - cfg_.beta2) * g[k] * g[k];
      double mh = m_[i][k] / bc1;
      double vh = v_[i][k] / bc2;
      p[k] -= cfg_.lr * mh / (std::sqrt(vh) + cfg_.eps);
    }
  }
}

void Adam::restore(std::int64_t t, std::vector<std::vector<double>> m,
                   std::vector<std::vector<double>> v) {
  t_ = t;
  m_ = std::move(m);
  v_ = std::move(v);
}

}  // namespace cilab::nn
