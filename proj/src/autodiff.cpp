#include "cilab/autodiff.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace cilab::ad {

namespace {

thread_local bool g_grad_enabled = true;

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

Var make_node(std::vector<double> data, Shape shape, std::vector<Var> parents,
              std::function<std::vector<Var>(const Var&)> vjp) {
  auto n = std::make_shared<Node>();
  n->data = std::move(data);
  n->shape = std::move(shape);
  if (static_cast<std::int64_t>(n->data.size()) != numel(n->shape))
    throw std::logic_error("autodiff: data size does not match shape");
  bool track = false;
  if (g_grad_enabled) {
    for (const auto& p : parents)
      if (p.requires_grad()) track = true;
  }
  if (track) {
    n->requires_grad = true;
    n->parents = std::move(parents);
    n->vjp = std::move(vjp);
  }
  return Var(std::move(n));
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string("autodiff: shape mismatch in ") +
                                op);
}

}  // namespace

std::int64_t numel(const Shape& s) {
  std::int64_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

const std::vector<double>& Var::data() const { return node_->data; }
std::vector<double>& Var::mutable_data() { return node_->data; }
const Shape& Var::shape() const { return node_->shape; }
std::int64_t Var::size() const { return static_cast<std::int64_t>(node_->data.size()); }
bool Var::requires_grad() const { return node_ && node_->requires_grad; }

double Var::item() const {
  if (size() != 1) throw std::logic_error("autodiff: item() on non-scalar");
  return node_->data[0];
}

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

bool grad_enabled() { return g_grad_enabled; }

Var constant(std::vector<double> data, Shape shape) {
  auto n = std::make_shared<Node>();
  n->data = std::move(data);
  n->shape = std::move(shape);
  if (static_cast<std::int64_t>(n->data.size()) != numel(n->shape))
    throw std::logic_error("autodiff: data size does not match shape");
  return Var(std::move(n));
}

Var constant_scalar(double v) { return constant({v}, {1}); }

Var leaf(std::vector<double> data, Shape shape) {
  Var v = constant(std::move(data), std::move(shape));
  v.node()->requires_grad = true;
  return v;
}

Var zeros(const Shape& shape) {
  return constant(std::vector<double>(numel(shape), 0.0), shape);
}

Var ones(const Shape& shape) {
  return constant(std::vector<double>(numel(shape), 1.0), shape);
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::int64_t i = 0; i < a.size(); ++i)
    out[i] = a.data()[i] + b.data()[i];
  return make_node(std::move(out), a.shape(), {a, b},
                   [](const Var& g) { return std::vector<Var>{g, g}; });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::int64_t i = 0; i < a.size(); ++i)
    out[i] = a.data()[i] - b.data()[i];
  return make_node(std::move(out), a.shape(), {a, b}, [](const Var& g) {
    return std::vector<Var>{g, neg(g)};
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::int64_t i = 0; i < a.size(); ++i)
    out[i] = a.data()[i] * b.data()[i];
  return make_node(std::move(out), a.shape(), {a, b}, [a, b](const Var& g) {
    return std::vector<Var>{mul(g, b), mul(g, a)};
  });
}

Var div(const Var& a, const Var& b) {
  check_same_shape(a, b, "div");
  std::vector<double> out(a.size());
  for (std::int64_t i = 0; i < a.size(); ++i)
    out[i] = a.data()[i] / b.data()[i];
  return make_node(std::move(out), a.shape(), {a, b}, [a, b](const Var& g) {
    Var da = div(g, b);
    Var db = neg(div(mul(g, a), mul(b, b)));
    return std::vector<Var>{da, db};
  });
}

Var neg(const Var& a) {
  std::vector<double> out(a.size());
  for (std::int64_t i = 0; i < a.size(); ++i) out[i] = -a.data()[i];
  return make_node(std::move(out), a.shape(), {a}, [](const Var& g) {
    return std::vector<Var>{neg(g)};
  });
}

Var add_scalar(const Var& a, double c) {
  std::vector<double> out(a.size());
  for (std::int64_t i = 0; i < a.size(); ++i) out[i] = a.data()[i] + c;
  return make_node(std::move(out), a.shape(), {a},
                   [](const Var& g) { return std::vector<Var>{g}; });
}

Var mul_scalar(const Var& a, double c) {
  std::vector<double> out(a.size());
  for (std::int64_t i = 0; i < a.size(); ++i) out[i] = a.data()[i] * c;
  return make_node(std::move(out), a.shape(), {a}, [c](const Var& g) {
    return std::vector<Var>{mul_scalar(g, c)};
  });
}

Var exp(const Var& a) {
  std::vector<double> out(a.size());
  for (std::int64_t i = 0; i < a.size(); ++i) out[i] = std::exp(a.data()[i]);
  return make_node(std::move(out), a.shape(), {a}, [a](const Var& g) {
    return std::vector<Var>{mul(g, exp(a))};
  });
}

Var log(const Var& a) {
  std::vector<double> out(a.size());
  for (std::int64_t i = 0; i < a.size(); ++i) out[i] = std::log(a.data()[i]);
  return make_node(std::move(out), a.shape(), {a}, [a](const Var& g) {
    return std::vector<Var>{div(g, a)};
  });
}

Var tanh(const Var& a) {
  std::vector<double> out(a.size());
  for (std::int64_t i = 0; i < a.size(); ++i) out[i] = std::tanh(a.data()[i]);
  return make_node(std::move(out), a.shape(), {a}, [a](const Var& g) {
    Var t = tanh(a);
    Var one_minus_t2 = add_scalar(neg(mul(t, t)), 1.0);
    return std::vector<Var>{mul(g, one_minus_t2)};
  });
}

Var pow_scalar(const Var& a, double p) {
  std::vector<double> out(a.size());
  for (std::int64_t i = 0; i < a.size(); ++i)
    out[i] = std::pow(a.data()[i], p);
  return make_node(std::move(out), a.shape(), {a}, [a, p](const Var& g) {
    return std::vector<Var>{mul_scalar(mul(g, pow_scalar(a, p - 1.0)), p)};
  });
}

Var leaky_relu(const Var& a, double negative_slope) {
  std::vector<double> out(a.size());
  std::vector<double> mask(a.size());
  for (std::int64_t i = 0; i < a.size(); ++i) {
    double f = a.data()[i] >= 0.0 ? 1.0 : negative_slope;
    mask[i] = f;
    out[i] = f * a.data()[i];
  }
  // The mask is locally constant; its derivative is zero almost everywhere,
  // so treating it as a constant keeps second-order grads exact.
  Var mask_c = constant(std::move(mask), a.shape());
  return make_node(std::move(out), a.shape(), {a}, [mask_c](const Var& g) {
    return std::vector<Var>{mul(g, mask_c)};
  });
}

Var matmul(const Var& a, const Var& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 ||
      a.shape()[1] != b.shape()[0])
    throw std::invalid_argument("autodiff: matmul shape mismatch");
  const std::int64_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  std::vector<double> out(static_cast<std::size_t>(m * n));
  ConstMatMap ma(a.data().data(), m, k);
  ConstMatMap mb(b.data().data(), k, n);
  MatMap mo(out.data(), m, n);
  mo.noalias() = ma * mb;
  return make_node(std::move(out), {m, n}, {a, b}, [a, b](const Var& g) {
    Var da = matmul(g, transpose(b));
    Var db = matmul(transpose(a), g);
    return std::vector<Var>{da, db};
  });
}

Var transpose(const Var& a) {
  if (a.shape().size() != 2)
    throw std::invalid_argument("autodiff: transpose needs a 2-D shape");
  const std::int64_t m = a.shape()[0], n = a.shape()[1];
  std::vector<double> out(a.data().size());
  ConstMatMap ma(a.data().data(), m, n);
  MatMap mo(out.data(), n, m);
  mo = ma.transpose();
  return make_node(std::move(out), {n, m}, {a}, [](const Var& g) {
    return std::vector<Var>{transpose(g)};
  });
}

Var gather(const Var& x, const IndexMap& idx, Shape out_shape) {
  if (static_cast<std::int64_t>(idx->size()) != numel(out_shape))
    throw std::invalid_argument("autodiff: gather index size mismatch");
  std::vector<double> out(idx->size());
  const auto& xd = x.data();
  for (std::size_t j = 0; j < idx->size(); ++j) {
    std::int64_t i = (*idx)[j];
    out[j] = i >= 0 ? xd[static_cast<std::size_t>(i)] : 0.0;
  }
  Shape in_shape = x.shape();
  return make_node(std::move(out), std::move(out_shape), {x},
                   [idx, in_shape](const Var& g) {
                     return std::vector<Var>{scatter_add(g, idx, in_shape)};
                   });
}

Var scatter_add(const Var& x, const IndexMap& idx, Shape out_shape) {
  if (static_cast<std::int64_t>(idx->size()) != x.size())
    throw std::invalid_argument("autodiff: scatter index size mismatch");
  std::vector<double> out(static_cast<std::size_t>(numel(out_shape)), 0.0);
  const auto& xd = x.data();
  for (std::size_t j = 0; j < idx->size(); ++j) {
    std::int64_t k = (*idx)[j];
    if (k >= 0) out[static_cast<std::size_t>(k)] += xd[j];
  }
  Shape in_shape = x.shape();
  return make_node(std::move(out), std::move(out_shape), {x},
                   [idx, in_shape](const Var& g) {
                     return std::vector<Var>{gather(g, idx, in_shape)};
                   });
}

Var reshape(const Var& x, Shape shape) {
  if (numel(shape) != x.size())
    throw std::invalid_argument("autodiff: reshape changes element count");
  Shape old = x.shape();
  return make_node(std::vector<double>(x.data()), std::move(shape), {x},
                   [old](const Var& g) {
                     return std::vector<Var>{reshape(g, old)};
                   });
}

Var sum_all(const Var& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  Shape in_shape = x.shape();
  return make_node({s}, {1}, {x}, [in_shape](const Var& g) {
    // Broadcast the scalar grad: gather with an all-zero index map.
    auto idx = std::make_shared<std::vector<std::int64_t>>(
        static_cast<std::size_t>(numel(in_shape)), 0);
    return std::vector<Var>{gather(g, idx, in_shape)};
  });
}

Var mean_all(const Var& x) {
  return mul_scalar(sum_all(x), 1.0 / static_cast<double>(x.size()));
}

std::vector<Var> grad(const Var& output, const std::vector<Var>& inputs,
                      bool create_graph) {
  if (!output.defined() || output.size() != 1)
    throw std::invalid_argument("autodiff: grad needs a defined scalar output");

  // Topological order over the requires_grad subgraph.
  std::vector<Node*> topo;
  std::unordered_map<Node*, int> state;  // 0 unseen, 1 in-progress, 2 done
  std::vector<Node*> stack{output.node()};
  while (!stack.empty()) {
    Node* n = stack.back();
    int& st = state[n];
    if (st == 0) {
      st = 1;
      for (const auto& p : n->parents)
        if (p.requires_grad() && state[p.node()] == 0)
          stack.push_back(p.node());
    } else {
      stack.pop_back();
      if (st == 1) {
        st = 2;
        topo.push_back(n);
      }
    }
  }

  std::unordered_map<Node*, Var> grads;
  grads[output.node()] = ones({1});

  auto run = [&] {
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
      Node* n = *it;
      auto git = grads.find(n);
      if (git == grads.end() || !n->vjp) continue;
      std::vector<Var> pg = n->vjp(git->second);
      for (std::size_t i = 0; i < n->parents.size(); ++i) {
        const Var& p = n->parents[i];
        if (!p.requires_grad() || !pg[i].defined()) continue;
        auto pit = grads.find(p.node());
        if (pit == grads.end())
          grads[p.node()] = pg[i];
        else
          pit->second = add(pit->second, pg[i]);
      }
    }
  };

  if (create_graph) {
    run();
  } else {
    NoGradGuard ng;
    run();
  }

  std::vector<Var> result;
  result.reserve(inputs.size());
  for (const auto& in : inputs) {
    auto it = grads.find(in.node());
    if (it != grads.end())
      result.push_back(it->second);
    else
      result.push_back(zeros(in.shape()));
  }
  return result;
}

}  // namespace cilab::ad
