// Reverse-mode automatic differentiation over dense double tensors.
//
// The graph is built eagerly: every op computes its value immediately and,
// when grad mode is on, records its parents together with a vector-Jacobian
// closure. The closures are written in terms of the public ops themselves,
// so calling grad() with create_graph=true yields gradients that are again
// differentiable. That is what the gradient-penalty term of the critic loss
// relies on.
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace cilab::ad {

using Shape = std::vector<std::int64_t>;
using IndexMap = std::shared_ptr<const std::vector<std::int64_t>>;

std::int64_t numel(const Shape& s);

struct Node;

// Value-semantics handle to a graph node.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  bool defined() const { return node_ != nullptr; }
  const std::vector<double>& data() const;
  std::vector<double>& mutable_data();  // in-place parameter updates
  const Shape& shape() const;
  std::int64_t size() const;
  bool requires_grad() const;
  double item() const;  // requires numel == 1

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

struct Node {
  std::vector<double> data;
  Shape shape;
  bool requires_grad = false;
  std::vector<Var> parents;
  std::function<std::vector<Var>(const Var&)> vjp;  // empty for leaves
};

// While alive, newly created ops record no graph (outputs are constants).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

bool grad_enabled();

// Leaves.
Var constant(std::vector<double> data, Shape shape);
Var constant_scalar(double v);
Var leaf(std::vector<double> data, Shape shape);  // requires_grad = true
Var zeros(const Shape& shape);
Var ones(const Shape& shape);

// Elementwise.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var neg(const Var& a);
Var add_scalar(const Var& a, double c);
Var mul_scalar(const Var& a, double c);
Var exp(const Var& a);
Var log(const Var& a);
Var tanh(const Var& a);
Var pow_scalar(const Var& a, double p);
Var leaky_relu(const Var& a, double negative_slope);

// Linear algebra on 2-D shapes (row-major).
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);

// Structural. gather: out[j] = idx[j] >= 0 ? x[idx[j]] : 0.
// scatter_add is its adjoint: out[k] = sum over j with idx[j] == k of x[j].
Var gather(const Var& x, const IndexMap& idx, Shape out_shape);
Var scatter_add(const Var& x, const IndexMap& idx, Shape out_shape);
Var reshape(const Var& x, Shape shape);

// Reductions.
Var sum_all(const Var& x);   // shape {1}
Var mean_all(const Var& x);  // shape {1}

// Reverse pass from a scalar output. Returns one grad per input, in order;
// inputs unreachable from `output` get a zero grad of matching shape.
// With create_graph the returned grads are themselves differentiable.
std::vector<Var> grad(const Var& output, const std::vector<Var>& inputs,
                      bool create_graph = false);

}  // namespace cilab::ad
