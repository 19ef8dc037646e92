#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "mhls/tensor.hpp"

namespace mhls {

/// Raised by Tape::backward when a gradient turns NaN or infinite.
class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Op : std::uint8_t {
  leaf,
  matmul,
  sigmoid,
  tanh,
  relu,
  exp,
  add,
  sub,
  mul,
  affine,
  softmax,
  layer_norm,
  mode3_contract,
  row_scale,
  concat,
  sum,
  dot,
  cross_entropy,
  sum_squares,
};

const char* op_name(Op op);

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives and
/// has not been cleared.
class Var {
 public:
  Var() = default;

  Tape& tape() const { return *tape_; }
  std::uint32_t index() const { return index_; }
  bool valid() const { return tape_ != nullptr; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t index) : tape_(tape), index_(index) {}

  Tape* tape_ = nullptr;
  std::uint32_t index_ = 0;
};

/// Records forward operations so one backward sweep yields gradients for every
/// leaf. A tape belongs to a single thread.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives a gradient (data, targets).
  Var constant(Tensor value);
  /// Leaf owning its value and receiving a gradient.
  Var input(Tensor value);
  /// Leaf referring to external storage, typically a model parameter. The
  /// referenced tensor must outlive the tape's use of this node.
  Var param(const Tensor& value);

  const Tensor& value(Var v) const;
  /// Gradient accumulated by the last backward(); zeros if v was not reached.
  Tensor grad(Var v) const;
  /// Like grad() but returns nullptr instead of materializing zeros.
  const Tensor* grad_if_any(Var v) const;

  /// Back-propagates from a single-element output, seeding it with 1.
  void backward(Var output);

  /// Calls f(referenced tensor, gradient) for every param() leaf reached by
  /// the last backward().
  template <class F>
  void for_each_param_grad(F&& f) const {
    for (const Node& n : nodes_) {
      if (n.external && !n.grad.empty()) f(*n.external, n.grad);
    }
  }

  std::size_t size() const { return nodes_.size(); }
  void clear();

  // Used by the operation functions below.
  Var record(Op op, std::initializer_list<Var> inputs, Tensor value,
             Tensor cache = {}, double attr = 0.0);
  bool requires_grad(Var v) const { return nodes_[v.index()].requires_grad; }

 private:
  struct Node {
    Op op = Op::leaf;
    std::uint8_t arity = 0;
    bool requires_grad = false;
    std::uint32_t inputs[3] = {0, 0, 0};
    Tensor value;
    const Tensor* external = nullptr;
    Tensor grad;
    Tensor cache;
    double attr = 0.0;
  };

  const Tensor& node_value(const Node& n) const {
    return n.external ? *n.external : n.value;
  }
  Tensor& grad_slot(std::uint32_t index);
  void backprop_node(std::uint32_t index);
  Var push_leaf(Tensor value, const Tensor* external, bool requires_grad);

  std::vector<Node> nodes_;
};

// Differentiable operations. Binary operations require both operands on the
// same tape.

Var matmul(Var a, Var b);
Var sigmoid(Var x);
Var tanh(Var x);
Var relu(Var x);
Var exp(Var x);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// scale * x + shift, elementwise, with constant scale and shift.
Var affine(Var x, double scale, double shift);
Var softmax(Var logits);
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
Var mode3_contract(Var w, Var z);
/// Row j of `m` multiplied by scales[j].
Var row_scale(Var m, Var scales);
/// Concatenation of two vectors.
Var concat(Var a, Var b);
Var sum(Var x);
Var dot(Var a, Var b);
/// -sum_k target_k * log(max(probs_k, clamp)).
Var cross_entropy(const Tensor& target, Var probs, double clamp = 1e-12);
Var sum_squares(Var x);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

}  // namespace mhls
