#include "mhls/autograd.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

namespace mhls {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;

ConstVectorMap as_vector(const Tensor& t) { return {t.raw(), static_cast<Eigen::Index>(t.size())}; }
VectorMap as_vector(Tensor& t) { return {t.raw(), static_cast<Eigen::Index>(t.size())}; }

Tape& same_tape(const char* op, Var a, Var b) {
  if (&a.tape() != &b.tape()) {
    throw std::invalid_argument(std::string(op) + ": operands live on different tapes");
  }
  return a.tape();
}

Tensor scalar(double v) { return Tensor(Shape{1}, {v}); }

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::leaf: return "leaf";
    case Op::matmul: return "matmul";
    case Op::sigmoid: return "sigmoid";
    case Op::tanh: return "tanh";
    case Op::relu: return "relu";
    case Op::exp: return "exp";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
    case Op::affine: return "affine";
    case Op::softmax: return "softmax";
    case Op::layer_norm: return "layer_norm";
    case Op::mode3_contract: return "mode3_contract";
    case Op::row_scale: return "row_scale";
    case Op::concat: return "concat";
    case Op::sum: return "sum";
    case Op::dot: return "dot";
    case Op::cross_entropy: return "cross_entropy";
    case Op::sum_squares: return "sum_squares";
  }
  return "unknown";
}

const Tensor& Var::value() const { return tape_->value(*this); }

Var Tape::push_leaf(Tensor value, const Tensor* external, bool requires_grad) {
  Node node;
  node.value = std::move(value);
  node.external = external;
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::constant(Tensor value) { return push_leaf(std::move(value), nullptr, false); }
Var Tape::input(Tensor value) { return push_leaf(std::move(value), nullptr, true); }
Var Tape::param(const Tensor& value) { return push_leaf({}, &value, true); }

const Tensor& Tape::value(Var v) const { return node_value(nodes_.at(v.index())); }

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.index());
  if (n.grad.empty()) return Tensor(node_value(n).shape());
  return n.grad;
}

const Tensor* Tape::grad_if_any(Var v) const {
  const Node& n = nodes_.at(v.index());
  return n.grad.empty() ? nullptr : &n.grad;
}

void Tape::clear() { nodes_.clear(); }

Var Tape::record(Op op, std::initializer_list<Var> inputs, Tensor value, Tensor cache,
                 double attr) {
  Node node;
  node.op = op;
  node.arity = static_cast<std::uint8_t>(inputs.size());
  std::size_t i = 0;
  for (Var in : inputs) {
    node.inputs[i++] = in.index();
    node.requires_grad = node.requires_grad || nodes_[in.index()].requires_grad;
  }
  node.value = std::move(value);
  node.cache = std::move(cache);
  node.attr = attr;
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Tensor& Tape::grad_slot(std::uint32_t index) {
  Node& n = nodes_[index];
  if (n.grad.empty()) n.grad = Tensor(node_value(n).shape());
  return n.grad;
}

void Tape::backward(Var output) {
  if (&output.tape() != this) throw std::invalid_argument("backward: foreign variable");
  if (value(output).size() != 1) {
    throw DimensionError("backward: output must have one element, got " +
                         value(output).shape().str());
  }
  for (Node& n : nodes_) n.grad = Tensor();
  grad_slot(output.index())[0] = 1.0;
  for (std::uint32_t i = output.index() + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    if (n.grad.empty() || n.op == Op::leaf || !n.requires_grad) continue;
    if (!n.grad.all_finite()) {
      throw NonFiniteGradient(std::string("non-finite gradient at ") + op_name(n.op) +
                              " node " + std::to_string(i));
    }
    backprop_node(i);
  }
  for (const Node& n : nodes_) {
    if (n.op == Op::leaf && !n.grad.empty() && !n.grad.all_finite()) {
      throw NonFiniteGradient("non-finite gradient reaching a leaf");
    }
  }
}

void Tape::backprop_node(std::uint32_t index) {
  // nodes_ is not resized during backprop, so these references stay valid.
  const Node& n = nodes_[index];
  const Tensor& g = n.grad;
  const Tensor& y = n.value;
  auto wants = [&](int k) { return nodes_[n.inputs[k]].requires_grad; };
  auto in_value = [&](int k) -> const Tensor& { return node_value(nodes_[n.inputs[k]]); };
  auto in_grad = [&](int k) -> Tensor& { return grad_slot(n.inputs[k]); };

  switch (n.op) {
    case Op::leaf:
      break;
    case Op::matmul: {
      const Tensor& a = in_value(0);
      const Tensor& b = in_value(1);
      const Eigen::Index m = a.dim(0), k = a.dim(1);
      ConstMatrixMap am(a.raw(), m, k);
      if (b.rank() == 1) {
        ConstVectorMap gv(g.raw(), m);
        if (wants(0)) MatrixMap(in_grad(0).raw(), m, k).noalias() += gv * as_vector(b).transpose();
        if (wants(1)) as_vector(in_grad(1)).noalias() += am.transpose() * gv;
      } else {
        const Eigen::Index cols = b.dim(1);
        ConstMatrixMap gm(g.raw(), m, cols);
        ConstMatrixMap bm(b.raw(), k, cols);
        if (wants(0)) MatrixMap(in_grad(0).raw(), m, k).noalias() += gm * bm.transpose();
        if (wants(1)) MatrixMap(in_grad(1).raw(), k, cols).noalias() += am.transpose() * gm;
      }
      break;
    }
    case Op::sigmoid: {
      Tensor& ga = in_grad(0);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
      break;
    }
    case Op::tanh: {
      Tensor& ga = in_grad(0);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
      break;
    }
    case Op::relu: {
      const Tensor& x = in_value(0);
      Tensor& ga = in_grad(0);
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (x[i] > 0.0) ga[i] += g[i];
      }
      break;
    }
    case Op::exp: {
      Tensor& ga = in_grad(0);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
      break;
    }
    case Op::add:
    case Op::sub: {
      const double sign = n.op == Op::sub ? -1.0 : 1.0;
      if (wants(0)) as_vector(in_grad(0)) += as_vector(g);
      if (wants(1)) as_vector(in_grad(1)) += sign * as_vector(g);
      break;
    }
    case Op::mul: {
      if (wants(0)) as_vector(in_grad(0)).array() += as_vector(g).array() * as_vector(in_value(1)).array();
      if (wants(1)) as_vector(in_grad(1)).array() += as_vector(g).array() * as_vector(in_value(0)).array();
      break;
    }
    case Op::affine:
      as_vector(in_grad(0)) += n.attr * as_vector(g);
      break;
    case Op::softmax: {
      double gy = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) gy += g[i] * y[i];
      Tensor& ga = in_grad(0);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += y[i] * (g[i] - gy);
      break;
    }
    case Op::layer_norm: {
      const Tensor& normalized = n.cache;
      const double inv_std = n.attr;
      const Tensor& gain = in_value(1);
      const std::size_t size = g.size();
      if (wants(1)) {
        Tensor& gg = in_grad(1);
        for (std::size_t i = 0; i < size; ++i) gg[i] += g[i] * normalized[i];
      }
      if (wants(2)) as_vector(in_grad(2)) += as_vector(g);
      if (wants(0)) {
        double mean_gh = 0.0, mean_ghx = 0.0;
        for (std::size_t i = 0; i < size; ++i) {
          const double gh = g[i] * gain[i];
          mean_gh += gh;
          mean_ghx += gh * normalized[i];
        }
        mean_gh /= static_cast<double>(size);
        mean_ghx /= static_cast<double>(size);
        Tensor& gx = in_grad(0);
        for (std::size_t i = 0; i < size; ++i) {
          gx[i] += inv_std * (g[i] * gain[i] - mean_gh - normalized[i] * mean_ghx);
        }
      }
      break;
    }
    case Op::mode3_contract: {
      const Tensor& w = in_value(0);
      const Tensor& z = in_value(1);
      const Eigen::Index rows = w.dim(0) * w.dim(1);
      const Eigen::Index nz = z.size();
      ConstVectorMap gv(g.raw(), rows);
      if (wants(0)) MatrixMap(in_grad(0).raw(), rows, nz).noalias() += gv * as_vector(z).transpose();
      if (wants(1)) as_vector(in_grad(1)).noalias() += ConstMatrixMap(w.raw(), rows, nz).transpose() * gv;
      break;
    }
    case Op::row_scale: {
      const Tensor& m = in_value(0);
      const Tensor& s = in_value(1);
      const Eigen::Index rows = m.dim(0), cols = m.dim(1);
      ConstMatrixMap gm(g.raw(), rows, cols);
      if (wants(0)) MatrixMap(in_grad(0).raw(), rows, cols) += as_vector(s).asDiagonal() * gm;
      if (wants(1)) {
        as_vector(in_grad(1)) +=
            (ConstMatrixMap(m.raw(), rows, cols).array() * gm.array()).rowwise().sum().matrix();
      }
      break;
    }
    case Op::concat: {
      const std::size_t first = in_value(0).size();
      if (wants(0)) {
        Tensor& ga = in_grad(0);
        for (std::size_t i = 0; i < first; ++i) ga[i] += g[i];
      }
      if (wants(1)) {
        Tensor& gb = in_grad(1);
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[first + i];
      }
      break;
    }
    case Op::sum:
      as_vector(in_grad(0)).array() += g[0];
      break;
    case Op::dot:
      if (wants(0)) as_vector(in_grad(0)) += g[0] * as_vector(in_value(1));
      if (wants(1)) as_vector(in_grad(1)) += g[0] * as_vector(in_value(0));
      break;
    case Op::cross_entropy: {
      const Tensor& target = n.cache;
      const Tensor& p = in_value(0);
      Tensor& gp = in_grad(0);
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > n.attr) gp[i] -= g[0] * target[i] / p[i];
      }
      break;
    }
    case Op::sum_squares:
      as_vector(in_grad(0)) += 2.0 * g[0] * as_vector(in_value(0));
      break;
  }
}

// ---------------------------------------------------------------------------
// Operations

Var matmul(Var a, Var b) {
  Tape& t = same_tape("matmul", a, b);
  return t.record(Op::matmul, {a, b}, matmul(a.value(), b.value()));
}

namespace {

template <class Fn>
Var unary(Op op, Var x, Fn fn) {
  const Tensor& in = x.value();
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fn(in[i]);
  return x.tape().record(op, {x}, std::move(out));
}

}  // namespace

Var sigmoid(Var x) { return unary(Op::sigmoid, x, [](double v) { return sigmoid(v); }); }
Var tanh(Var x) { return unary(Op::tanh, x, [](double v) { return std::tanh(v); }); }
Var relu(Var x) { return unary(Op::relu, x, [](double v) { return v > 0.0 ? v : 0.0; }); }
Var exp(Var x) { return unary(Op::exp, x, [](double v) { return std::exp(v); }); }

Var affine(Var x, double scale, double shift) {
  const Tensor& in = x.value();
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = scale * in[i] + shift;
  return x.tape().record(Op::affine, {x}, std::move(out), {}, scale);
}

namespace {

template <class Fn>
Var binary(Op op, Var a, Var b, Fn fn) {
  Tape& t = same_tape(op_name(op), a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_shape(op_name(op), av.shape(), bv.shape());
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fn(av[i], bv[i]);
  return t.record(op, {a, b}, std::move(out));
}

}  // namespace

Var add(Var a, Var b) { return binary(Op::add, a, b, [](double x, double y) { return x + y; }); }
Var sub(Var a, Var b) { return binary(Op::sub, a, b, [](double x, double y) { return x - y; }); }
Var mul(Var a, Var b) { return binary(Op::mul, a, b, [](double x, double y) { return x * y; }); }

Var softmax(Var logits) {
  return logits.tape().record(Op::softmax, {logits}, softmax(logits.value()));
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  Tape& t = same_tape("layer_norm", x, gain);
  same_tape("layer_norm", x, bias);
  const Tensor& xv = x.value();
  Tensor out = layer_norm(xv, gain.value(), bias.value(), eps);
  // Cache the normalized input and 1/sigma for the backward pass.
  const double n = static_cast<double>(xv.size());
  double mean = 0.0;
  for (double v : xv.data()) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : xv.data()) var += (v - mean) * (v - mean);
  var /= n;
  const double inv_std = 1.0 / std::sqrt(var + eps);
  Tensor normalized(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) normalized[i] = (xv[i] - mean) * inv_std;
  return t.record(Op::layer_norm, {x, gain, bias}, std::move(out), std::move(normalized),
                  inv_std);
}

Var mode3_contract(Var w, Var z) {
  Tape& t = same_tape("mode3_contract", w, z);
  return t.record(Op::mode3_contract, {w, z}, mode3_contract(w.value(), z.value()));
}

Var row_scale(Var m, Var scales) {
  Tape& t = same_tape("row_scale", m, scales);
  const Tensor& mv = m.value();
  const Tensor& sv = scales.value();
  if (mv.rank() != 2 || sv.rank() != 1 || sv.size() != mv.dim(0)) {
    throw DimensionError("row_scale: cannot scale rows of " + mv.shape().str() + " by " +
                         sv.shape().str());
  }
  Tensor out(mv.shape());
  const std::size_t cols = mv.dim(1);
  for (std::size_t r = 0; r < mv.dim(0); ++r) {
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) = sv[r] * mv.at(r, c);
  }
  return t.record(Op::row_scale, {m, scales}, std::move(out));
}

Var concat(Var a, Var b) {
  Tape& t = same_tape("concat", a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 1 || bv.rank() != 1) {
    throw DimensionError("concat: expected vectors, got " + av.shape().str() + " and " +
                         bv.shape().str());
  }
  std::vector<double> data(av.data().begin(), av.data().end());
  data.insert(data.end(), bv.data().begin(), bv.data().end());
  const std::size_t n = data.size();
  return t.record(Op::concat, {a, b}, Tensor(Shape{n}, std::move(data)));
}

Var sum(Var x) {
  double total = 0.0;
  for (double v : x.value().data()) total += v;
  return x.tape().record(Op::sum, {x}, scalar(total));
}

Var dot(Var a, Var b) {
  Tape& t = same_tape("dot", a, b);
  require_same_shape("dot", a.shape(), b.shape());
  const double v = as_vector(a.value()).dot(as_vector(b.value()));
  return t.record(Op::dot, {a, b}, scalar(v));
}

Var cross_entropy(const Tensor& target, Var probs, double clamp) {
  const Tensor& p = probs.value();
  require_same_shape("cross_entropy", target.shape(), p.shape());
  double loss = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (target[i] != 0.0) loss -= target[i] * std::log(std::max(p[i], clamp));
  }
  return probs.tape().record(Op::cross_entropy, {probs}, scalar(loss), target, clamp);
}

Var sum_squares(Var x) {
  return x.tape().record(Op::sum_squares, {x}, scalar(as_vector(x.value()).squaredNorm()));
}

}  // namespace mhls
