#include "mhls/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace mhls {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;

}  // namespace

Shape::Shape(std::initializer_list<std::size_t> dims)
    : Shape(std::span<const std::size_t>(dims.begin(), dims.size())) {}

Shape::Shape(std::span<const std::size_t> dims) {
  if (dims.empty() || dims.size() > kMaxRank) {
    throw DimensionError("tensor rank must be 1.." + std::to_string(kMaxRank) +
                         ", got " + std::to_string(dims.size()));
  }
  for (std::size_t d : dims) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive");
  }
  std::copy(dims.begin(), dims.end(), dims_.begin());
  rank_ = dims.size();
}

std::size_t Shape::size() const {
  if (rank_ == 0) return 0;
  std::size_t n = 1;
  for (std::size_t i = 0; i < rank_; ++i) n *= dims_[i];
  return n;
}

bool Shape::operator==(const Shape& other) const {
  return rank_ == other.rank_ &&
         std::equal(dims_.begin(), dims_.begin() + rank_, other.dims_.begin());
}

std::string Shape::str() const {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < rank_; ++i) {
    if (i) out << 'x';
    out << dims_[i];
  }
  out << ']';
  return out.str();
}

Tensor::Tensor(Shape shape) : shape_(shape), data_(shape.size(), 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.size()) {
    throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_.str());
  }
}

Tensor Tensor::filled(Shape shape, double value) {
  Tensor t(shape);
  t.fill(value);
  return t;
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor(Shape{values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t m = rows.size();
  const std::size_t n = m ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(m * n);
  for (const auto& row : rows) {
    if (row.size() != n) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor(Shape{m, n}, std::move(data));
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

void require_same_shape(const char* op, const Shape& a, const Shape& b) {
  if (!(a == b)) {
    throw DimensionError(std::string(op) + ": shape mismatch " + a.str() +
                         " vs " + b.str());
  }
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || (b.rank() != 1 && b.rank() != 2) || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: cannot multiply " + a.shape().str() + " by " +
                         b.shape().str());
  }
  const std::size_t m = a.dim(0);
  const std::size_t k = a.dim(1);
  ConstMatrixMap am(a.raw(), m, k);
  if (b.rank() == 1) {
    Tensor out(Shape{m});
    VectorMap(out.raw(), m).noalias() = am * ConstVectorMap(b.raw(), k);
    return out;
  }
  const std::size_t n = b.dim(1);
  Tensor out(Shape{m, n});
  MatrixMap(out.raw(), m, n).noalias() = am * ConstMatrixMap(b.raw(), k, n);
  return out;
}

Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 1 || logits.size() < 2) {
    throw DimensionError("softmax: expected a vector of length >= 2, got " +
                         logits.shape().str());
  }
  Tensor out(logits.shape());
  const double peak = *std::max_element(logits.data().begin(), logits.data().end());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    total += out[i];
  }
  for (double& v : out.data()) v /= total;
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  if (x.rank() != 1 || x.size() < 2) {
    throw DimensionError("layer_norm: expected a vector of length >= 2, got " +
                         x.shape().str());
  }
  require_same_shape("layer_norm gain", x.shape(), gain.shape());
  require_same_shape("layer_norm bias", x.shape(), bias.shape());
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.data().begin(), x.data().end(), 0.0) / n;
  double var = 0.0;
  for (double v : x.data()) var += (v - mean) * (v - mean);
  var /= n;
  const double inv_std = 1.0 / std::sqrt(var + eps);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = gain[i] * (x[i] - mean) * inv_std + bias[i];
  }
  return out;
}

Tensor mode3_contract(const Tensor& w, const Tensor& z) {
  if (w.rank() != 3 || z.rank() != 1 || w.dim(2) != z.size()) {
    throw DimensionError("mode3_contract: cannot contract " + w.shape().str() +
                         " with " + z.shape().str());
  }
  const std::size_t rows = w.dim(0) * w.dim(1);
  Tensor out(Shape{w.dim(0), w.dim(1)});
  VectorMap(out.raw(), rows).noalias() =
      ConstMatrixMap(w.raw(), rows, z.size()) * ConstVectorMap(z.raw(), z.size());
  return out;
}

}  // namespace mhls
