#include "sfagc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace sfagc {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void check_finite(std::span<const double> values, const char* op) {
  // v * 0 is NaN exactly for inf/NaN; four lanes keep the loop vectorizable.
  double lane[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= values.size(); i += 4) {
    for (std::size_t j = 0; j < 4; ++j) lane[j] += values[i + j] * 0.0;
  }
  for (; i < values.size(); ++i) lane[0] += values[i] * 0.0;
  if (std::isnan(lane[0] + lane[1] + lane[2] + lane[3])) throw NumericError(std::string(op) + ": non-finite value");
}

Tensor::Tensor() : shape_{0}, data_(std::make_shared<const std::vector<double>>()) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)) {
  if (shape_.empty()) throw DimensionError("tensor rank must be at least 1");
  for (auto e : shape_) {
    if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_string(shape_));
  }
  if (shape_size(shape_) != values.size()) {
    throw DimensionError("tensor shape " + shape_string(shape_) + " does not match " +
                         std::to_string(values.size()) + " values");
  }
  check_finite(values, "tensor");
  data_ = std::make_shared<const std::vector<double>>(std::move(values));
}

Tensor::Tensor(std::vector<double> values) {
  const std::size_t n = values.size();
  *this = Tensor(Shape{n}, std::move(values));
}

Tensor::Tensor(std::initializer_list<double> values) : Tensor(std::vector<double>(values)) {}

Tensor::Tensor(Shape shape, std::shared_ptr<const std::vector<double>> data, Tape* tape, std::size_t node)
    : shape_(std::move(shape)), data_(std::move(data)), tape_(tape), node_(node) {}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  const auto n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{1}, {value}); }

Tensor Tensor::matrix(const std::vector<std::vector<double>>& rows) {
  if (rows.empty() || rows.front().empty()) throw DimensionError("matrix needs at least one element");
  const auto c = rows.front().size();
  std::vector<double> values;
  values.reserve(rows.size() * c);
  for (const auto& r : rows) {
    if (r.size() != c) throw DimensionError("ragged matrix rows");
    values.insert(values.end(), r.begin(), r.end());
  }
  return Tensor(Shape{rows.size(), c}, std::move(values));
}

std::size_t Tensor::rows() const { return shape_.size() >= 2 ? shape_[0] : 1; }

std::size_t Tensor::cols() const {
  if (shape_.size() <= 1) return shape_.empty() ? 0 : shape_[0];
  return size() / shape_[0];
}

double Tensor::item() const {
  if (size() != 1) throw DimensionError("item() needs a single-element tensor, got " + shape_string(shape_));
  return (*data_)[0];
}

Tensor Tensor::detach() const { return Tensor(shape_, data_, nullptr, kNoNode); }

Tensor Tape::watch(const Tensor& value) {
  Node node;
  node.size = value.size();
  node.shape = value.shape();
  nodes_.push_back(std::move(node));
  return Tensor(value.shape(), value.storage(), this, nodes_.size() - 1);
}

Tensor Tape::record(Shape shape, std::vector<double> values, BackwardFn backward) {
  check_finite(values, "op result");
  Node node;
  node.size = values.size();
  node.shape = shape;
  node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Tensor(std::move(shape), std::make_shared<const std::vector<double>>(std::move(values)), this,
                nodes_.size() - 1);
}

std::vector<double>& Tape::grad_buffer(std::size_t node) {
  auto& n = nodes_.at(node);
  if (n.grad.empty()) n.grad.assign(n.size, 0.0);
  return n.grad;
}

void Tape::accumulate(const Tensor& input, std::span<const double> grad) {
  if (!input.tracked() || input.tape() != this) return;
  auto& buf = grad_buffer(input.node());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += grad[i];
}

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw DimensionError("backward needs a scalar loss, got " + shape_string(loss.shape()));
  }
  if (!loss.tracked() || loss.tape() != this) throw std::invalid_argument("loss is not recorded on this tape");
  grad_buffer(loss.node())[0] += 1.0;
  for (std::size_t i = loss.node() + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (n.grad.empty() || !n.backward) continue;
    // Ops only feed earlier nodes, so n.grad is not touched by its own callback.
    n.backward(n.grad, *this);
    std::vector<double>().swap(n.grad);
  }
}

Tensor Tape::grad(const Tensor& t) const {
  if (!t.tracked() || t.tape() != this) throw std::invalid_argument("tensor is not recorded on this tape");
  const auto& n = nodes_[t.node()];
  if (n.backward) throw std::invalid_argument("gradients are kept for watched leaves only");
  if (n.grad.empty()) return Tensor::zeros(n.shape);
  return Tensor(n.shape, n.grad);
}

void Tape::clear() { nodes_.clear(); }

Tape* common_tape(std::initializer_list<const Tensor*> inputs) {
  Tape* tape = nullptr;
  for (const auto* t : inputs) {
    if (!t->tracked()) continue;
    if (tape && tape != t->tape()) throw std::invalid_argument("tensors recorded on different tapes");
    tape = t->tape();
  }
  return tape;
}

}  // namespace sfagc
