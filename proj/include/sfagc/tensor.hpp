#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sfagc {

using Shape = std::vector<std::size_t>;

/// Raised when operand extents do not satisfy an op's shape contract.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an op produces a NaN or infinity.
class NumericError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

std::string shape_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

class Tape;

/// Dense row-major array of doubles. Values are immutable once constructed;
/// a tensor recorded on a Tape additionally carries the id of its tape node.
class Tensor {
 public:
  static constexpr std::size_t kNoNode = static_cast<std::size_t>(-1);

  Tensor();
  Tensor(Shape shape, std::vector<double> values);
  /// Rank-1 tensor.
  explicit Tensor(std::vector<double> values);
  Tensor(std::initializer_list<double> values);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  /// Rank-2 tensor from nested rows; all rows must have the same length.
  static Tensor matrix(const std::vector<std::vector<double>>& rows);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_->size(); }
  /// Leading extent for rank 2, 1 for rank 1.
  std::size_t rows() const;
  /// Trailing extent.
  std::size_t cols() const;

  std::span<const double> values() const { return {data_->data(), data_->size()}; }
  const std::shared_ptr<const std::vector<double>>& storage() const { return data_; }
  double operator[](std::size_t i) const { return (*data_)[i]; }
  double at(std::size_t r, std::size_t c) const { return (*data_)[r * cols() + c]; }
  /// Value of a single-element tensor.
  double item() const;

  bool tracked() const { return tape_ != nullptr && node_ != kNoNode; }
  Tape* tape() const { return tape_; }
  std::size_t node() const { return node_; }

  /// Same values, detached from any tape.
  Tensor detach() const;

 private:
  friend class Tape;
  Tensor(Shape shape, std::shared_ptr<const std::vector<double>> data, Tape* tape, std::size_t node);

  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
  Tape* tape_ = nullptr;
  std::size_t node_ = kNoNode;
};

/// Records primitive ops in execution order. Reverse traversal of the record
/// is a valid topological order for backpropagation since every op's inputs
/// are recorded before it.
class Tape {
 public:
  /// Receives the upstream gradient of an op output and accumulates into
  /// the gradients of its inputs through Tape::accumulate.
  using BackwardFn = std::function<void(std::span<const double> grad_out, Tape& tape)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers a leaf that gradients are collected for.
  Tensor watch(const Tensor& value);

  /// Records an op result. Used by op implementations.
  Tensor record(Shape shape, std::vector<double> values, BackwardFn backward);

  /// Gradient buffer of a node, allocated on first use.
  std::vector<double>& grad_buffer(std::size_t node);
  void accumulate(const Tensor& input, std::span<const double> grad);

  /// Backpropagates from a single-element loss.
  void backward(const Tensor& loss);

  /// Gradient for a tracked tensor; zeros if it was not reached.
  Tensor grad(const Tensor& t) const;

  std::size_t size() const { return nodes_.size(); }
  void clear();

 private:
  struct Node {
    std::size_t size = 0;
    Shape shape;
    std::vector<double> grad;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

/// Tape shared by the inputs of an op, or nullptr when none is tracked.
/// Mixing tensors from different tapes is an error.
Tape* common_tape(std::initializer_list<const Tensor*> inputs);

void check_finite(std::span<const double> values, const char* op);

}  // namespace sfagc
