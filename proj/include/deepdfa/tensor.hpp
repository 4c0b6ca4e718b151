#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace deepdfa {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  /// Throws ShapeError if data.size() != rows * cols.
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  std::string shape_string() const;
  bool all_finite() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Records primitive ops for one reverse sweep. Single-threaded; create one
/// tape per forward pass.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable input (a parameter).
  Var variable(Matrix value);
  /// Input excluded from differentiation.
  Var constant(Matrix value);

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  /// Gradient of the last `backward` loss with respect to `v`.
  const Matrix& grad(Var v) const { return nodes_[v.id].grad; }

  /// Seeds d loss/d loss = 1 and visits ops in exact reverse recording order.
  /// Gradients accumulate additively. Throws ShapeError unless loss is 1x1.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

  // Used by the op implementations.
  Var record(Matrix value, std::vector<std::size_t> inputs, std::function<void(Tape&, std::size_t)> backprop,
             const char* op);
  Matrix& grad_mut(std::size_t id) { return nodes_[id].grad; }
  const Matrix& value_of(std::size_t id) const { return nodes_[id].value; }
  const std::vector<std::size_t>& inputs_of(std::size_t id) const { return nodes_[id].inputs; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::vector<std::size_t> inputs;
    std::function<void(Tape&, std::size_t)> backprop;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

// Forward primitives. Each checks shapes (ShapeError naming both shapes) and
// output finiteness (NumericError naming the op).

Var matmul(Var a, Var b);
/// Elementwise sum. `b` may also be a 1 x cols row vector broadcast over rows.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var a, double s);
/// 1 - a, elementwise.
Var one_minus(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
/// Column sums: rows x cols -> 1 x cols.
Var row_sum(Var a);
/// Sum of every element -> 1 x 1.
Var sum(Var a);
/// Sum of squares of every element -> 1 x 1.
Var sum_squares(Var a);
/// out(i, j) = a(i, j) * g(i, 0) for an n x 1 column `g`.
Var scale_rows(Var a, Var g);
/// out(v) = sum of a(u) over edges (u, v). Rows of nodes without incoming
/// edges are zero.
Var edge_sum(Var a, std::span<const std::pair<std::size_t, std::size_t>> edges);
/// out(s) = sum of a(i) over rows with segment[i] == s; `count` output rows.
Var segment_sum(Var a, std::span<const std::size_t> segment, std::size_t count);
/// Mean binary cross-entropy of sigmoid(logits) against 0/1 labels, computed
/// from logits for stability. Both n x 1.
Var bce_with_logits(Var logits, Var labels);

struct GradientResult {
  std::vector<Matrix> grads;
  /// Indices into `params` whose value does not influence the loss; their
  /// gradients are zero.
  std::vector<std::size_t> unreached;
};

/// Runs backward from `loss` and collects d loss / d param.
GradientResult gradients(Var loss, std::span<const Var> params);

}  // namespace deepdfa
