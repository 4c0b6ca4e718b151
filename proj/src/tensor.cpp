#include "deepdfa/tensor.hpp"

#include <cmath>
#include <vector>

#include "deepdfa/error.hpp"

namespace deepdfa {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("matrix " + std::to_string(rows) + "x" + std::to_string(cols) + " given " +
                     std::to_string(data_.size()) + " values");
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::string Matrix::shape_string() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

bool Matrix::all_finite() const {
  for (double x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

const Matrix& Var::value() const { return tape->value(*this); }

Var Tape::variable(Matrix value) {
  Var v = record(std::move(value), {}, nullptr, "variable");
  nodes_[v.id].requires_grad = true;
  return v;
}

Var Tape::constant(Matrix value) { return record(std::move(value), {}, nullptr, "constant"); }

Var Tape::record(Matrix value, std::vector<std::size_t> inputs, std::function<void(Tape&, std::size_t)> backprop,
                 const char* op) {
  if (!value.all_finite()) throw NumericError(std::string("non-finite output from ") + op);
  bool needs = false;
  for (std::size_t i : inputs) needs = needs || nodes_[i].requires_grad;
  nodes_.push_back(Node{std::move(value), Matrix(), std::move(inputs), std::move(backprop), needs});
  return Var{this, nodes_.size() - 1};
}

void Tape::backward(Var loss) {
  const Matrix& l = value(loss);
  if (l.rows() != 1 || l.cols() != 1) throw ShapeError("backward needs a 1x1 loss, got " + l.shape_string());
  for (auto& n : nodes_) n.grad = Matrix(n.value.rows(), n.value.cols());
  nodes_[loss.id].grad(0, 0) = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backprop && n.requires_grad) n.backprop(*this, i);
  }
}

namespace {

[[noreturn]] void shape_mismatch(const char* op, const Matrix& a, const Matrix& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " + b.shape_string());
}

void require_same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw Error("operands recorded on different tapes");
}

template <typename F, typename DF>
Var unary_map(Var a, const char* op, F f, DF df) {
  const Matrix& x = a.value();
  Matrix y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) y.data()[i] = f(x.data()[i]);
  return a.tape->record(std::move(y), {a.id},
                        [ai = a.id, df](Tape& t, std::size_t self) {
                          const Matrix& xv = t.value_of(ai);
                          const Matrix& yv = t.value_of(self);
                          const Matrix& gy = t.grad_mut(self);
                          Matrix& gx = t.grad_mut(ai);
                          for (std::size_t i = 0; i < xv.size(); ++i) {
                            gx.data()[i] += gy.data()[i] * df(xv.data()[i], yv.data()[i]);
                          }
                        },
                        op);
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  const Matrix& x = a.value();
  const Matrix& w = b.value();
  if (x.cols() != w.rows()) shape_mismatch("matmul", x, w);
  const std::size_t n = x.rows(), k = x.cols(), m = w.cols();
  Matrix y(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double xv = x(i, p);
      if (xv == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) y(i, j) += xv * w(p, j);
    }
  }
  return a.tape->record(std::move(y), {a.id, b.id},
                        [ai = a.id, bi = b.id](Tape& t, std::size_t self) {
                          const Matrix& xv = t.value_of(ai);
                          const Matrix& wv = t.value_of(bi);
                          const Matrix& gy = t.grad_mut(self);
                          const std::size_t n = xv.rows(), k = xv.cols(), m = wv.cols();
                          if (t.requires_grad(ai)) {
                            Matrix& gx = t.grad_mut(ai);
                            for (std::size_t i = 0; i < n; ++i)
                              for (std::size_t p = 0; p < k; ++p) {
                                double acc = 0.0;
                                for (std::size_t j = 0; j < m; ++j) acc += gy(i, j) * wv(p, j);
                                gx(i, p) += acc;
                              }
                          }
                          if (t.requires_grad(bi)) {
                            Matrix& gw = t.grad_mut(bi);
                            for (std::size_t i = 0; i < n; ++i)
                              for (std::size_t p = 0; p < k; ++p) {
                                const double xv_ip = xv(i, p);
                                if (xv_ip == 0.0) continue;
                                for (std::size_t j = 0; j < m; ++j) gw(p, j) += xv_ip * gy(i, j);
                              }
                          }
                        },
                        "matmul");
}

Var add(Var a, Var b) {
  require_same_tape(a, b);
  const Matrix& x = a.value();
  const Matrix& y = b.value();
  const bool same = x.rows() == y.rows() && x.cols() == y.cols();
  const bool bias = y.rows() == 1 && y.cols() == x.cols();
  if (!same && !bias) shape_mismatch("add", x, y);
  Matrix z = x;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) z(i, j) += y(same ? i : 0, j);
  return a.tape->record(std::move(z), {a.id, b.id},
                        [ai = a.id, bi = b.id, same](Tape& t, std::size_t self) {
                          const Matrix& gz = t.grad_mut(self);
                          Matrix& ga = t.grad_mut(ai);
                          for (std::size_t i = 0; i < gz.size(); ++i) ga.data()[i] += gz.data()[i];
                          Matrix& gb = t.grad_mut(bi);
                          for (std::size_t i = 0; i < gz.rows(); ++i)
                            for (std::size_t j = 0; j < gz.cols(); ++j) gb(same ? i : 0, j) += gz(i, j);
                        },
                        "add");
}

Var sub(Var a, Var b) {
  require_same_tape(a, b);
  const Matrix& x = a.value();
  const Matrix& y = b.value();
  if (x.rows() != y.rows() || x.cols() != y.cols()) shape_mismatch("sub", x, y);
  Matrix z = x;
  for (std::size_t i = 0; i < z.size(); ++i) z.data()[i] -= y.data()[i];
  return a.tape->record(std::move(z), {a.id, b.id},
                        [ai = a.id, bi = b.id](Tape& t, std::size_t self) {
                          const Matrix& gz = t.grad_mut(self);
                          Matrix& ga = t.grad_mut(ai);
                          for (std::size_t i = 0; i < gz.size(); ++i) ga.data()[i] += gz.data()[i];
                          Matrix& gb = t.grad_mut(bi);
                          for (std::size_t i = 0; i < gz.size(); ++i) gb.data()[i] -= gz.data()[i];
                        },
                        "sub");
}

Var hadamard(Var a, Var b) {
  require_same_tape(a, b);
  const Matrix& x = a.value();
  const Matrix& y = b.value();
  if (x.rows() != y.rows() || x.cols() != y.cols()) shape_mismatch("hadamard", x, y);
  Matrix z(x.rows(), x.cols());
  for (std::size_t i = 0; i < z.size(); ++i) z.data()[i] = x.data()[i] * y.data()[i];
  return a.tape->record(std::move(z), {a.id, b.id},
                        [ai = a.id, bi = b.id](Tape& t, std::size_t self) {
                          const Matrix& gz = t.grad_mut(self);
                          const Matrix& xv = t.value_of(ai);
                          const Matrix& yv = t.value_of(bi);
                          Matrix& ga = t.grad_mut(ai);
                          for (std::size_t i = 0; i < gz.size(); ++i) ga.data()[i] += gz.data()[i] * yv.data()[i];
                          Matrix& gb = t.grad_mut(bi);
                          for (std::size_t i = 0; i < gz.size(); ++i) gb.data()[i] += gz.data()[i] * xv.data()[i];
                        },
                        "hadamard");
}

Var scale(Var a, double s) {
  return unary_map(a, "scale", [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var one_minus(Var a) {
  return unary_map(a, "one_minus", [](double x) { return 1.0 - x; }, [](double, double) { return -1.0; });
}

Var sigmoid(Var a) {
  return unary_map(a, "sigmoid", stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary_map(a, "tanh", [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var a) {
  return unary_map(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
                   [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var row_sum(Var a) {
  const Matrix& x = a.value();
  Matrix y(1, x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) y(0, j) += x(i, j);
  return a.tape->record(std::move(y), {a.id},
                        [ai = a.id](Tape& t, std::size_t self) {
                          const Matrix& gy = t.grad_mut(self);
                          Matrix& gx = t.grad_mut(ai);
                          for (std::size_t i = 0; i < gx.rows(); ++i)
                            for (std::size_t j = 0; j < gx.cols(); ++j) gx(i, j) += gy(0, j);
                        },
                        "row_sum");
}

Var sum(Var a) {
  const Matrix& x = a.value();
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return a.tape->record(Matrix(1, 1, acc), {a.id},
                        [ai = a.id](Tape& t, std::size_t self) {
                          const double g = t.grad_mut(self)(0, 0);
                          for (double& v : t.grad_mut(ai).data()) v += g;
                        },
                        "sum");
}

Var sum_squares(Var a) {
  const Matrix& x = a.value();
  double acc = 0.0;
  for (double v : x.data()) acc += v * v;
  return a.tape->record(Matrix(1, 1, acc), {a.id},
                        [ai = a.id](Tape& t, std::size_t self) {
                          const double g = t.grad_mut(self)(0, 0);
                          const Matrix& xv = t.value_of(ai);
                          Matrix& gx = t.grad_mut(ai);
                          for (std::size_t i = 0; i < xv.size(); ++i) gx.data()[i] += 2.0 * xv.data()[i] * g;
                        },
                        "sum_squares");
}

Var scale_rows(Var a, Var g) {
  require_same_tape(a, g);
  const Matrix& x = a.value();
  const Matrix& s = g.value();
  if (s.cols() != 1 || s.rows() != x.rows()) shape_mismatch("scale_rows", x, s);
  Matrix y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) y(i, j) = x(i, j) * s(i, 0);
  return a.tape->record(std::move(y), {a.id, g.id},
                        [ai = a.id, gi = g.id](Tape& t, std::size_t self) {
                          const Matrix& gy = t.grad_mut(self);
                          const Matrix& xv = t.value_of(ai);
                          const Matrix& sv = t.value_of(gi);
                          Matrix& gx = t.grad_mut(ai);
                          Matrix& gs = t.grad_mut(gi);
                          for (std::size_t i = 0; i < xv.rows(); ++i) {
                            double acc = 0.0;
                            for (std::size_t j = 0; j < xv.cols(); ++j) {
                              gx(i, j) += gy(i, j) * sv(i, 0);
                              acc += gy(i, j) * xv(i, j);
                            }
                            gs(i, 0) += acc;
                          }
                        },
                        "scale_rows");
}

Var edge_sum(Var a, std::span<const std::pair<std::size_t, std::size_t>> edges) {
  const Matrix& x = a.value();
  std::vector<std::pair<std::size_t, std::size_t>> copy(edges.begin(), edges.end());
  Matrix y(x.rows(), x.cols());
  for (const auto& [u, v] : copy) {
    if (u >= x.rows() || v >= x.rows()) {
      throw ShapeError("edge_sum: edge (" + std::to_string(u) + ", " + std::to_string(v) + ") outside " +
                       std::to_string(x.rows()) + " rows");
    }
    for (std::size_t j = 0; j < x.cols(); ++j) y(v, j) += x(u, j);
  }
  return a.tape->record(std::move(y), {a.id},
                        [ai = a.id, copy = std::move(copy)](Tape& t, std::size_t self) {
                          const Matrix& gy = t.grad_mut(self);
                          Matrix& gx = t.grad_mut(ai);
                          for (const auto& [u, v] : copy)
                            for (std::size_t j = 0; j < gx.cols(); ++j) gx(u, j) += gy(v, j);
                        },
                        "edge_sum");
}

Var segment_sum(Var a, std::span<const std::size_t> segment, std::size_t count) {
  const Matrix& x = a.value();
  if (segment.size() != x.rows()) {
    throw ShapeError("segment_sum: " + std::to_string(segment.size()) + " segment ids for " + x.shape_string());
  }
  std::vector<std::size_t> seg(segment.begin(), segment.end());
  Matrix y(count, x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    if (seg[i] >= count) throw ShapeError("segment_sum: segment id " + std::to_string(seg[i]) + " >= " + std::to_string(count));
    for (std::size_t j = 0; j < x.cols(); ++j) y(seg[i], j) += x(i, j);
  }
  return a.tape->record(std::move(y), {a.id},
                        [ai = a.id, seg = std::move(seg)](Tape& t, std::size_t self) {
                          const Matrix& gy = t.grad_mut(self);
                          Matrix& gx = t.grad_mut(ai);
                          for (std::size_t i = 0; i < gx.rows(); ++i)
                            for (std::size_t j = 0; j < gx.cols(); ++j) gx(i, j) += gy(seg[i], j);
                        },
                        "segment_sum");
}

Var bce_with_logits(Var logits, Var labels) {
  require_same_tape(logits, labels);
  const Matrix& z = logits.value();
  const Matrix& y = labels.value();
  if (z.cols() != 1 || y.cols() != 1 || z.rows() != y.rows() || z.rows() == 0) shape_mismatch("bce_with_logits", z, y);
  // log(1 + e^z) - y z, written to avoid overflow for large |z|.
  double acc = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const double zi = z(i, 0);
    acc += std::max(zi, 0.0) - zi * y(i, 0) + std::log1p(std::exp(-std::abs(zi)));
  }
  const double n = static_cast<double>(z.rows());
  return logits.tape->record(Matrix(1, 1, acc / n), {logits.id, labels.id},
                             [zi = logits.id, yi = labels.id, n](Tape& t, std::size_t self) {
                               const double g = t.grad_mut(self)(0, 0);
                               const Matrix& zv = t.value_of(zi);
                               const Matrix& yv = t.value_of(yi);
                               Matrix& gz = t.grad_mut(zi);
                               for (std::size_t i = 0; i < zv.rows(); ++i)
                                 gz(i, 0) += g * (stable_sigmoid(zv(i, 0)) - yv(i, 0)) / n;
                             },
                             "bce_with_logits");
}

GradientResult gradients(Var loss, std::span<const Var> params) {
  Tape& tape = *loss.tape;
  tape.backward(loss);

  // Ancestors of the loss, to tell "zero because unused" from "zero".
  std::vector<bool> reached(loss.id + 1, false);
  reached[loss.id] = true;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    if (!reached[i]) continue;
    for (std::size_t in : tape.inputs_of(i)) reached[in] = true;
  }

  GradientResult out;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const Var v = params[p];
    if (v.tape != &tape || v.id > loss.id || !reached[v.id]) {
      out.unreached.push_back(p);
      out.grads.emplace_back(v.value().rows(), v.value().cols());
    } else {
      out.grads.push_back(tape.grad(v));
    }
  }
  return out;
}

}  // namespace deepdfa
