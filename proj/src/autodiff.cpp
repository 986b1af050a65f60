#include "barnn/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "barnn/errors.hpp"

namespace barnn::ad {

const Tensor& Var::value() const {
  if (!tape_) throw std::logic_error("use of an unbound Var");
  return tape_->value(id_);
}

Var Tape::leaf(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, nullptr, true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, nullptr, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<Var> parents, Backward backward) {
  Node node{std::move(value), {}, std::move(backward), false};
  node.parents.reserve(parents.size());
  for (const Var& p : parents) {
    if (p.tape() != this) throw std::invalid_argument("operand recorded on a different tape");
    node.parents.push_back(p.id());
    node.requires_grad = node.requires_grad || nodes_[p.id()].requires_grad;
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::accumulate(std::size_t id, const Tensor& contribution) {
  if (!nodes_[id].requires_grad) return;
  if (!has_grad_[id]) {
    grads_[id] = contribution;
    has_grad_[id] = true;
    return;
  }
  auto dst = grads_[id].data();
  auto src = contribution.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void Tape::accumulate_batch_sum(std::size_t id, const Tensor& contribution) {
  if (!nodes_[id].requires_grad) return;
  const Shape& target = nodes_[id].value.shape();
  Tensor reduced(target);
  const std::size_t inner = reduced.size();
  auto src = contribution.data();
  auto dst = reduced.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i % inner] += src[i];
  accumulate(id, reduced);
}

std::vector<Tensor> Tape::grad(Var output, std::span<const Var> wrt) {
  if (output.tape() != this) throw std::invalid_argument("grad: output belongs to a different tape");
  if (value(output.id()).size() != 1) {
    throw ShapeError("grad: output must be scalar, got shape " + to_string(value(output.id()).shape()));
  }
  for (const Var& w : wrt) {
    if (w.tape() != this) throw std::invalid_argument("grad: input node belongs to a different tape");
  }

  grads_.assign(nodes_.size(), Tensor());
  has_grad_.assign(nodes_.size(), false);
  grads_[output.id()] = Tensor(value(output.id()).shape(), 1.0);
  has_grad_[output.id()] = true;

  for (std::size_t id = output.id() + 1; id-- > 0;) {
    if (!has_grad_[id] || !nodes_[id].backward || !nodes_[id].requires_grad) continue;
    nodes_[id].backward(*this, id, grads_[id]);
  }

  std::vector<Tensor> out;
  out.reserve(wrt.size());
  for (const Var& w : wrt) {
    out.push_back(has_grad_[w.id()] ? grads_[w.id()] : Tensor(value(w.id()).shape()));
  }
  grads_.clear();
  has_grad_.clear();
  return out;
}

namespace {

Tape& tape_of(Var a, Var b) {
  if (!a.valid() || !b.valid()) throw std::logic_error("use of an unbound Var");
  if (a.tape() != b.tape()) throw std::invalid_argument("operands recorded on different tapes");
  return *a.tape();
}

enum class Broadcast { None, Left, Right };

// Left: `a` lacks the leading dimension of `b`; Right: the reverse.
Broadcast conform(const Shape& a, const Shape& b, const char* op) {
  if (a == b) return Broadcast::None;
  if (b.size() + 1 == a.size() && std::equal(b.begin(), b.end(), a.begin() + 1)) return Broadcast::Right;
  if (a.size() + 1 == b.size() && std::equal(a.begin(), a.end(), b.begin() + 1)) return Broadcast::Left;
  throw ShapeError(std::string(op) + ": shapes " + to_string(a) + " and " + to_string(b) + " do not conform");
}

template <class F, class DA, class DB>
Var binary(Var a, Var b, const char* name, F f, DA da, DB db) {
  Tape& tape = tape_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Broadcast mode = conform(av.shape(), bv.shape(), name);
  const Shape out_shape = mode == Broadcast::Left ? bv.shape() : av.shape();
  const std::size_t a_n = av.size();
  const std::size_t b_n = bv.size();

  Tensor out(out_shape);
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = f(av[i % a_n], bv[i % b_n]);

  const std::size_t a_id = a.id();
  const std::size_t b_id = b.id();
  return tape.record(std::move(out), {a, b},
                     [a_id, b_id, mode, a_n, b_n, da, db](Tape& t, std::size_t self, const Tensor& g) {
                       const Tensor& x = t.value(a_id);
                       const Tensor& y = t.value(b_id);
                       const Tensor& z = t.value(self);
                       if (t.requires_grad(a_id)) {
                         Tensor ga(z.shape());
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * da(x[i % a_n], y[i % b_n], z[i]);
                         if (mode == Broadcast::Left) t.accumulate_batch_sum(a_id, ga);
                         else t.accumulate(a_id, ga);
                       }
                       if (t.requires_grad(b_id)) {
                         Tensor gb(z.shape());
                         for (std::size_t i = 0; i < g.size(); ++i) gb[i] = g[i] * db(x[i % a_n], y[i % b_n], z[i]);
                         if (mode == Broadcast::Right) t.accumulate_batch_sum(b_id, gb);
                         else t.accumulate(b_id, gb);
                       }
                     });
}

template <class F, class D>
Var unary(Var x, F f, D d) {
  if (!x.valid()) throw std::logic_error("use of an unbound Var");
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  const std::size_t x_id = x.id();
  return x.tape()->record(std::move(out), {x}, [x_id, d](Tape& t, std::size_t self, const Tensor& g) {
    const Tensor& xv = t.value(x_id);
    const Tensor& y = t.value(self);
    Tensor gx(xv.shape());
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] = g[i] * d(xv[i], y[i]);
    t.accumulate(x_id, gx);
  });
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected a rank-2 tensor, got " + to_string(t.shape()));
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatView = Eigen::Map<RowMat>;
using ConstMatView = Eigen::Map<const RowMat>;

ConstMatView view(const Tensor& t, std::size_t rows, std::size_t cols) {
  return ConstMatView(t.data().data(), Eigen::Index(rows), Eigen::Index(cols));
}

MatView view(Tensor& t, std::size_t rows, std::size_t cols) {
  return MatView(t.data().data(), Eigen::Index(rows), Eigen::Index(cols));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner dimensions differ for " + to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  Tensor out(Shape{m, n});
  if (m == 0 || n == 0 || k == 0) return out;
  view(out, m, n).noalias() = view(a, m, k) * view(b, k, n);
  return out;
}

Var matmul(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  Tensor out = matmul(a.value(), b.value());
  const std::size_t a_id = a.id();
  const std::size_t b_id = b.id();
  return tape.record(std::move(out), {a, b}, [a_id, b_id](Tape& t, std::size_t, const Tensor& g) {
    const Tensor& av = t.value(a_id);
    const Tensor& bv = t.value(b_id);
    const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
    if (m == 0 || n == 0 || k == 0) return;
    if (t.requires_grad(a_id)) {
      // dA = G B^T
      Tensor ga(av.shape());
      view(ga, m, k).noalias() = view(g, m, n) * view(bv, k, n).transpose();
      t.accumulate(a_id, ga);
    }
    if (t.requires_grad(b_id)) {
      // dB = A^T G
      Tensor gb(bv.shape());
      view(gb, k, n).noalias() = view(av, m, k).transpose() * view(g, m, n);
      t.accumulate(b_id, gb);
    }
  });
}

Var add(Var a, Var b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(
      a, b, "subtract", [](double x, double y) { return x - y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(
      a, b, "multiply", [](double x, double y) { return x * y; }, [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

Var div(Var a, Var b) {
  for (double v : b.value().data()) {
    if (v == 0.0) throw DomainError("divide: zero divisor");
  }
  return binary(
      a, b, "divide", [](double x, double y) { return x / y; }, [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double z) { return -z / y; });
}

Var scale(Var x, double c) {
  return unary(x, [c](double v) { return c * v; }, [c](double, double) { return c; });
}

Var add_scalar(Var x, double c) {
  return unary(x, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Var square(Var x) {
  return unary(x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Var sqrt(Var x) {
  for (double v : x.value().data()) {
    if (v < 0.0) throw DomainError("sqrt: negative input " + std::to_string(v));
  }
  return unary(
      x, [](double v) { return std::sqrt(v); }, [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Var exp(Var x) {
  return unary(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var log(Var x) {
  for (double v : x.value().data()) {
    if (!(v > 0.0)) throw DomainError("log: non-positive input " + std::to_string(v));
  }
  return unary(x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Var relu(Var x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var tanh(Var x) {
  return unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var x) {
  return unary(x, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var log_softmax(Var x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 1 && xv.rank() != 2) {
    throw ShapeError("log_softmax: expected rank 1 or 2, got " + to_string(xv.shape()));
  }
  const std::size_t cols = xv.shape().back();
  const std::size_t rows = xv.size() / cols;
  Tensor out(xv.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data().data() + r * cols;
    const double mx = *std::max_element(row, row + cols);
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += std::exp(row[c] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = row[c] - lse;
  }
  const std::size_t x_id = x.id();
  return x.tape()->record(std::move(out), {x}, [x_id, rows, cols](Tape& t, std::size_t self, const Tensor& g) {
    const Tensor& y = t.value(self);
    Tensor gx(y.shape());
    for (std::size_t r = 0; r < rows; ++r) {
      double gs = 0.0;
      for (std::size_t c = 0; c < cols; ++c) gs += g[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] = g[r * cols + c] - std::exp(y[r * cols + c]) * gs;
    }
    t.accumulate(x_id, gx);
  });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  const std::size_t x_id = x.id();
  return x.tape()->record(Tensor::scalar(s), {x}, [x_id](Tape& t, std::size_t, const Tensor& g) {
    t.accumulate(x_id, Tensor(t.value(x_id).shape(), g[0]));
  });
}

Var mean(Var x) {
  const double n = static_cast<double>(x.value().size());
  return scale(sum(x), 1.0 / n);
}

Var sum_batch(Var x) {
  const Tensor& xv = x.value();
  if (xv.rank() == 0) throw ShapeError("sum_batch: scalar has no batch dimension");
  Shape inner_shape(xv.shape().begin() + 1, xv.shape().end());
  Tensor out(inner_shape);
  const std::size_t inner = out.size();
  for (std::size_t i = 0; i < xv.size(); ++i) out[i % inner] += xv[i];
  const std::size_t x_id = x.id();
  return x.tape()->record(std::move(out), {x}, [x_id, inner](Tape& t, std::size_t, const Tensor& g) {
    Tensor gx(t.value(x_id).shape());
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = g[i % inner];
    t.accumulate(x_id, gx);
  });
}

Var scale_rows(Var x, Var a) {
  Tape& tape = tape_of(x, a);
  const Tensor& xv = x.value();
  const Tensor& av = a.value();
  require_rank2(xv, "scale_rows");
  if (av.rank() != 1 || av.dim(0) != xv.dim(0)) {
    throw ShapeError("scale_rows: row scale " + to_string(av.shape()) + " does not match " + to_string(xv.shape()));
  }
  const std::size_t rows = xv.dim(0), cols = xv.dim(1);
  Tensor out(xv.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = xv[r * cols + c] * av[r];
  }
  const std::size_t x_id = x.id();
  const std::size_t a_id = a.id();
  return tape.record(std::move(out), {x, a}, [x_id, a_id, rows, cols](Tape& t, std::size_t, const Tensor& g) {
    const Tensor& xv = t.value(x_id);
    const Tensor& av = t.value(a_id);
    if (t.requires_grad(x_id)) {
      Tensor gx(xv.shape());
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] = g[r * cols + c] * av[r];
      }
      t.accumulate(x_id, gx);
    }
    if (t.requires_grad(a_id)) {
      Tensor ga(av.shape());
      for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += g[r * cols + c] * xv[r * cols + c];
        ga[r] = acc;
      }
      t.accumulate(a_id, ga);
    }
  });
}

Var slice_cols(Var x, std::size_t start, std::size_t count) {
  const Tensor& xv = x.value();
  require_rank2(xv, "slice_cols");
  const std::size_t rows = xv.dim(0), cols = xv.dim(1);
  if (start + count > cols) {
    throw ShapeError("slice_cols: columns [" + std::to_string(start) + ", " + std::to_string(start + count) +
                     ") out of range for " + to_string(xv.shape()));
  }
  Tensor out(Shape{rows, count});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(xv.data().data() + r * cols + start, count, out.data().data() + r * count);
  }
  const std::size_t x_id = x.id();
  return x.tape()->record(std::move(out), {x}, [x_id, rows, cols, start, count](Tape& t, std::size_t, const Tensor& g) {
    Tensor gx(Shape{rows, cols});
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(g.data().data() + r * count, count, gx.data().data() + r * cols + start);
    }
    t.accumulate(x_id, gx);
  });
}

Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  const std::size_t x_id = x.id();
  return x.tape()->record(std::move(out), {x}, [x_id](Tape& t, std::size_t, const Tensor& g) {
    t.accumulate(x_id, g.reshaped(t.value(x_id).shape()));
  });
}

Var pick(Var x, std::span<const std::size_t> index) {
  const Tensor& xv = x.value();
  require_rank2(xv, "pick");
  const std::size_t rows = xv.dim(0), cols = xv.dim(1);
  if (index.size() != rows) {
    throw ShapeError("pick: " + std::to_string(index.size()) + " indices for " + to_string(xv.shape()));
  }
  Tensor out(Shape{rows});
  for (std::size_t r = 0; r < rows; ++r) {
    if (index[r] >= cols) throw ShapeError("pick: column index " + std::to_string(index[r]) + " out of range");
    out[r] = xv[r * cols + index[r]];
  }
  const std::size_t x_id = x.id();
  std::vector<std::size_t> idx(index.begin(), index.end());
  return x.tape()->record(std::move(out), {x}, [x_id, cols, idx = std::move(idx)](Tape& t, std::size_t, const Tensor& g) {
    Tensor gx(t.value(x_id).shape());
    for (std::size_t r = 0; r < idx.size(); ++r) gx[r * cols + idx[r]] = g[r];
    t.accumulate(x_id, gx);
  });
}

}  // namespace barnn::ad
