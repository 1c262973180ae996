#include "bayesg/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace bayesg::ad {

namespace {

std::string shape_of(const Matrix& m) {
  return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
}

[[noreturn]] void shape_fail(const char* op, const Matrix& a, const Matrix& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_of(a) + " and " +
                   shape_of(b));
}

Tape& tape_of(Var a) {
  if (!a.valid()) throw std::logic_error("operation on an unbound Var");
  return *a.tape();
}

Tape& tape_of(Var a, Var b) {
  if (a.tape() != b.tape()) throw std::logic_error("Vars belong to different tapes");
  return tape_of(a);
}

template <typename F>
Var unary(const char* op, Var a, Matrix out, F local_grad) {
  Tape& t = tape_of(a);
  const int ia = a.id();
  return t.record(op, std::move(out), {a}, [ia, local_grad](Tape& tp, int self) {
    tp.accumulate(ia, local_grad(tp.value(ia), tp.value(self), tp.upstream(self)));
  });
}

}  // namespace

const Matrix& Var::value() const { return tape_->value(id_); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw ShapeError("scalar: expected 1x1, got " + shape_of(v));
  return v(0, 0);
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::constant(double value) { return constant(Matrix::Constant(1, 1, value)); }

Var Tape::leaf(Parameter& p) {
  for (auto [ptr, id] : bound_)
    if (ptr == &p) return Var(this, id);
  nodes_.push_back(Node{p.value, {}, {}, &p, true});
  const int id = static_cast<int>(nodes_.size()) - 1;
  bound_.emplace_back(&p, id);
  return Var(this, id);
}

Var Tape::record(const char* op, Matrix value, std::initializer_list<Var> inputs, BackwardFn fn) {
  return record(op, std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(fn));
}

Var Tape::record(const char* op, Matrix value, std::span<const Var> inputs, BackwardFn fn) {
#ifndef NDEBUG
  if (!value.allFinite()) throw NumericError(std::string(op) + ": non-finite output");
#else
  (void)op;
#endif
  bool needs = false;
  for (const Var& v : inputs) needs = needs || nodes_[v.id()].needs_grad;
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(fn) : BackwardFn{}, nullptr, needs});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::accumulate(int id, const Matrix& delta) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0)
    n.grad = delta;
  else
    n.grad += delta;
}

void Tape::backward(Var root) {
  if (root.tape() != this) throw std::logic_error("backward: root is not on this tape");
  const Matrix& rv = nodes_[root.id()].value;
  if (rv.size() != 1) throw ShapeError("backward: root must be scalar, got " + shape_of(rv));
  for (auto& n : nodes_) n.grad.resize(0, 0);
  if (!nodes_[root.id()].needs_grad) return;
  nodes_[root.id()].grad = Matrix::Ones(1, 1);
  for (int k = root.id(); k >= 0; --k) {
    Node& n = nodes_[k];
    if (n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, k);
    if (n.param) n.param->grad += n.grad;
  }
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::clear() {
  nodes_.clear();
  bound_.clear();
}

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  if (a.cols() != b.rows()) shape_fail("matmul", a.value(), b.value());
  const int ia = a.id(), ib = b.id();
  return t.record("matmul", a.value() * b.value(), {a, b}, [ia, ib](Tape& tp, int self) {
    const Matrix& g = tp.upstream(self);
    if (tp.needs_grad(ia)) tp.accumulate(ia, g * tp.value(ib).transpose());
    if (tp.needs_grad(ib)) tp.accumulate(ib, tp.value(ia).transpose() * g);
  });
}

namespace {

enum class Broadcast { none, row, scalar };

Broadcast broadcast_kind(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::none;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::row;
  if (b.size() == 1) return Broadcast::scalar;
  shape_fail(op, a, b);
}

Matrix expand(const Matrix& a, const Matrix& b, Broadcast k) {
  switch (k) {
    case Broadcast::row: return b.replicate(a.rows(), 1);
    case Broadcast::scalar: return Matrix::Constant(a.rows(), a.cols(), b(0, 0));
    default: return b;
  }
}

Matrix reduce(const Matrix& g, Broadcast k) {
  switch (k) {
    case Broadcast::row: return g.colwise().sum();
    case Broadcast::scalar: return Matrix::Constant(1, 1, g.sum());
    default: return g;
  }
}

Var add_impl(const char* op, Var a, Var b, double sign) {
  Tape& t = tape_of(a, b);
  const Broadcast k = broadcast_kind(op, a.value(), b.value());
  Matrix out = k == Broadcast::none ? Matrix(a.value() + sign * b.value())
                                    : Matrix(a.value() + sign * expand(a.value(), b.value(), k));
  const int ia = a.id(), ib = b.id();
  return t.record(op, std::move(out), {a, b}, [ia, ib, k, sign](Tape& tp, int self) {
    const Matrix& g = tp.upstream(self);
    tp.accumulate(ia, g);
    if (tp.needs_grad(ib)) tp.accumulate(ib, sign * reduce(g, k));
  });
}

}  // namespace

Var add(Var a, Var b) { return add_impl("add", a, b, 1.0); }
Var sub(Var a, Var b) { return add_impl("sub", a, b, -1.0); }

Var mul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Broadcast k = broadcast_kind("mul", a.value(), b.value());
  Matrix bx = expand(a.value(), b.value(), k);
  Matrix out = a.value().cwiseProduct(bx);
  const int ia = a.id(), ib = b.id();
  return t.record("mul", std::move(out), {a, b}, [ia, ib, k](Tape& tp, int self) {
    const Matrix& g = tp.upstream(self);
    if (tp.needs_grad(ia)) tp.accumulate(ia, g.cwiseProduct(expand(tp.value(ia), tp.value(ib), k)));
    if (tp.needs_grad(ib)) tp.accumulate(ib, reduce(g.cwiseProduct(tp.value(ia)), k));
  });
}

Var scale(Var a, double c) {
  return unary("scale", a, c * a.value(),
               [c](const Matrix&, const Matrix&, const Matrix& g) { return Matrix(c * g); });
}

Var add_scalar(Var a, double c) {
  return unary("add_scalar", a, (a.value().array() + c).matrix(),
               [](const Matrix&, const Matrix&, const Matrix& g) { return g; });
}

Var sigmoid(Var a) {
  Matrix out = a.value().unaryExpr([](double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  return unary("sigmoid", a, std::move(out), [](const Matrix&, const Matrix& y, const Matrix& g) {
    return Matrix(g.array() * y.array() * (1.0 - y.array()));
  });
}

Var tanh(Var a) {
  return unary("tanh", a, a.value().array().tanh().matrix(),
               [](const Matrix&, const Matrix& y, const Matrix& g) {
                 return Matrix(g.array() * (1.0 - y.array().square()));
               });
}

Var relu(Var a) {
  return unary("relu", a, a.value().cwiseMax(0.0),
               [](const Matrix& x, const Matrix&, const Matrix& g) {
                 return Matrix((x.array() > 0.0).select(g.array(), 0.0));
               });
}

Var exp(Var a) {
  return unary("exp", a, a.value().array().exp().matrix(),
               [](const Matrix&, const Matrix& y, const Matrix& g) {
                 return Matrix(g.array() * y.array());
               });
}

Var log(Var a) {
  if ((a.value().array() <= 0.0).any())
    throw std::domain_error("log: input must be strictly positive");
  return unary("log", a, a.value().array().log().matrix(),
               [](const Matrix& x, const Matrix&, const Matrix& g) {
                 return Matrix(g.array() / x.array());
               });
}

Var log_sigmoid(Var a) {
  // log sigma(x) = -softplus(-x), evaluated without overflow.
  Matrix out = a.value().unaryExpr([](double x) {
    return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
  });
  return unary("log_sigmoid", a, std::move(out), [](const Matrix& x, const Matrix&, const Matrix& g) {
    Matrix s = x.unaryExpr([](double v) {
      // 1 - sigma(v) = sigma(-v)
      if (v <= 0) return 1.0 / (1.0 + std::exp(v));
      const double e = std::exp(-v);
      return e / (1.0 + e);
    });
    return Matrix(g.array() * s.array());
  });
}

Var square(Var a) {
  return unary("square", a, a.value().array().square().matrix(),
               [](const Matrix& x, const Matrix&, const Matrix& g) {
                 return Matrix(2.0 * g.array() * x.array());
               });
}

Var rsqrt(Var a) {
  if ((a.value().array() <= 0.0).any())
    throw std::domain_error("rsqrt: input must be strictly positive");
  return unary("rsqrt", a, a.value().array().rsqrt().matrix(),
               [](const Matrix&, const Matrix& y, const Matrix& g) {
                 return Matrix(-0.5 * g.array() * y.array().cube());
               });
}

Var softmax(Var a) {
  Matrix out(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    auto z = (a.value().row(r).array() - a.value().row(r).maxCoeff()).exp();
    out.row(r) = z / z.sum();
  }
  return unary("softmax", a, std::move(out), [](const Matrix&, const Matrix& y, const Matrix& g) {
    Matrix dx(y.rows(), y.cols());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double dot = g.row(r).dot(y.row(r));
      dx.row(r) = y.row(r).array() * (g.row(r).array() - dot);
    }
    return dx;
  });
}

Var log_softmax(Var a) {
  Matrix out(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const double m = a.value().row(r).maxCoeff();
    const double lse = m + std::log((a.value().row(r).array() - m).exp().sum());
    out.row(r) = a.value().row(r).array() - lse;
  }
  return unary("log_softmax", a, std::move(out), [](const Matrix&, const Matrix& y, const Matrix& g) {
    Matrix dx(y.rows(), y.cols());
    for (Eigen::Index r = 0; r < y.rows(); ++r)
      dx.row(r) = g.row(r).array() - y.row(r).array().exp() * g.row(r).sum();
    return dx;
  });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Tape& t = tape_of(parts[0]);
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    if (p.tape() != &t) throw std::logic_error("concat: Vars belong to different tapes");
    if (p.rows() != rows) shape_fail("concat", parts[0].value(), p.value());
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<int, Eigen::Index>> spans;
  Eigen::Index c = 0;
  for (const Var& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    spans.emplace_back(p.id(), c);
    c += p.cols();
  }
  return t.record("concat", std::move(out), parts, [spans](Tape& tp, int self) {
    const Matrix& g = tp.upstream(self);
    for (auto [id, off] : spans)
      if (tp.needs_grad(id)) tp.accumulate(id, g.middleCols(off, tp.value(id).cols()));
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  Tape& t = tape_of(parts[0]);
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  for (const Var& p : parts) {
    if (p.tape() != &t) throw std::logic_error("concat_rows: Vars belong to different tapes");
    if (p.cols() != cols) shape_fail("concat_rows", parts[0].value(), p.value());
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<int, Eigen::Index>> spans;
  Eigen::Index r = 0;
  for (const Var& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    spans.emplace_back(p.id(), r);
    r += p.rows();
  }
  return t.record("concat_rows", std::move(out), parts, [spans](Tape& tp, int self) {
    const Matrix& g = tp.upstream(self);
    for (auto [id, off] : spans)
      if (tp.needs_grad(id)) tp.accumulate(id, g.middleRows(off, tp.value(id).rows()));
  });
}

Var mean_rows(Var a) {
  if (a.rows() == 0) throw ShapeError("mean_rows: empty input");
  const auto n = static_cast<double>(a.rows());
  return unary("mean_rows", a, a.value().colwise().mean(),
               [n](const Matrix& x, const Matrix&, const Matrix& g) {
                 return Matrix((g / n).replicate(x.rows(), 1));
               });
}

Var sum_cols(Var a) {
  return unary("sum_cols", a, a.value().rowwise().sum(),
               [](const Matrix& x, const Matrix&, const Matrix& g) {
                 return Matrix(g.replicate(1, x.cols()));
               });
}

Var sum(Var a) {
  return unary("sum", a, Matrix::Constant(1, 1, a.value().sum()),
               [](const Matrix& x, const Matrix&, const Matrix& g) {
                 return Matrix(Matrix::Constant(x.rows(), x.cols(), g(0, 0)));
               });
}

Var mean(Var a) {
  if (a.value().size() == 0) throw ShapeError("mean: empty input");
  const auto n = static_cast<double>(a.value().size());
  return unary("mean", a, Matrix::Constant(1, 1, a.value().mean()),
               [n](const Matrix& x, const Matrix&, const Matrix& g) {
                 return Matrix(Matrix::Constant(x.rows(), x.cols(), g(0, 0) / n));
               });
}

Var slice(Var a, Eigen::Index row, Eigen::Index nrows, Eigen::Index col, Eigen::Index ncols) {
  if (row < 0 || col < 0 || nrows < 0 || ncols < 0 || row + nrows > a.rows() ||
      col + ncols > a.cols()) {
    std::ostringstream msg;
    msg << "slice: block [" << row << "+" << nrows << ", " << col << "+" << ncols
        << "] out of range for " << shape_of(a.value());
    throw ShapeError(msg.str());
  }
  return unary("slice", a, a.value().block(row, col, nrows, ncols),
               [row, col, nrows, ncols](const Matrix& x, const Matrix&, const Matrix& g) {
                 Matrix dx = Matrix::Zero(x.rows(), x.cols());
                 dx.block(row, col, nrows, ncols) = g;
                 return dx;
               });
}

Var transpose(Var a) {
  return unary("transpose", a, a.value().transpose(),
               [](const Matrix&, const Matrix&, const Matrix& g) { return Matrix(g.transpose()); });
}

Var detach(Var a) { return tape_of(a).constant(a.value()); }

Var straight_through(Var soft, const Matrix& hard) {
  if (hard.rows() != soft.rows() || hard.cols() != soft.cols())
    shape_fail("straight_through", soft.value(), hard);
  return unary("straight_through", soft, hard,
               [](const Matrix&, const Matrix&, const Matrix& g) { return g; });
}

Var scatter_symmetric(Var values, Eigen::Index n, std::span<const std::pair<int, int>> pairs) {
  if (values.rows() != 1 || values.cols() != static_cast<Eigen::Index>(pairs.size()))
    throw ShapeError("scatter_symmetric: expected 1x" + std::to_string(pairs.size()) + " values, got " +
                     shape_of(values.value()));
  Matrix out = Matrix::Zero(n, n);
  std::vector<std::pair<int, int>> idx(pairs.begin(), pairs.end());
  for (std::size_t e = 0; e < idx.size(); ++e) {
    auto [u, v] = idx[e];
    if (u < 0 || v < 0 || u >= n || v >= n || u == v)
      throw ShapeError("scatter_symmetric: pair (" + std::to_string(u) + "," + std::to_string(v) +
                       ") invalid for size " + std::to_string(n));
    out(u, v) = out(v, u) = values.value()(0, static_cast<Eigen::Index>(e));
  }
  return unary("scatter_symmetric", values, std::move(out),
               [idx](const Matrix& x, const Matrix&, const Matrix& g) {
                 Matrix dx(1, x.cols());
                 for (std::size_t e = 0; e < idx.size(); ++e)
                   dx(0, static_cast<Eigen::Index>(e)) = g(idx[e].first, idx[e].second) +
                                                         g(idx[e].second, idx[e].first);
                 return dx;
               });
}

}  // namespace bayesg::ad
