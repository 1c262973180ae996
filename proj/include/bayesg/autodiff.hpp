#pragma once

#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

// Minimal tape-based reverse-mode differentiation over dense double matrices.
// Every tensor is two-dimensional; vectors are 1xN rows.
namespace bayesg::ad {

using Matrix = Eigen::MatrixXd;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A trainable leaf. Gradients from Tape::backward accumulate into `grad`.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  Eigen::Index size() const { return value.size(); }
};

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid while the tape lives and
// has not been cleared.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var constant(double value);
  // Binds a parameter; repeated calls on the same tape return the same node.
  Var leaf(Parameter& p);

  Var record(const char* op, Matrix value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var record(const char* op, Matrix value, std::span<const Var> inputs, BackwardFn fn);

  // Reverse sweep from a scalar root. Leaf gradients are added into the
  // bound Parameter::grad (callers zero them first).
  void backward(Var root);

  const Matrix& value(int id) const { return nodes_[id].value; }
  // Gradient of the last backward root w.r.t. node id; zeros if untouched.
  Matrix grad(Var v) const;
  const Matrix& upstream(int id) const { return nodes_[id].grad; }
  void accumulate(int id, const Matrix& delta);
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }

  std::size_t size() const { return nodes_.size(); }
  void clear();

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
  std::vector<std::pair<Parameter*, int>> bound_;
};

// Primitives. Each throws ShapeError naming itself on incompatible shapes.
Var matmul(Var a, Var b);
// Same shape, or b a 1xN row broadcast over a's rows, or b a 1x1 scalar.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var exp(Var a);
Var log(Var a);
Var log_sigmoid(Var a);
Var square(Var a);
Var rsqrt(Var a);
Var softmax(Var a);      // row-wise
Var log_softmax(Var a);  // row-wise
Var concat(std::span<const Var> parts);       // along columns
Var concat_rows(std::span<const Var> parts);  // along rows
Var mean_rows(Var a);  // 1xC
Var sum_cols(Var a);   // Rx1
Var sum(Var a);        // 1x1
Var mean(Var a);       // 1x1
Var slice(Var a, Eigen::Index row, Eigen::Index nrows, Eigen::Index col, Eigen::Index ncols);
Var transpose(Var a);
// Identity forward, blocks gradient.
Var detach(Var a);
// Forward `hard`, backward through `soft` (straight-through).
Var straight_through(Var soft, const Matrix& hard);
// Scatter a 1xM vector into an NxN symmetric matrix at the given pairs.
Var scatter_symmetric(Var values, Eigen::Index n, std::span<const std::pair<int, int>> pairs);

inline Var concat(std::initializer_list<Var> parts) {
  return concat(std::span<const Var>(parts.begin(), parts.size()));
}
inline Var concat_rows(std::initializer_list<Var> parts) {
  return concat_rows(std::span<const Var>(parts.begin(), parts.size()));
}

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator-(Var a) { return scale(a, -1.0); }
inline Var operator*(double c, Var a) { return scale(a, c); }

}  // namespace bayesg::ad
