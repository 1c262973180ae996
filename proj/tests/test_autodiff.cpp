#include <random>

#include "doctest.h"
#include "bayesg/autodiff.hpp"
#include "fd_ops.hpp"

using namespace bayesg;
using namespace fdops;
namespace a = bayesg::ad;

namespace {

constexpr int kDraws = 100;
constexpr double kTol = 1e-4;

Matrix u(int r, int c, double lo, double hi, Rng& rng) { return oracle::uniform(r, c, lo, hi, rng); }

void expect_gradients(const char* name, const Inputs& in, const Build& build, std::uint64_t seed = 1) {
  const OpResult r = check_op(in, build, kDraws, seed);
  INFO(name << " worst " << r.worst << " at " << r.where);
  CHECK(r.checked > 0);
  CHECK(r.worst < kTol);
}

}  // namespace

TEST_CASE("elementwise primitives match central differences") {
  auto one = [](double lo, double hi) {
    return [lo, hi](Rng& g) { return std::vector<Matrix>{u(dim(g), dim(g), lo, hi, g)}; };
  };
  expect_gradients("sigmoid", one(-4, 4), [](Tape&, auto& x) { return a::sigmoid(x[0]); });
  expect_gradients("tanh", one(-3, 3), [](Tape&, auto& x) { return a::tanh(x[0]); });
  expect_gradients("exp", one(-2, 2), [](Tape&, auto& x) { return a::exp(x[0]); });
  expect_gradients("log", one(0.3, 3), [](Tape&, auto& x) { return a::log(x[0]); });
  expect_gradients("log_sigmoid", one(-6, 6), [](Tape&, auto& x) { return a::log_sigmoid(x[0]); });
  expect_gradients("square", one(-2, 2), [](Tape&, auto& x) { return a::square(x[0]); });
  expect_gradients("rsqrt", one(0.5, 3), [](Tape&, auto& x) { return a::rsqrt(x[0]); });
  expect_gradients("scale", one(-2, 2), [](Tape&, auto& x) { return a::scale(x[0], -1.7); });
  expect_gradients("add_scalar", one(-2, 2), [](Tape&, auto& x) { return a::add_scalar(x[0], 0.3); });
  expect_gradients(
      "relu", [](Rng& g) { return std::vector<Matrix>{off_kink(dim(g), dim(g), g)}; },
      [](Tape&, auto& x) { return a::relu(x[0]); });
  expect_gradients("transpose", one(-1, 1), [](Tape&, auto& x) { return a::transpose(x[0]); });
}

TEST_CASE("binary primitives with broadcasting") {
  for (const char* op : {"add", "sub", "mul"}) {
    for (int mode = 0; mode < 3; ++mode) {
      const std::string name = std::string(op) + " mode " + std::to_string(mode);
      expect_gradients(
          name.c_str(),
          [mode](Rng& g) {
            const int r = dim(g), c = dim(g);
            const int br = mode == 0 ? r : 1, bc = mode == 2 ? 1 : c;
            return std::vector<Matrix>{u(r, c, -2, 2, g), u(br, bc, -2, 2, g)};
          },
          [op = std::string(op)](Tape&, auto& x) {
            if (op == "add") return a::add(x[0], x[1]);
            if (op == "sub") return a::sub(x[0], x[1]);
            return a::mul(x[0], x[1]);
          });
    }
  }
  expect_gradients(
      "matmul",
      [](Rng& g) {
        const int r = dim(g), k = dim(g), c = dim(g);
        return std::vector<Matrix>{u(r, k, -1, 1, g), u(k, c, -1, 1, g)};
      },
      [](Tape&, auto& x) { return a::matmul(x[0], x[1]); });
}

TEST_CASE("row-wise and reduction primitives") {
  auto one = [](Rng& g) { return std::vector<Matrix>{u(dim(g), dim(g, 2, 6), -3, 3, g)}; };
  expect_gradients("softmax", one, [](Tape&, auto& x) { return a::softmax(x[0]); });
  expect_gradients("log_softmax", one, [](Tape&, auto& x) { return a::log_softmax(x[0]); });
  expect_gradients("mean_rows", one, [](Tape&, auto& x) { return a::mean_rows(x[0]); });
  expect_gradients("sum_cols", one, [](Tape&, auto& x) { return a::sum_cols(x[0]); });
  expect_gradients("sum", one, [](Tape&, auto& x) { return a::sum(x[0]); });
  expect_gradients("mean", one, [](Tape&, auto& x) { return a::mean(x[0]); });
  expect_gradients("slice", one, [](Tape&, auto& x) {
    const auto r = x[0].rows(), c = x[0].cols();
    return a::slice(x[0], r / 2, r - r / 2, c / 3, c - c / 3);
  });
}

TEST_CASE("concatenation and scatter") {
  expect_gradients(
      "concat",
      [](Rng& g) {
        const int r = dim(g);
        return std::vector<Matrix>{u(r, dim(g), -1, 1, g), u(r, dim(g), -1, 1, g), u(r, dim(g), -1, 1, g)};
      },
      [](Tape&, auto& x) { return a::concat({x[0], x[1], x[2]}); });
  expect_gradients(
      "concat_rows",
      [](Rng& g) {
        const int c = dim(g);
        return std::vector<Matrix>{u(dim(g), c, -1, 1, g), u(dim(g), c, -1, 1, g)};
      },
      [](Tape&, auto& x) { return a::concat_rows({x[0], x[1]}); });

  std::vector<std::pair<int, int>> pairs = {{0, 1}, {0, 2}, {1, 2}, {2, 3}};
  expect_gradients(
      "scatter_symmetric", [&](Rng& g) { return std::vector<Matrix>{u(1, 4, -1, 1, g)}; },
      [&](Tape&, auto& x) { return a::scatter_symmetric(x[0], 4, pairs); });
}

TEST_CASE("scatter_symmetric places each value on both sides") {
  Tape t;
  const std::vector<std::pair<int, int>> pairs = {{0, 2}, {1, 2}};
  Matrix v(1, 2);
  v << 0.25, 0.75;
  const Matrix m = a::scatter_symmetric(t.constant(v), 3, pairs).value();
  Matrix expect = Matrix::Zero(3, 3);
  expect(0, 2) = expect(2, 0) = 0.25;
  expect(1, 2) = expect(2, 1) = 0.75;
  CHECK(m == expect);
}

TEST_CASE("straight-through takes its gradient from the soft path") {
  Rng rng(4);
  for (int d = 0; d < 100; ++d) {
    Parameter p("x", u(1, dim(rng), -2, 2, rng));
    const Matrix hard = (p.value.array() > 0).cast<double>();
    Tape t1, t2;
    Var st = a::straight_through(a::sigmoid(t1.leaf(p)), hard);
    REQUIRE(st.value() == hard);
    t1.backward(a::sum(st));
    const Matrix g1 = p.grad;
    p.zero_grad();
    t2.backward(a::sum(a::sigmoid(t2.leaf(p))));
    REQUIRE((g1 - p.grad).cwiseAbs().maxCoeff() == 0.0);
    p.zero_grad();
  }
}

TEST_CASE("detach stops gradient flow") {
  Parameter p("x", Matrix::Constant(2, 2, 0.5));
  Tape t;
  Var x = t.leaf(p);
  t.backward(a::sum(a::mul(a::detach(x), a::detach(x))));
  CHECK(p.grad.isZero());
}

TEST_CASE("shape errors name the operation") {
  Tape t;
  Var x = t.constant(Matrix::Zero(2, 3));
  Var y = t.constant(Matrix::Zero(4, 5));
  CHECK_THROWS_WITH_AS(a::matmul(x, y), doctest::Contains("matmul"), a::ShapeError);
  CHECK_THROWS_WITH_AS(a::add(x, y), doctest::Contains("add"), a::ShapeError);
  CHECK_THROWS_WITH_AS(a::mul(x, y), doctest::Contains("mul"), a::ShapeError);
  CHECK_THROWS_AS(a::concat({x, y}), a::ShapeError);
  CHECK_THROWS_AS(a::slice(x, 1, 3, 0, 1), a::ShapeError);
}

TEST_CASE("gradients accumulate across backward calls and leaves are shared") {
  Parameter p("x", Matrix::Constant(1, 1, 3.0));
  Tape t;
  Var x1 = t.leaf(p);
  Var x2 = t.leaf(p);
  CHECK(x1.id() == x2.id());
  t.backward(a::mul(x1, x2));
  CHECK(p.grad(0, 0) == doctest::Approx(6.0));
  Tape t2;
  t2.backward(a::scale(t2.leaf(p), 2.0));
  CHECK(p.grad(0, 0) == doctest::Approx(8.0));
}

TEST_CASE("log_sigmoid and softmax stay finite at extreme inputs") {
  Tape t;
  Matrix x(1, 4);
  x << -800, -50, 50, 800;
  const Matrix ls = a::log_sigmoid(t.constant(x)).value();
  CHECK(ls.allFinite());
  CHECK(ls(0, 3) == 0.0);
  CHECK(ls(0, 0) == doctest::Approx(-800));
  const Matrix lp = a::log_softmax(t.constant(x)).value();
  CHECK(lp.allFinite());
  CHECK(std::exp(lp(0, 3)) == doctest::Approx(1.0));
}
