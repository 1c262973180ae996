#include "bayesg/layers.hpp"

#include <cmath>

namespace bayesg::nn {

Matrix uniform_init(int rows, int cols, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max(fan_in, 1)));
  std::uniform_real_distribution<double> u(-bound, bound);
  Matrix m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = u(rng);
  return m;
}

Linear::Linear(const std::string& name, int in, int out, Rng& rng)
    : weight(name + "/weight", uniform_init(in, out, in, rng)),
      bias(name + "/bias", Matrix::Zero(1, out)) {}

Var Linear::operator()(Tape& t, Var x) {
  return ad::add(ad::matmul(x, t.leaf(weight)), t.leaf(bias));
}

void Linear::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

Var normalized_adjacency(Var a_eff) {
  Tape& t = *a_eff.tape();
  const auto n = a_eff.rows();
  if (a_eff.cols() != n) throw ad::ShapeError("normalized_adjacency: adjacency must be square");
  Var a_self = ad::add(a_eff, t.constant(Matrix::Identity(n, n)));
  Var d = ad::rsqrt(ad::sum_cols(a_self));  // n x 1
  return ad::mul(a_self, ad::matmul(d, ad::transpose(d)));
}

Var gcn_layer(Var x, Var a_eff, Var w, Var b) {
  if (x.rows() != a_eff.rows())
    throw ad::ShapeError("gcn_layer: feature rows " + std::to_string(x.rows()) +
                         " do not match adjacency size " + std::to_string(a_eff.rows()));
  return ad::relu(ad::add(ad::matmul(ad::matmul(normalized_adjacency(a_eff), x), w), b));
}

GcnChannel::GcnChannel(const std::string& name, int in, int out, int layers, Rng& rng) {
  if (layers < 1 || layers > 2) throw std::invalid_argument("gcn layers must be 1 or 2");
  for (int l = 0; l < layers; ++l)
    layers_.emplace_back(name + "/gcn" + std::to_string(l), l == 0 ? in : out, out, rng);
}

Var GcnChannel::center(Tape& t, Var x, Var a_hat) {
  Var h = x;
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l)
    h = ad::relu(layers_[l](t, ad::matmul(a_hat, h)));
  Var row = ad::slice(a_hat, 0, 1, 0, a_hat.cols());
  return ad::relu(layers_.back()(t, ad::matmul(row, h)));
}

void GcnChannel::collect(std::vector<Parameter*>& out) {
  for (auto& l : layers_) l.collect(out);
}

LstmState lstm_step(Var h_prev, Var c_prev, Var x, Var wx, Var wh, Var b) {
  const auto hidden = h_prev.cols();
  Var pre = ad::add(ad::add(ad::matmul(x, wx), ad::matmul(h_prev, wh)), b);
  Var i = ad::sigmoid(ad::slice(pre, 0, 1, 0, hidden));
  Var f = ad::sigmoid(ad::slice(pre, 0, 1, hidden, hidden));
  Var g = ad::tanh(ad::slice(pre, 0, 1, 2 * hidden, hidden));
  Var o = ad::sigmoid(ad::slice(pre, 0, 1, 3 * hidden, hidden));
  Var c = ad::add(ad::mul(f, c_prev), ad::mul(i, g));
  Var h = ad::mul(o, ad::tanh(c));
  return {h, c};
}

LstmCell::LstmCell(const std::string& name, int in, int hidden, Rng& rng)
    : wx(name + "/wx", uniform_init(in, 4 * hidden, hidden, rng)),
      wh(name + "/wh", uniform_init(hidden, 4 * hidden, hidden, rng)),
      b(name + "/b", Matrix::Zero(1, 4 * hidden)) {}

LstmState LstmCell::operator()(Tape& t, Var x, LstmState prev) {
  return lstm_step(prev.h, prev.c, x, t.leaf(wx), t.leaf(wh), t.leaf(b));
}

void LstmCell::collect(std::vector<Parameter*>& out) {
  out.push_back(&wx);
  out.push_back(&wh);
  out.push_back(&b);
}

ActorHead::ActorHead(const std::string& name, int hidden, int actions, Rng& rng)
    : linear_(name + "/logits", hidden, actions, rng) {}

CriticHead::CriticHead(const std::string& name, int hidden, int action_features, int width, Rng& rng)
    : hidden_(name + "/hidden", hidden + action_features, width, rng),
      out_(name + "/out", width, 1, rng) {}

Var CriticHead::value(Tape& t, Var h, Var neighbor_actions) {
  Var in = neighbor_actions.cols() > 0 ? ad::concat({h, neighbor_actions}) : h;
  return out_(t, ad::relu(hidden_(t, in)));
}

void CriticHead::collect(std::vector<Parameter*>& out) {
  hidden_.collect(out);
  out_.collect(out);
}

Var entropy_from_log_probs(Var log_probs) {
  return ad::scale(ad::sum_cols(ad::mul(ad::exp(log_probs), log_probs)), -1.0);
}

}  // namespace bayesg::nn
