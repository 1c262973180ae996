#pragma once

#include <random>
#include <string>
#include <vector>

#include "bayesg/autodiff.hpp"

namespace bayesg::nn {

using ad::Matrix;
using ad::Parameter;
using ad::Tape;
using ad::Var;
using Rng = std::mt19937_64;

// U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Matrix uniform_init(int rows, int cols, int fan_in, Rng& rng);

class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, int in, int out, Rng& rng);

  // x is N x in; the bias row is broadcast over N.
  Var operator()(Tape& t, Var x);

  int in() const { return static_cast<int>(weight.value.rows()); }
  int out() const { return static_cast<int>(weight.value.cols()); }
  void collect(std::vector<Parameter*>& out);

  Parameter weight;
  Parameter bias;
};

// D^{-1/2} (A + I) D^{-1/2}, D the row degree of A + I.
Var normalized_adjacency(Var a_eff);
// relu(norm(A) X W + b) over all members.
Var gcn_layer(Var x, Var a_eff, Var w, Var b);

// One masked graph-convolution channel. Returns only the center row.
class GcnChannel {
 public:
  GcnChannel() = default;
  GcnChannel(const std::string& name, int in, int out, int layers, Rng& rng);

  // a_hat: normalized adjacency (shared across channels).
  Var center(Tape& t, Var x, Var a_hat);
  void collect(std::vector<Parameter*>& out);
  int out() const { return layers_.back().out(); }

 private:
  std::vector<Linear> layers_;
};

struct LstmState {
  Var h;
  Var c;
};

// Gate layout in the 4H pre-activation: input, forget, cell, output.
LstmState lstm_step(Var h_prev, Var c_prev, Var x, Var wx, Var wh, Var b);

class LstmCell {
 public:
  LstmCell() = default;
  LstmCell(const std::string& name, int in, int hidden, Rng& rng);

  LstmState operator()(Tape& t, Var x, LstmState prev);
  int hidden() const { return static_cast<int>(wh.value.rows()); }
  void collect(std::vector<Parameter*>& out);

  Parameter wx, wh, b;
};

// Action logits from the recurrent state.
class ActorHead {
 public:
  ActorHead() = default;
  ActorHead(const std::string& name, int hidden, int actions, Rng& rng);
  Var logits(Tape& t, Var h) { return linear_(t, h); }
  void collect(std::vector<Parameter*>& out) { linear_.collect(out); }

 private:
  Linear linear_;
};

// V(h, one-hot neighbor actions); two-layer MLP.
class CriticHead {
 public:
  CriticHead() = default;
  CriticHead(const std::string& name, int hidden, int action_features, int width, Rng& rng);
  Var value(Tape& t, Var h, Var neighbor_actions);
  void collect(std::vector<Parameter*>& out);

 private:
  Linear hidden_;
  Linear out_;
};

// -sum(pi * log pi) per row, from log-probabilities.
Var entropy_from_log_probs(Var log_probs);

}  // namespace bayesg::nn
