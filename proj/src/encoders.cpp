#include "bayesg/encoders.hpp"

#include <stdexcept>

namespace bayesg::nn {

Method method_from_string(const std::string& s) {
  if (s == "bayesg") return Method::bayesg;
  if (s == "ia2c") return Method::ia2c;
  if (s == "commnet") return Method::commnet;
  if (s == "neurcomm") return Method::neurcomm;
  throw std::invalid_argument("unknown method \"" + s + "\"");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::bayesg: return "bayesg";
    case Method::ia2c: return "ia2c";
    case Method::commnet: return "commnet";
    case Method::neurcomm: return "neurcomm";
  }
  return "?";
}

namespace {

void check_channels(const AgentChannels& ch) {
  const auto n = ch.states.rows();
  if (n < 1 || ch.policies.rows() != n || ch.trajectories.rows() != n)
    throw ad::ShapeError("encoder: channel row counts differ (" + std::to_string(n) + ", " +
                         std::to_string(ch.policies.rows()) + ", " +
                         std::to_string(ch.trajectories.rows()) + ")");
}

}  // namespace

GraphEncoder::GraphEncoder(const std::string& name, const EncoderDims& d, Rng& rng)
    : embed_(d.embed),
      state_(name + "/state", d.state, d.embed, d.gcn_layers, rng),
      policy_(name + "/policy", d.policy, d.embed, d.gcn_layers, rng),
      traj_(name + "/traj", d.traj, d.embed, d.gcn_layers, rng) {}

Var GraphEncoder::encode(Tape& t, const AgentChannels& ch, Var a_eff) {
  check_channels(ch);
  if (a_eff.rows() != ch.members() || a_eff.cols() != ch.members())
    throw ad::ShapeError("bayesg_encode: adjacency size does not match member count");
  Var a_hat = normalized_adjacency(a_eff);
  return ad::concat({state_.center(t, ch.states, a_hat), policy_.center(t, ch.policies, a_hat),
                     traj_.center(t, ch.trajectories, a_hat)});
}

void GraphEncoder::collect(std::vector<Parameter*>& out) {
  state_.collect(out);
  policy_.collect(out);
  traj_.collect(out);
}

Var flatten_neighbors(Tape& t, Var x, int max_rows) {
  const int present = static_cast<int>(x.rows()) - 1;
  if (present > max_rows)
    throw ad::ShapeError("flatten_neighbors: " + std::to_string(present) +
                         " neighbors exceed padding width " + std::to_string(max_rows));
  std::vector<Var> parts;
  for (int r = 1; r <= present; ++r) parts.push_back(ad::slice(x, r, 1, 0, x.cols()));
  if (present < max_rows) parts.push_back(t.constant(Matrix::Zero(1, (max_rows - present) * x.cols())));
  if (parts.empty()) return t.constant(Matrix::Zero(1, 0));
  return ad::concat(parts);
}

CommNetEncoder::CommNetEncoder(const std::string& name, const EncoderDims& d, Rng& rng)
    : max_neighbors_(d.max_neighbors),
      state_(name + "/state", d.state * (1 + d.max_neighbors), d.embed, rng),
      traj_(name + "/traj", d.traj, d.embed, rng) {}

Var CommNetEncoder::encode(Tape& t, const AgentChannels& ch) {
  check_channels(ch);
  Var own = ad::slice(ch.states, 0, 1, 0, ch.states.cols());
  Var states = max_neighbors_ > 0 ? ad::concat({own, flatten_neighbors(t, ch.states, max_neighbors_)}) : own;
  const auto n = ch.trajectories.rows();
  Var pooled = n > 1 ? ad::mean_rows(ad::slice(ch.trajectories, 1, n - 1, 0, ch.trajectories.cols()))
                     : t.constant(Matrix::Zero(1, ch.trajectories.cols()));
  return ad::add(ad::relu(state_(t, states)), ad::relu(traj_(t, pooled)));
}

void CommNetEncoder::collect(std::vector<Parameter*>& out) {
  state_.collect(out);
  traj_.collect(out);
}

NeurCommEncoder::NeurCommEncoder(const std::string& name, const EncoderDims& d, Rng& rng)
    : max_neighbors_(d.max_neighbors),
      state_(name + "/state", d.state * (1 + d.max_neighbors), d.embed, rng),
      policy_(name + "/policy", std::max(d.policy * d.max_neighbors, 1), d.embed, rng),
      traj_(name + "/traj", std::max(d.traj * d.max_neighbors, 1), d.embed, rng) {}

Var NeurCommEncoder::encode(Tape& t, const AgentChannels& ch) {
  check_channels(ch);
  Var own = ad::slice(ch.states, 0, 1, 0, ch.states.cols());
  if (max_neighbors_ == 0) {
    Var z = t.constant(Matrix::Zero(1, 1));
    return ad::concat({ad::relu(state_(t, own)), ad::relu(policy_(t, z)), ad::relu(traj_(t, z))});
  }
  Var states = ad::concat({own, flatten_neighbors(t, ch.states, max_neighbors_)});
  return ad::concat({ad::relu(state_(t, states)),
                     ad::relu(policy_(t, flatten_neighbors(t, ch.policies, max_neighbors_))),
                     ad::relu(traj_(t, flatten_neighbors(t, ch.trajectories, max_neighbors_)))});
}

void NeurCommEncoder::collect(std::vector<Parameter*>& out) {
  state_.collect(out);
  policy_.collect(out);
  traj_.collect(out);
}

Encoder::Encoder(Method m, const std::string& name, const EncoderDims& dims, Rng& rng) : method_(m) {
  switch (m) {
    case Method::bayesg:
    case Method::ia2c: impl_ = GraphEncoder(name, dims, rng); break;
    case Method::commnet: impl_ = CommNetEncoder(name, dims, rng); break;
    case Method::neurcomm: impl_ = NeurCommEncoder(name, dims, rng); break;
  }
}

Var Encoder::encode(Tape& t, const AgentChannels& ch, Var a_eff) {
  switch (method_) {
    case Method::bayesg: return std::get<GraphEncoder>(impl_).encode(t, ch, a_eff);
    case Method::ia2c: {
      AgentChannels self{ad::slice(ch.states, 0, 1, 0, ch.states.cols()),
                         ad::slice(ch.policies, 0, 1, 0, ch.policies.cols()),
                         ad::slice(ch.trajectories, 0, 1, 0, ch.trajectories.cols())};
      return std::get<GraphEncoder>(impl_).encode(t, self, t.constant(Matrix::Zero(1, 1)));
    }
    case Method::commnet: return std::get<CommNetEncoder>(impl_).encode(t, ch);
    case Method::neurcomm: return std::get<NeurCommEncoder>(impl_).encode(t, ch);
  }
  throw std::logic_error("unreachable");
}

int Encoder::output_dim() const {
  return std::visit([](const auto& e) { return e.output_dim(); }, impl_);
}

void Encoder::collect(std::vector<Parameter*>& out) {
  std::visit([&out](auto& e) { e.collect(out); }, impl_);
}

}  // namespace bayesg::nn
