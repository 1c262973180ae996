#pragma once

#include <string>
#include <variant>
#include <vector>

#include "bayesg/layers.hpp"

namespace bayesg::nn {

enum class Method { bayesg, ia2c, commnet, neurcomm };

Method method_from_string(const std::string& s);
std::string to_string(Method m);

// Per-neighborhood feature bundle. Row 0 is the center agent; remaining rows
// follow EgoGraph::members order.
struct AgentChannels {
  Var states;        // |V_i| x d_s
  Var policies;      // |V_i| x d_pi
  Var trajectories;  // |V_i| x d_h

  int members() const { return static_cast<int>(states.rows()); }
};

struct EncoderDims {
  int state = 0;
  int policy = 0;
  int traj = 0;
  int embed = 32;
  int max_neighbors = 0;
  int gcn_layers = 1;
};

// s~ = GCN_obs(S, A*) || GCN_policy(Pi, A*) || GCN_traj(H, A*), center rows.
class GraphEncoder {
 public:
  GraphEncoder() = default;
  GraphEncoder(const std::string& name, const EncoderDims& dims, Rng& rng);

  Var encode(Tape& t, const AgentChannels& ch, Var a_eff);
  int output_dim() const { return 3 * embed_; }
  void collect(std::vector<Parameter*>& out);

 private:
  int embed_ = 0;
  GcnChannel state_, policy_, traj_;
};

// s~ = MLP_state([s_i, s_N]) + MLP_traj(mean(h_N)).
class CommNetEncoder {
 public:
  CommNetEncoder() = default;
  CommNetEncoder(const std::string& name, const EncoderDims& dims, Rng& rng);

  Var encode(Tape& t, const AgentChannels& ch);
  int output_dim() const { return state_.out(); }
  void collect(std::vector<Parameter*>& out);

 private:
  int max_neighbors_ = 0;
  Linear state_, traj_;
};

// s~ = MLP_state([s_i, s_N]) || MLP_policy(pi_N) || MLP_traj(h_N), absent
// neighbors zero-padded.
class NeurCommEncoder {
 public:
  NeurCommEncoder() = default;
  NeurCommEncoder(const std::string& name, const EncoderDims& dims, Rng& rng);

  Var encode(Tape& t, const AgentChannels& ch);
  int output_dim() const { return 3 * state_.out(); }
  void collect(std::vector<Parameter*>& out);

 private:
  int max_neighbors_ = 0;
  Linear state_, policy_, traj_;
};

// Flattens rows [1, n) of x into a single row, zero-padded to max_rows rows.
Var flatten_neighbors(Tape& t, Var x, int max_rows);

// Method-dispatching encoder. IA2C uses the graph encoder restricted to the
// center row, i.e. no message content.
class Encoder {
 public:
  Encoder() = default;
  Encoder(Method m, const std::string& name, const EncoderDims& dims, Rng& rng);

  // a_eff is only read by the graph encoder (bayesg).
  Var encode(Tape& t, const AgentChannels& ch, Var a_eff);
  int output_dim() const;
  void collect(std::vector<Parameter*>& out);
  Method method() const { return method_; }

 private:
  Method method_ = Method::bayesg;
  std::variant<GraphEncoder, CommNetEncoder, NeurCommEncoder> impl_;
};

}  // namespace bayesg::nn
