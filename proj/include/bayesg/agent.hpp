#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "bayesg/encoders.hpp"
#include "bayesg/graph.hpp"
#include "bayesg/latent_mask.hpp"
#include "bayesg/layers.hpp"
#include "bayesg/optimizer.hpp"
#include "bayesg/train_config.hpp"

namespace bayesg::train {

using ad::Matrix;
using ad::Var;
using Row = Eigen::RowVectorXd;
using Rng = std::mt19937_64;

struct AgentShape {
  int observation = 0;    // d_s
  int max_actions = 0;    // d_pi, fingerprints are padded to this width
  int actions = 0;        // |U^i|
  int max_neighbors = 0;  // padding width for neighbor slots
};

// Everything one decision step reads, as recorded at rollout time. Neighbor
// rows are constants in the agent's own computation.
struct StepInput {
  Matrix states;         // |V_i| x d_s
  Matrix policies;       // |V_i| x d_pi, row 0 is the agent's own pi_{t-1}
  Matrix neighbor_traj;  // (|V_i| - 1) x d_h, neighbors' h_{t-1}
  Row mask_noise;        // logistic noise, learned masks
  Row fixed_mask;        // mask values for none / random modes
  double tau = 1.0;
};

struct PolicyOutput {
  nn::LstmState state;
  Var log_probs;  // 1 x |U^i|
  Var logits;     // 1 x edges, learned masks only
  Var mask;       // 1 x edges, graph encoder only
};

struct AgentStreams {
  Rng mask;
  Rng action;
};

// Independent per-agent random streams; `purpose` separates training,
// evaluation and execution.
AgentStreams make_streams(std::uint64_t seed, int agent, std::uint32_t purpose);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

int sample_action(const Row& probs, Rng& rng);

class Agent {
 public:
  Agent(int id, graph::EgoGraph ego, const AgentShape& shape, const TrainConfig& cfg);
  // The optimizer holds pointers into the members.
  Agent(const Agent&) = delete;
  Agent& operator=(const Agent&) = delete;

  // sample -> mask -> encode -> LSTM -> action distribution. With `hard`, the
  // mask is thresholded (execution); otherwise relaxed (training).
  PolicyOutput policy(ad::Tape& t, const StepInput& in, nn::LstmState prev, bool hard);
  // Critic on the (detached) recurrent state and one-hot neighbor actions.
  Var value(ad::Tape& t, Var h, const Row& neighbor_actions);

  // Draws this step's mask randomness into `in`.
  void draw_mask_inputs(StepInput& in, Rng& rng) const;
  // Edge logits (learned masks) at the given inputs; empty otherwise.
  Row edge_logits(const StepInput& in, const Row& own_h);

  int id() const { return id_; }
  const graph::EgoGraph& ego() const { return ego_; }
  const graph::HopDistanceTable& hops() const { return hops_; }
  const AgentShape& shape() const { return shape_; }
  int hidden() const { return lstm_.hidden(); }
  bool learns_mask() const;
  bool uses_graph_encoder() const;

  std::vector<ad::Parameter*> actor_parameters();
  std::vector<ad::Parameter*> critic_parameters();
  std::vector<ad::Parameter*> graph_parameters();
  std::vector<ad::Parameter*> parameters();
  ad::Optimizer& optimizer() { return optimizer_; }

 private:
  int id_;
  graph::EgoGraph ego_;
  graph::HopDistanceTable hops_;
  AgentShape shape_;
  TrainConfig cfg_;

  nn::Encoder encoder_;
  nn::LstmCell lstm_;
  nn::ActorHead actor_;
  nn::CriticHead critic_;
  mask::EdgeLogitNetwork edge_net_;
  ad::Parameter free_logits_;
  ad::Optimizer optimizer_;
};

}  // namespace bayesg::train
