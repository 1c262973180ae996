#include "bayesg/agent.hpp"

#include <stdexcept>

namespace bayesg::train {

MaskMode mask_mode_from_string(const std::string& s) {
  if (s == "learned") return MaskMode::learned;
  if (s == "none") return MaskMode::none;
  if (s == "random") return MaskMode::random;
  throw std::invalid_argument("unknown mask mode \"" + s + "\"");
}

std::string to_string(MaskMode m) {
  switch (m) {
    case MaskMode::learned: return "learned";
    case MaskMode::none: return "none";
    case MaskMode::random: return "random";
  }
  return "?";
}

LogitMode logit_mode_from_string(const std::string& s) {
  if (s == "network") return LogitMode::network;
  if (s == "free") return LogitMode::free;
  throw std::invalid_argument("unknown logit mode \"" + s + "\"");
}

std::string to_string(LogitMode m) { return m == LogitMode::network ? "network" : "free"; }

EntropyConvention entropy_convention_from_string(const std::string& s) {
  if (s == "objective") return EntropyConvention::objective;
  if (s == "a2c") return EntropyConvention::a2c;
  throw std::invalid_argument("unknown entropy convention \"" + s + "\"");
}

std::string to_string(EntropyConvention c) {
  return c == EntropyConvention::objective ? "objective" : "a2c";
}

void TrainConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in (0,1]");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0,1]");
  if (!(beta >= 0.0)) throw std::invalid_argument("beta must be non-negative");
  if (batch < 1) throw std::invalid_argument("batch size must be positive");
  if (episodes < 1) throw std::invalid_argument("episode count must be positive");
  if (!(lr_actor > 0.0 && lr_critic > 0.0 && lr_graph > 0.0))
    throw std::invalid_argument("learning rates must be positive");
  if (!(elbo_weight >= 0.0)) throw std::invalid_argument("elbo weight must be non-negative");
  if (!(value_coef > 0.0)) throw std::invalid_argument("value coefficient must be positive");
  if (embed < 1 || hidden < 1 || critic_width < 1)
    throw std::invalid_argument("layer widths must be positive");
  if (gcn_layers < 1 || gcn_layers > 2) throw std::invalid_argument("gcn layers must be 1 or 2");
  prior.validate();
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

AgentStreams make_streams(std::uint64_t seed, int agent, std::uint32_t purpose) {
  return {Rng(derive_seed(seed, static_cast<std::uint64_t>(agent), 100u + 2u * purpose)),
          Rng(derive_seed(seed, static_cast<std::uint64_t>(agent), 101u + 2u * purpose))};
}

int sample_action(const Row& probs, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = u(rng);
  double acc = 0.0;
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    acc += probs(k);
    if (x < acc) return static_cast<int>(k);
  }
  return static_cast<int>(probs.size()) - 1;
}

namespace {

enum Module : std::uint32_t { kEncoder = 1, kLstm, kActor, kCritic, kEdge };

Rng module_rng(std::uint64_t seed, int agent, Module m) {
  return Rng(derive_seed(seed, static_cast<std::uint64_t>(agent), m));
}

}  // namespace

Agent::Agent(int id, graph::EgoGraph ego, const AgentShape& shape, const TrainConfig& cfg)
    : id_(id), ego_(std::move(ego)), hops_(graph::hop_distances(ego_)), shape_(shape), cfg_(cfg) {
  const std::string prefix = "agent" + std::to_string(id);
  nn::EncoderDims dims{shape.observation, shape.max_actions, cfg.hidden, cfg.embed,
                       shape.max_neighbors, cfg.gcn_layers};
  Rng r_enc = module_rng(cfg.seed, id, kEncoder);
  Rng r_lstm = module_rng(cfg.seed, id, kLstm);
  Rng r_actor = module_rng(cfg.seed, id, kActor);
  Rng r_critic = module_rng(cfg.seed, id, kCritic);
  Rng r_edge = module_rng(cfg.seed, id, kEdge);
  encoder_ = nn::Encoder(cfg.method, prefix + "/encoder", dims, r_enc);
  lstm_ = nn::LstmCell(prefix + "/lstm", encoder_.output_dim(), cfg.hidden, r_lstm);
  actor_ = nn::ActorHead(prefix + "/actor", cfg.hidden, shape.actions, r_actor);
  critic_ = nn::CriticHead(prefix + "/critic", cfg.hidden, shape.max_neighbors * shape.max_actions,
                           cfg.critic_width, r_critic);
  if (learns_mask()) {
    if (cfg.logit_mode == LogitMode::network)
      edge_net_ = mask::EdgeLogitNetwork(prefix + "/mask", dims, cfg.mask_features, cfg.logit_init, r_edge);
    else
      free_logits_ = ad::Parameter(prefix + "/mask/logits",
                                   Matrix::Constant(1, ego_.edge_count(), cfg.logit_init));
  }
  optimizer_ = ad::Optimizer(cfg.optimizer, {{actor_parameters(), cfg.lr_actor},
                                             {critic_parameters(), cfg.lr_critic},
                                             {graph_parameters(), cfg.lr_graph}});
}

bool Agent::uses_graph_encoder() const { return cfg_.method == nn::Method::bayesg; }

bool Agent::learns_mask() const {
  return uses_graph_encoder() && cfg_.mask_mode == MaskMode::learned;
}

std::vector<ad::Parameter*> Agent::actor_parameters() {
  std::vector<ad::Parameter*> out;
  encoder_.collect(out);
  lstm_.collect(out);
  actor_.collect(out);
  return out;
}

std::vector<ad::Parameter*> Agent::critic_parameters() {
  std::vector<ad::Parameter*> out;
  critic_.collect(out);
  return out;
}

std::vector<ad::Parameter*> Agent::graph_parameters() {
  std::vector<ad::Parameter*> out;
  if (!learns_mask()) return out;
  if (cfg_.logit_mode == LogitMode::network)
    edge_net_.collect(out);
  else
    out.push_back(&free_logits_);
  return out;
}

std::vector<ad::Parameter*> Agent::parameters() {
  auto out = actor_parameters();
  for (auto* p : critic_parameters()) out.push_back(p);
  for (auto* p : graph_parameters()) out.push_back(p);
  return out;
}

void Agent::draw_mask_inputs(StepInput& in, Rng& rng) const {
  const int m = ego_.edge_count();
  in.mask_noise.resize(0);
  in.fixed_mask.resize(0);
  if (!uses_graph_encoder()) return;
  switch (cfg_.mask_mode) {
    case MaskMode::learned: in.mask_noise = mask::draw_logistic_noise(m, rng); break;
    case MaskMode::none: in.fixed_mask = Row::Ones(m); break;
    case MaskMode::random: {
      std::bernoulli_distribution keep(0.5);
      in.fixed_mask.resize(m);
      for (int e = 0; e < m; ++e) in.fixed_mask(e) = keep(rng) ? 1.0 : 0.0;
      break;
    }
  }
}

PolicyOutput Agent::policy(ad::Tape& t, const StepInput& in, nn::LstmState prev, bool hard) {
  const int n = ego_.size();
  if (in.states.rows() != n || in.policies.rows() != n || in.neighbor_traj.rows() != n - 1)
    throw ad::ShapeError("agent " + std::to_string(id_) + ": step input rows do not match ego size " +
                         std::to_string(n));
  nn::AgentChannels ch;
  ch.states = t.constant(in.states);
  ch.policies = t.constant(in.policies);
  ch.trajectories = n > 1 ? ad::concat_rows({prev.h, t.constant(in.neighbor_traj)}) : prev.h;

  PolicyOutput out;
  Var a_eff = t.constant(ego_.adjacency);
  if (uses_graph_encoder()) {
    if (learns_mask()) {
      out.logits = cfg_.logit_mode == LogitMode::network ? edge_net_.logits(t, ch, ego_)
                                                         : t.leaf(free_logits_);
      if (hard) {
        const Row phi = out.logits.value();
        Row z = cfg_.exec_mean_mask ? Row((phi.array() > 0.0).cast<double>())
                                    : mask::mask_from_noise(phi, in.mask_noise, in.tau, true).values;
        out.mask = t.constant(Matrix(z));
      } else {
        out.mask = mask::relaxed_mask(out.logits, in.mask_noise, in.tau, cfg_.straight_through);
      }
    } else {
      out.mask = t.constant(Matrix(in.fixed_mask));
    }
    a_eff = mask::effective_subgraph(out.mask, ego_);
  }
  Var encoded = encoder_.encode(t, ch, a_eff);
  out.state = lstm_(t, encoded, prev);
  out.log_probs = ad::log_softmax(actor_.logits(t, out.state.h));
  return out;
}

Var Agent::value(ad::Tape& t, Var h, const Row& neighbor_actions) {
  return critic_.value(t, ad::detach(h), t.constant(Matrix(neighbor_actions)));
}

Row Agent::edge_logits(const StepInput& in, const Row& own_h) {
  if (!learns_mask()) return Row();
  if (cfg_.logit_mode == LogitMode::free) return free_logits_.value;
  ad::Tape t;
  const int n = ego_.size();
  nn::AgentChannels ch;
  ch.states = t.constant(in.states);
  ch.policies = t.constant(in.policies);
  Var own = t.constant(Matrix(own_h));
  ch.trajectories = n > 1 ? ad::concat_rows({own, t.constant(in.neighbor_traj)}) : own;
  return edge_net_.logits(t, ch, ego_).value();
}

}  // namespace bayesg::train
