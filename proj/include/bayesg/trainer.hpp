#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "bayesg/agent.hpp"
#include "bayesg/returns.hpp"
#include "bayesg/traffic_env.hpp"

namespace bayesg::train {

// Stream purposes for make_streams.
inline constexpr std::uint32_t kTrainStreams = 0;
inline constexpr std::uint32_t kEvalStreams = 1;

// Reset seed of the given episode; purposes as above.
std::uint64_t episode_seed(std::uint64_t seed, long long episode, std::uint32_t purpose);

struct StepRecord {
  StepInput input;
  int action = 0;
  Row neighbor_actions;  // one-hot, max_neighbors x max_actions flattened
  double value = 0.0;    // v_{i,tau} under the behavior parameters
  double log_prob = 0.0; // log pi(u) at rollout time
  Row mask;              // sampled mask (graph encoder only)
  bool reset_before = false;  // recurrent state zeroed before this step
};

struct AgentTrace {
  Row h0, c0;  // recurrent state entering the batch
  std::vector<StepRecord> steps;
};

struct RolloutBatch {
  std::vector<AgentTrace> agents;
  ReturnInputs returns;
  long long start_step = 0;
  int size() const { return static_cast<int>(returns.rewards.rows()); }
};

struct LossBreakdown {
  double policy = 0.0;
  double value = 0.0;
  double elbo = 0.0;
  double prior = 0.0;
  double mask_entropy = 0.0;
  double total = 0.0;
};

// Differentiable loss components of one agent over one batch.
struct LossVars {
  Var policy, value, elbo, prior, mask_entropy, total;
  int clamped = 0;  // log-probabilities clamped at the floor
};

struct UpdateRecord {
  long long step = 0;
  int episode = 0;
  double mean_return = 0.0;
  LossBreakdown loss;
  int clamped = 0;
};

struct EpisodeRecord {
  int episode = 0;
  long long step = 0;
  double ret = 0.0;  // sum over steps of the agent-mean reward
};

struct EvalResult {
  std::vector<std::vector<std::vector<int>>> actions;  // episode, step, agent
  std::vector<double> returns;
  double retained_fraction = 1.0;
};

// Live per-agent quantities carried between steps.
struct RuntimeState {
  std::vector<Row> obs, h, c, pi;
};

// One synchronous decision of every agent.
struct Decision {
  std::vector<StepRecord> records;
  std::vector<Row> h, c, probs;
  std::vector<int> actions;
};

class Trainer {
 public:
  Trainer(env::EnvConfig env_config, TrainConfig config);

  RolloutBatch rollout(int steps);
  UpdateRecord update(const RolloutBatch& batch);
  LossVars build_losses(ad::Tape& t, Agent& agent, const AgentTrace& trace,
                        const ReturnInputs& returns) const;

  using UpdateFn = std::function<void(const UpdateRecord&)>;
  using EpisodeFn = std::function<void(const EpisodeRecord&)>;
  // Alternates rollout and update until the configured episode count.
  void run(const UpdateFn& on_update = {}, const EpisodeFn& on_episode = {});

  // Hard-mask rollouts on evaluation streams; training state is untouched.
  EvalResult evaluate(std::uint64_t seed, int episodes);

  // Decision of all agents at the given state; draws from `streams`.
  Decision decide(const RuntimeState& state, std::vector<AgentStreams>& streams, double tau, bool hard);

  long long step() const { return step_; }
  int episode() const { return episode_; }
  long long total_steps() const;
  double temperature() const;
  const std::vector<EpisodeRecord>& episodes() const { return episode_log_; }

  Agent& agent(int i) { return *agents_.at(i); }
  int agent_count() const { return static_cast<int>(agents_.size()); }
  const TrainConfig& config() const { return cfg_; }
  const env::EnvConfig& env_config() const { return env_config_; }
  env::TrafficEnv& env() { return env_; }
  void set_progress(long long step, int episode) { step_ = step; episode_ = episode; }

 private:
  void reset_runtime(RuntimeState& state, env::TrafficEnv& env, std::uint64_t seed) const;

  env::EnvConfig env_config_;
  TrainConfig cfg_;
  env::TrafficEnv env_;
  std::vector<std::unique_ptr<Agent>> agents_;
  RuntimeState live_;
  std::vector<AgentStreams> streams_;
  long long step_ = 0;
  int episode_ = 0;
  double episode_return_ = 0.0;
  std::vector<EpisodeRecord> episode_log_;
};

StepInput gather_input(const Agent& agent, const RuntimeState& state);
Row neighbor_action_features(const Agent& agent, const std::vector<int>& actions);
AgentShape agent_shape(const env::TrafficEnv& env, int i);

}  // namespace bayesg::train
