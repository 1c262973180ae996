#pragma once

#include <cstdint>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "bayesg/graph.hpp"

// Store-and-forward queue network. Each intersection holds one queue per
// incoming approach (one per neighbor plus one external entry); a signal
// phase turns a disjoint subset of approaches green; discharged vehicles are
// routed to a downstream neighbor approach or leave the network.
namespace bayesg::env {

using Row = Eigen::RowVectorXd;

class EnvError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct EnvConfig {
  graph::EnvGraph graph = graph::make_grid(1, 1);
  int phases = 2;               // per node; approach k is green under phase k % phases
  int saturation_flow = 3;      // vehicles per green approach per step
  int clearance_steps = 1;      // all-red steps after a phase change, no discharge
  double arrival_rate = 0.5;    // Poisson mean per external approach per step
  int episode_length = 500;     // T
  double reward_scale = 10.0;
  int capacity = 40;            // vehicles per approach
  double exit_weight = 1.0;     // routing weight of leaving the network
  bool peak_hour = false;       // rate multiplier 1 + amplitude * sin(pi t / T)
  double peak_amplitude = 1.0;
  int initial_queue_max = 0;    // initial queues ~ U{0..max}
  double queue_norm = 10.0;     // observed queue = vehicles / queue_norm
  double age_norm = 20.0;
  std::uint64_t routing_seed = 7;

  void validate() const;
};

struct IntersectionState {
  std::vector<int> queues;  // approach order: neighbors ascending, then external
  std::vector<int> ages;    // steps each non-empty approach has waited on red
  std::vector<double> credits;  // smooth weighted round-robin credits, per approach x destination
  int phase = 0;
  int clearance = 0;  // remaining all-red steps
  int arrivals = 0;  // admitted this step
  int generated = 0; // drawn this step, before the capacity cap

  int total() const;
  bool operator==(const IntersectionState&) const = default;
};

struct StepOutcome {
  std::vector<Row> observations;
  std::vector<double> rewards;
  bool done = false;
  int arrivals = 0;
  int exits = 0;
  int blocked = 0;  // vehicles held upstream because the downstream approach was full
};

class TrafficEnv {
 public:
  explicit TrafficEnv(EnvConfig config);

  std::vector<Row> reset(std::uint64_t seed);
  StepOutcome step(std::span<const int> actions);
  Row observe(int i) const;

  int agent_count() const { return config_.graph.node_count(); }
  int action_count(int) const { return config_.phases; }
  int max_actions() const { return config_.phases; }
  int max_approaches() const { return config_.graph.max_degree() + 1; }
  int observation_width() const { return 2 * max_approaches() + config_.phases; }
  int time() const { return t_; }
  int total_vehicles() const;

  const EnvConfig& config() const { return config_; }
  const graph::EnvGraph& graph() const { return config_.graph; }
  const IntersectionState& state(int i) const { return nodes_.at(i); }
  IntersectionState& mutable_state(int i) { return nodes_.at(i); }

 private:
  struct Destination {
    int node = -1;      // -1: leaves the network
    int approach = -1;  // approach index at the destination node
    double weight = 1.0;
  };

  int pick_destination(int node, int approach);
  double rate_multiplier() const;

  EnvConfig config_;
  // routes_[node][approach] -> candidate destinations
  std::vector<std::vector<std::vector<Destination>>> routes_;
  std::vector<std::vector<int>> credit_offset_;
  std::vector<IntersectionState> nodes_;
  std::vector<std::mt19937_64> noise_;
  int t_ = 0;
};

// True iff node i's one-step next state is unchanged when node k's queues are
// perturbed, with identical actions and noise streams.
bool locality_probe(const TrafficEnv& env, std::span<const int> actions, int i, int k, int delta = 5);

// Appends "step,node,queue_sum,action,reward" rows.
void write_trajectory_rows(std::ostream& out, int step, const TrafficEnv& env,
                           std::span<const int> actions, const StepOutcome& outcome);

}  // namespace bayesg::env
