#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <vector>

#include "bayesg/trainer.hpp"

// Decentralized execution as a discrete-event simulation. Agents exchange
// (state, fingerprint, recurrent state) messages over a lossy bus inside a
// communication window, then act; the environment advances once per control
// interval.
namespace bayesg::exec {

using Row = Eigen::RowVectorXd;

class ExecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Times are integer ticks.
struct Schedule {
  long long comm_ticks = 2;      // window for neighbor messages
  long long control_ticks = 10;  // decision cadence
  void validate() const;
};

struct ChannelConfig {
  double drop = 0.0;     // per-message drop probability
  long long delay = 0;   // base latency in ticks
  long long jitter = 0;  // extra latency ~ U{0..jitter}
  void validate() const;
};

struct Payload {
  Row state;
  Row policy;      // sender's pi_{t-1}
  Row trajectory;  // sender's h_{t-1}
  long long generated_at = 0;
};

struct Message {
  int sender = 0;
  int receiver = 0;
  Payload payload;
  long long deliver_at = 0;
};

struct LinkCount {
  long long sent = 0;
  long long delivered = 0;
};

class MessageBus {
 public:
  MessageBus(const graph::EnvGraph& g, ChannelConfig channel, std::uint64_t seed);

  // Queues a message. Lost messages (dropped, or later than `deadline`) are
  // counted as sent and never delivered. Throws on a non-edge.
  void send(int from, int to, Payload payload, long long now, long long deadline);
  // Removes and returns messages due by `now`, ordered by (time, sender, receiver).
  std::vector<Message> deliver(long long now);
  void clear_in_flight() { in_flight_.clear(); }

  const std::map<std::pair<int, int>, LinkCount>& links() const { return links_; }
  std::size_t in_flight() const { return in_flight_.size(); }

 private:
  const graph::EnvGraph* graph_;
  ChannelConfig channel_;
  std::mt19937_64 rng_;
  std::vector<Message> in_flight_;
  std::map<std::pair<int, int>, LinkCount> links_;
};

struct EdgeUsage {
  int from = 0;  // receiver-side agent whose mask covers the edge
  int to = 0;
  long long sent = 0;       // messages to -> from
  long long delivered = 0;
  double retained = 0.0;    // fraction of decisions with the edge kept
};

struct ExecResult {
  std::vector<double> returns;
  std::vector<std::vector<std::vector<int>>> actions;  // episode, step, agent
  std::vector<EdgeUsage> edges;
  double retained_fraction = 1.0;  // over all ego-edges and decisions
  long long messages_sent = 0;
  long long messages_delivered = 0;
  long long stale_reads = 0;  // neighbor rows served from an older cache entry
};

// Runs `episodes` episodes with the trainer's agents on evaluation streams of
// `seed`; under an ideal channel the actions match Trainer::evaluate.
ExecResult run_execution(train::Trainer& trainer, const ChannelConfig& channel,
                         const Schedule& schedule, std::uint64_t seed, int episodes);

// Per-edge counts with their consistency checks applied.
std::vector<EdgeUsage> message_accounting(const ExecResult& run);

}  // namespace bayesg::exec
