#include "bayesg/exec_sim.hpp"

#include <algorithm>

namespace bayesg::exec {

void Schedule::validate() const {
  if (comm_ticks < 0 || control_ticks <= 0)
    throw ExecError("schedule ticks must be positive (comm may be 0)");
  if (comm_ticks > control_ticks)
    throw ExecError("communication window (" + std::to_string(comm_ticks) +
                    " ticks) exceeds the control interval (" + std::to_string(control_ticks) + ")");
}

void ChannelConfig::validate() const {
  if (!(drop >= 0.0 && drop <= 1.0)) throw ExecError("drop probability must lie in [0,1]");
  if (delay < 0 || jitter < 0) throw ExecError("delay and jitter must be non-negative");
}

MessageBus::MessageBus(const graph::EnvGraph& g, ChannelConfig channel, std::uint64_t seed)
    : graph_(&g), channel_(channel), rng_(seed) {
  channel_.validate();
}

void MessageBus::send(int from, int to, Payload payload, long long now, long long deadline) {
  if (!graph_->adjacent(from, to))
    throw ExecError("message from " + std::to_string(from) + " to " + std::to_string(to) +
                    " does not follow an edge of the environment graph");
  LinkCount& link = links_[{from, to}];
  ++link.sent;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // Both draws happen for every message so the stream does not depend on outcomes.
  const bool dropped = u(rng_) < channel_.drop;
  long long latency = channel_.delay;
  if (channel_.jitter > 0)
    latency += std::uniform_int_distribution<long long>(0, channel_.jitter)(rng_);
  if (dropped || now + latency > deadline) return;
  in_flight_.push_back({from, to, std::move(payload), now + latency});
}

std::vector<Message> MessageBus::deliver(long long now) {
  std::vector<Message> due;
  auto split = std::stable_partition(in_flight_.begin(), in_flight_.end(),
                                     [now](const Message& m) { return m.deliver_at > now; });
  std::move(split, in_flight_.end(), std::back_inserter(due));
  in_flight_.erase(split, in_flight_.end());
  std::sort(due.begin(), due.end(), [](const Message& a, const Message& b) {
    return std::tie(a.deliver_at, a.sender, a.receiver) < std::tie(b.deliver_at, b.sender, b.receiver);
  });
  for (const auto& m : due) ++links_[{m.sender, m.receiver}].delivered;
  return due;
}

namespace {

struct CacheEntry {
  Payload payload;
  bool received = false;
};

struct Runtime {
  Row h, c, pi;
  std::map<int, CacheEntry> cache;  // by neighbor node id
};

Payload zero_payload(int state, int policy, int hidden) {
  return {Row::Zero(state), Row::Zero(policy), Row::Zero(hidden), -1};
}

}  // namespace

ExecResult run_execution(train::Trainer& trainer, const ChannelConfig& channel,
                         const Schedule& schedule, std::uint64_t seed, int episodes) {
  schedule.validate();
  channel.validate();
  const int n = trainer.agent_count();
  const auto& cfg = trainer.config();
  env::TrafficEnv env(trainer.env_config());
  const auto& g = env.graph();
  MessageBus bus(g, channel, train::derive_seed(seed, 0xb05u, 0));
  std::vector<train::AgentStreams> streams;
  for (int i = 0; i < n; ++i) streams.push_back(train::make_streams(seed, i, train::kEvalStreams));

  const int state_w = env.observation_width();
  const int policy_w = env.max_actions();
  const int hidden = cfg.hidden;

  ExecResult result;
  std::map<std::pair<int, int>, std::pair<long long, long long>> kept;  // (i,j) -> (kept, decisions)
  long long kept_all = 0, slots_all = 0;
  long long clock = 0;

  std::vector<Runtime> rt(n);
  for (int e = 0; e < episodes; ++e) {
    std::vector<Row> obs = env.reset(train::episode_seed(seed, e, train::kEvalStreams));
    bus.clear_in_flight();
    for (int i = 0; i < n; ++i) {
      rt[i].h = Row::Zero(hidden);
      rt[i].c = Row::Zero(hidden);
      rt[i].pi = Row::Zero(policy_w);
      rt[i].cache.clear();
      for (int j : g.neighbors(i)) rt[i].cache[j] = {zero_payload(state_w, policy_w, hidden), false};
    }
    std::vector<std::vector<int>> episode_actions;
    double ret = 0.0;
    bool done = false;
    while (!done) {
      const long long now = clock;
      const long long decide_at = now + schedule.comm_ticks;

      // Observe and sample the mask.
      std::vector<train::StepInput> inputs(n);
      for (int i = 0; i < n; ++i) {
        trainer.agent(i).draw_mask_inputs(inputs[i], streams[i].mask);
        inputs[i].tau = cfg.prior.tau_end;
      }
      // Send to every physical neighbor.
      for (int i = 0; i < n; ++i)
        for (int j : g.neighbors(i)) bus.send(i, j, {obs[i], rt[i].pi, rt[i].h, now}, now, decide_at);
      // Receive within the window.
      for (auto& m : bus.deliver(decide_at)) {
        if (m.payload.generated_at > decide_at)
          throw std::logic_error("causality violation: payload from the future");
        rt[m.receiver].cache[m.sender] = {std::move(m.payload), true};
      }
      // Encode and act.
      std::vector<int> actions(n);
      std::vector<train::PolicyOutput> outs(n);
      std::vector<ad::Tape> tapes(n);
      for (int i = 0; i < n; ++i) {
        train::Agent& a = trainer.agent(i);
        const auto& members = a.ego().members;
        const int m = static_cast<int>(members.size());
        train::StepInput& in = inputs[i];
        in.states.resize(m, state_w);
        in.policies.resize(m, policy_w);
        in.neighbor_traj.resize(m - 1, hidden);
        in.states.row(0) = obs[i];
        in.policies.row(0) = rt[i].pi;
        for (int k = 1; k < m; ++k) {
          const CacheEntry& c = rt[i].cache.at(members[k]);
          if (c.payload.generated_at > decide_at) throw std::logic_error("causality violation");
          if (c.payload.generated_at != now) ++result.stale_reads;
          in.states.row(k) = c.payload.state;
          in.policies.row(k) = c.payload.policy;
          in.neighbor_traj.row(k - 1) = c.payload.trajectory;
        }
        ad::Tape& t = tapes[i];
        outs[i] = a.policy(t, in, {t.constant(ad::Matrix(rt[i].h)), t.constant(ad::Matrix(rt[i].c))}, true);
        const Row probs = outs[i].log_probs.value().array().exp();
        actions[i] = train::sample_action(probs, streams[i].action);
        rt[i].pi = Row::Zero(policy_w);
        rt[i].pi.head(probs.size()) = probs;
        if (outs[i].mask.valid()) {
          const Row z = outs[i].mask.value();
          kept_all += static_cast<long long>(z.sum());
          slots_all += z.size();
          for (int k = 0; k < static_cast<int>(a.ego().edges.size()); ++k) {
            auto [u, v] = a.ego().edges[k];
            if (u != 0) continue;
            auto& cnt = kept[{i, members[v]}];
            cnt.first += z(k) > 0.5 ? 1 : 0;
            ++cnt.second;
          }
        }
      }
      for (int i = 0; i < n; ++i) {
        rt[i].h = outs[i].state.h.value();
        rt[i].c = outs[i].state.c.value();
      }

      const env::StepOutcome outcome = env.step(actions);
      for (int i = 0; i < n; ++i) ret += outcome.rewards[i] / n;
      obs = outcome.observations;
      episode_actions.push_back(std::move(actions));
      done = outcome.done;
      clock += schedule.control_ticks;
    }
    result.actions.push_back(std::move(episode_actions));
    result.returns.push_back(ret);
  }

  for (int i = 0; i < n; ++i)
    for (int j : g.neighbors(i)) {
      EdgeUsage u;
      u.from = i;
      u.to = j;
      auto link = bus.links().find({j, i});
      if (link != bus.links().end()) {
        u.sent = link->second.sent;
        u.delivered = link->second.delivered;
      }
      auto k = kept.find({i, j});
      u.retained = k == kept.end() || k->second.second == 0
                       ? 1.0
                       : static_cast<double>(k->second.first) / k->second.second;
      result.messages_sent += u.sent;
      result.messages_delivered += u.delivered;
      result.edges.push_back(u);
    }
  result.retained_fraction = slots_all > 0 ? static_cast<double>(kept_all) / slots_all : 1.0;
  return result;
}

std::vector<EdgeUsage> message_accounting(const ExecResult& run) {
  for (const auto& e : run.edges) {
    if (e.delivered > e.sent)
      throw std::logic_error("edge " + std::to_string(e.to) + "->" + std::to_string(e.from) +
                             " delivered more messages than it sent");
    if (!(e.retained >= 0.0 && e.retained <= 1.0))
      throw std::logic_error("retained-edge fraction outside [0,1]");
  }
  return run.edges;
}

}  // namespace bayesg::exec
