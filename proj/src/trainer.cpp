#include "bayesg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace bayesg::train {

namespace {

constexpr double kLogProbFloor = -30.0;

Row zeros(int n) { return Row::Zero(n); }

bool finite(double x) { return std::isfinite(x); }

std::string describe_batch(const RolloutBatch& b, int agent, const LossVars& lv) {
  std::ostringstream os;
  os << "non-finite loss for agent " << agent << " at step " << b.start_step << ": policy "
     << lv.policy.scalar() << ", value " << lv.value.scalar() << ", elbo " << lv.elbo.scalar()
     << ", prior " << lv.prior.scalar() << ", mask entropy " << lv.mask_entropy.scalar()
     << "; batch of " << b.size() << " steps, rewards [" << b.returns.rewards.minCoeff() << ", "
     << b.returns.rewards.maxCoeff() << "], values [" << b.returns.values.minCoeff() << ", "
     << b.returns.values.maxCoeff() << "]";
  const auto& trace = b.agents.at(agent);
  int bad = 0;
  for (const auto& s : trace.steps)
    if (!s.input.states.allFinite() || !s.input.policies.allFinite() ||
        !s.input.neighbor_traj.allFinite() || !s.input.mask_noise.allFinite())
      ++bad;
  os << ", " << bad << " steps with non-finite inputs";
  return os.str();
}

}  // namespace

std::uint64_t episode_seed(std::uint64_t seed, long long episode, std::uint32_t purpose) {
  return derive_seed(seed, static_cast<std::uint64_t>(episode), 0xe000u + purpose);
}

AgentShape agent_shape(const env::TrafficEnv& env, int i) {
  return {env.observation_width(), env.max_actions(), env.action_count(i), env.graph().max_degree()};
}

StepInput gather_input(const Agent& agent, const RuntimeState& state) {
  const auto& members = agent.ego().members;
  const int n = static_cast<int>(members.size());
  const int hidden = static_cast<int>(state.h.at(members[0]).size());
  StepInput in;
  in.states.resize(n, state.obs.at(members[0]).size());
  in.policies.resize(n, state.pi.at(members[0]).size());
  in.neighbor_traj.resize(n - 1, hidden);
  for (int k = 0; k < n; ++k) {
    in.states.row(k) = state.obs[members[k]];
    in.policies.row(k) = state.pi[members[k]];
    if (k > 0) in.neighbor_traj.row(k - 1) = state.h[members[k]];
  }
  return in;
}

Row neighbor_action_features(const Agent& agent, const std::vector<int>& actions) {
  const auto& shape = agent.shape();
  Row out = Row::Zero(shape.max_neighbors * shape.max_actions);
  const auto& members = agent.ego().members;
  for (std::size_t k = 1; k < members.size(); ++k)
    out((static_cast<int>(k) - 1) * shape.max_actions + actions.at(members[k])) = 1.0;
  return out;
}

Trainer::Trainer(env::EnvConfig env_config, TrainConfig config)
    : env_config_(std::move(env_config)), cfg_(std::move(config)), env_(env_config_) {
  cfg_.validate();
  const auto& g = env_.graph();
  for (int i = 0; i < g.node_count(); ++i) {
    agents_.push_back(std::make_unique<Agent>(i, graph::ego_graph(g, i, cfg_.neighbor_edges),
                                              agent_shape(env_, i), cfg_));
    streams_.push_back(make_streams(cfg_.seed, i, kTrainStreams));
  }
  reset_runtime(live_, env_, episode_seed(cfg_.seed, 0, kTrainStreams));
}

long long Trainer::total_steps() const {
  return static_cast<long long>(cfg_.episodes) * env_config_.episode_length;
}

double Trainer::temperature() const { return cfg_.prior.temperature(step_, total_steps()); }

void Trainer::reset_runtime(RuntimeState& state, env::TrafficEnv& env, std::uint64_t seed) const {
  state.obs = env.reset(seed);
  const int n = env.agent_count();
  state.h.assign(n, zeros(cfg_.hidden));
  state.c.assign(n, zeros(cfg_.hidden));
  state.pi.assign(n, zeros(env.max_actions()));
}

Decision Trainer::decide(const RuntimeState& state, std::vector<AgentStreams>& streams, double tau,
                         bool hard) {
  const int n = agent_count();
  Decision d;
  d.records.resize(n);
  d.h.resize(n);
  d.c.resize(n);
  d.probs.resize(n);
  d.actions.resize(n);
  std::vector<ad::Tape> tapes(n);
  std::vector<Var> hs(n);
  for (int i = 0; i < n; ++i) {
    Agent& a = *agents_[i];
    ad::Tape& t = tapes[i];
    StepRecord& rec = d.records[i];
    rec.input = gather_input(a, state);
    a.draw_mask_inputs(rec.input, streams[i].mask);
    rec.input.tau = tau;
    PolicyOutput out =
        a.policy(t, rec.input, {t.constant(Matrix(state.h[i])), t.constant(Matrix(state.c[i]))}, hard);
    const Row log_probs = out.log_probs.value();
    const Row probs = log_probs.array().exp();
    rec.action = sample_action(probs, streams[i].action);
    rec.log_prob = log_probs(rec.action);
    if (out.mask.valid()) rec.mask = out.mask.value();
    d.actions[i] = rec.action;
    d.h[i] = out.state.h.value();
    d.c[i] = out.state.c.value();
    d.probs[i] = Row::Zero(env_.max_actions());
    d.probs[i].head(probs.size()) = probs;
    hs[i] = out.state.h;
  }
  for (int i = 0; i < n; ++i) {
    Agent& a = *agents_[i];
    d.records[i].neighbor_actions = neighbor_action_features(a, d.actions);
    d.records[i].value = a.value(tapes[i], hs[i], d.records[i].neighbor_actions).scalar();
  }
  return d;
}

RolloutBatch Trainer::rollout(int steps) {
  if (steps < 1) throw std::invalid_argument("rollout length must be positive");
  const int n = agent_count();
  RolloutBatch b;
  b.start_step = step_;
  b.agents.resize(n);
  for (int i = 0; i < n; ++i) {
    b.agents[i].h0 = live_.h[i];
    b.agents[i].c0 = live_.c[i];
  }
  b.returns.rewards.resize(steps, n);
  b.returns.values.resize(steps, n);
  b.returns.dones.assign(steps, false);

  bool reset_before = false;
  for (int s = 0; s < steps; ++s) {
    Decision d = decide(live_, streams_, temperature(), false);
    const env::StepOutcome outcome = env_.step(d.actions);
    double mean_reward = 0.0;
    for (int i = 0; i < n; ++i) {
      d.records[i].reset_before = reset_before;
      b.returns.rewards(s, i) = outcome.rewards[i];
      b.returns.values(s, i) = d.records[i].value;
      b.agents[i].steps.push_back(std::move(d.records[i]));
      mean_reward += outcome.rewards[i];
    }
    episode_return_ += mean_reward / n;
    live_.h = std::move(d.h);
    live_.c = std::move(d.c);
    live_.pi = std::move(d.probs);
    live_.obs = outcome.observations;
    b.returns.dones[s] = outcome.done;
    ++step_;
    reset_before = outcome.done;
    if (outcome.done) {
      episode_log_.push_back({episode_, step_, episode_return_});
      ++episode_;
      episode_return_ = 0.0;
      reset_runtime(live_, env_, episode_seed(cfg_.seed, episode_, kTrainStreams));
    }
  }

  // Bootstrap from the next decision on copies of the streams, so the real
  // next step still draws the same randomness under the updated parameters.
  std::vector<AgentStreams> peek_streams = streams_;
  Decision next = decide(live_, peek_streams, temperature(), false);
  b.returns.bootstrap.resize(n);
  for (int i = 0; i < n; ++i) b.returns.bootstrap(i) = next.records[i].value;
  return b;
}

LossVars Trainer::build_losses(ad::Tape& t, Agent& agent, const AgentTrace& trace,
                               const ReturnInputs& returns) const {
  const int steps = static_cast<int>(trace.steps.size());
  const double lambda = cfg_.prior.retention;
  const double entropy_sign = cfg_.entropy == EntropyConvention::objective ? 1.0 : -1.0;
  LossVars lv;
  Var policy = t.constant(0.0), value = t.constant(0.0);
  Var prior = t.constant(0.0), entropy = t.constant(0.0), reg = t.constant(0.0);

  nn::LstmState prev{t.constant(Matrix(trace.h0)), t.constant(Matrix(trace.c0))};
  const int hidden = static_cast<int>(trace.h0.size());
  for (int s = 0; s < steps; ++s) {
    const StepRecord& rec = trace.steps[s];
    if (rec.reset_before)
      prev = {t.constant(Matrix::Zero(1, hidden)), t.constant(Matrix::Zero(1, hidden))};
    PolicyOutput out = agent.policy(t, rec.input, prev, false);

    Var log_prob = ad::slice(out.log_probs, 0, 1, rec.action, 1);
    if (log_prob.scalar() < kLogProbFloor) {
      log_prob = t.constant(kLogProbFloor);
      ++lv.clamped;
    }
    const double ret = spatially_discounted_return(returns, agent.hops(), s, cfg_.batch, cfg_.gamma,
                                                   cfg_.alpha);
    const double adv = ret - returns.values(s, agent.id());
    Var term = ad::scale(log_prob, -adv);
    if (cfg_.beta > 0.0)
      term = term + ad::scale(nn::entropy_from_log_probs(out.log_probs), cfg_.beta * entropy_sign);
    policy = policy + term;

    Var v = agent.value(t, out.state.h, rec.neighbor_actions);
    value = value + ad::square(ad::add_scalar(v, -ret));

    if (agent.learns_mask()) {
      prior = prior + mask::regrouped_prior_term(out.logits, lambda);
      entropy = entropy + mask::mask_entropy(out.logits);
      reg = reg + mask::elbo_regularizer(out.logits, lambda);
    }
    prev = out.state;
  }
  const double inv = 1.0 / steps;
  lv.policy = ad::scale(policy, inv);
  lv.value = ad::scale(value, inv);
  lv.prior = ad::scale(prior, -inv);
  lv.mask_entropy = ad::scale(entropy, inv);
  lv.elbo = lv.policy - ad::scale(reg, cfg_.elbo_weight * inv);
  lv.total = lv.elbo + ad::scale(lv.value, cfg_.value_coef);
  return lv;
}

UpdateRecord Trainer::update(const RolloutBatch& batch) {
  const int n = agent_count();
  UpdateRecord rec;
  rec.step = step_;
  rec.episode = episode_;
  for (int i = 0; i < n; ++i) {
    Agent& a = *agents_[i];
    ad::Tape t;
    LossVars lv = build_losses(t, a, batch.agents[i], batch.returns);
    if (!finite(lv.total.scalar()) || !finite(lv.policy.scalar()) || !finite(lv.value.scalar()))
      throw ad::NumericError(describe_batch(batch, i, lv));
    a.optimizer().zero_grad();
    t.backward(lv.total);
    ad::clip_grad_norm(a.actor_parameters(), cfg_.clip_norm);
    ad::clip_grad_norm(a.critic_parameters(), cfg_.clip_norm);
    ad::clip_grad_norm(a.graph_parameters(), cfg_.clip_norm);
    if (!a.optimizer().step())
      throw ad::NumericError("non-finite gradient for agent " + std::to_string(i) + " at step " +
                             std::to_string(batch.start_step));
    rec.loss.policy += lv.policy.scalar() / n;
    rec.loss.value += lv.value.scalar() / n;
    rec.loss.elbo += lv.elbo.scalar() / n;
    rec.loss.prior += lv.prior.scalar() / n;
    rec.loss.mask_entropy += lv.mask_entropy.scalar() / n;
    rec.loss.total += lv.total.scalar() / n;
    rec.clamped += lv.clamped;
  }
  // Last completed episode, or the running one before the first completes.
  rec.mean_return = episode_log_.empty() ? episode_return_ : episode_log_.back().ret;
  return rec;
}

void Trainer::run(const UpdateFn& on_update, const EpisodeFn& on_episode) {
  while (episode_ < cfg_.episodes) {
    const std::size_t logged = episode_log_.size();
    const long long remaining = total_steps() - step_;
    RolloutBatch b = rollout(static_cast<int>(std::min<long long>(cfg_.batch, remaining)));
    if (on_episode)
      for (std::size_t k = logged; k < episode_log_.size(); ++k) on_episode(episode_log_[k]);
    UpdateRecord u = update(b);
    if (on_update) on_update(u);
  }
}

EvalResult Trainer::evaluate(std::uint64_t seed, int episodes) {
  const int n = agent_count();
  env::TrafficEnv env(env_config_);
  RuntimeState state;
  std::vector<AgentStreams> streams;
  for (int i = 0; i < n; ++i) streams.push_back(make_streams(seed, i, kEvalStreams));
  EvalResult result;
  long long kept = 0, slots = 0;
  for (int e = 0; e < episodes; ++e) {
    reset_runtime(state, env, episode_seed(seed, e, kEvalStreams));
    std::vector<std::vector<int>> actions;
    double ret = 0.0;
    bool done = false;
    while (!done) {
      Decision d = decide(state, streams, cfg_.prior.tau_end, true);
      const env::StepOutcome outcome = env.step(d.actions);
      for (int i = 0; i < n; ++i) {
        ret += outcome.rewards[i] / n;
        kept += static_cast<long long>(d.records[i].mask.sum());
        slots += d.records[i].mask.size();
      }
      actions.push_back(d.actions);
      state.h = std::move(d.h);
      state.c = std::move(d.c);
      state.pi = std::move(d.probs);
      state.obs = outcome.observations;
      done = outcome.done;
    }
    result.actions.push_back(std::move(actions));
    result.returns.push_back(ret);
  }
  result.retained_fraction = slots > 0 ? static_cast<double>(kept) / slots : 1.0;
  return result;
}

}  // namespace bayesg::train
