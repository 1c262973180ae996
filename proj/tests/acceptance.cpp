// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
//   bayesg_acceptance [--only N]
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "bayesg/config.hpp"
#include "bayesg/encoders.hpp"
#include "bayesg/exec_sim.hpp"
#include "bayesg/experiment.hpp"
#include "bayesg/latent_mask.hpp"
#include "bayesg/layers.hpp"
#include "bayesg/returns.hpp"
#include "bayesg/traffic_env.hpp"
#include "fd_ops.hpp"
#include "loss_fd.hpp"
#include "oracles.hpp"

using namespace bayesg;
using fdops::Matrix;
using fdops::Parameter;
using fdops::Rng;
using fdops::Tape;
using fdops::Var;
namespace a = bayesg::ad;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Accumulates sub-checks; the first failure is kept as the detail.
struct Checks {
  Outcome out;
  std::ostringstream notes;
  void expect(bool ok, const std::string& what) {
    if (!ok && out.pass) {
      out.pass = false;
      out.detail = what;
    }
  }
  Outcome done() {
    if (out.pass) out.detail = notes.str();
    return out;
  }
};

std::string fmt(double x, int prec = 3) {
  std::ostringstream s;
  s << std::setprecision(prec) << x;
  return s.str();
}

Matrix u(int r, int c, double lo, double hi, Rng& g) { return oracle::uniform(r, c, lo, hi, g); }

harness::ExperimentConfig load(const std::string& name) {
  return harness::load_config_file((fs::path(BAYESG_CONFIG_DIR) / name).string());
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("bayesg_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// 1 ---------------------------------------------------------------------------

Outcome elbo_identity() {
  Checks c;
  Rng rng(1001);
  std::uniform_real_distribution<double> lam_d(0.05, 0.95), phi_d(-8, 8);
  double worst = 0, worst_residual_fit = 0, max_residual = 0;
  for (int k = 0; k < 100; ++k) {
    const double lam = lam_d(rng);
    Eigen::RowVectorXd phi(1);
    phi(0) = phi_d(rng);
    const double s = 1.0 / (1.0 + std::exp(-phi(0)));
    const double reg = mask::elbo_regularizer(phi, lam);
    const double direct = (lam + s) * std::log(s) + (2 - lam - s) * std::log(1 - s);
    const double regrouped = mask::regrouped_prior_term(phi, lam) - mask::mask_entropy(phi);
    worst = std::max({worst, std::abs(reg - direct), std::abs(reg - regrouped)});
    // The sum E[log p] + H differs from the combined form by a closed-form residual.
    const double h = -(s * std::log(s) + (1 - s) * std::log(1 - s));
    const double residual = lam * std::log(s) + (1 - lam) * std::log(1 - s) - s * std::log(lam) -
                            (1 - s) * std::log(1 - lam) - 2 * h;
    const double other = mask::prior_log_prob_expectation(phi, lam) + mask::mask_entropy(phi);
    worst_residual_fit = std::max(worst_residual_fit, std::abs(reg - other - residual));
    max_residual = std::max(max_residual, std::abs(reg - other));
  }
  c.expect(worst < 1e-10, "regularizer vs regrouped form differs by " + fmt(worst));
  c.expect(worst_residual_fit < 1e-10, "residual formula off by " + fmt(worst_residual_fit));
  c.notes << "combined vs regrouped prior - entropy, max deviation " << fmt(worst) << "; vs E[log p]+H the forms differ by "
          << "l*log s+(1-l)*log(1-s)-s*log l-(1-s)*log(1-l)-2H (up to " << fmt(max_residual)
          << ", formula fit " << fmt(worst_residual_fit) << ")";
  return c.done();
}

// 2 ---------------------------------------------------------------------------

Outcome gradient_suite() {
  using fdops::dim;
  constexpr int kDraws = 100;
  Checks c;
  double worst_all = 0;
  int checked = 0;
  auto record = [&](const std::string& name, const fdops::OpResult& r) {
    c.expect(r.worst < 1e-4 && r.checked >= kDraws, name + " rel err " + fmt(r.worst) + " at " + r.where);
    worst_all = std::max(worst_all, r.worst);
    checked += r.checked;
  };
  auto op = [&](const std::string& name, const fdops::Inputs& in, const fdops::Build& b) {
    static std::uint64_t seed = 2000;
    record(name, fdops::check_op(in, b, kDraws, ++seed));
  };
  auto one = [](double lo, double hi) {
    return [lo, hi](Rng& g) { return std::vector<Matrix>{u(dim(g), dim(g), lo, hi, g)}; };
  };
  auto row = [](Rng& g) { return std::vector<Matrix>{u(dim(g), dim(g, 2, 6), -3, 3, g)}; };

  op("sigmoid", one(-4, 4), [](Tape&, auto& x) { return a::sigmoid(x[0]); });
  op("tanh", one(-3, 3), [](Tape&, auto& x) { return a::tanh(x[0]); });
  op("exp", one(-2, 2), [](Tape&, auto& x) { return a::exp(x[0]); });
  op("log", one(0.3, 3), [](Tape&, auto& x) { return a::log(x[0]); });
  op("log_sigmoid", one(-6, 6), [](Tape&, auto& x) { return a::log_sigmoid(x[0]); });
  op("square", one(-2, 2), [](Tape&, auto& x) { return a::square(x[0]); });
  op("rsqrt", one(0.5, 3), [](Tape&, auto& x) { return a::rsqrt(x[0]); });
  op("scale", one(-2, 2), [](Tape&, auto& x) { return a::scale(x[0], 0.7); });
  op("add_scalar", one(-2, 2), [](Tape&, auto& x) { return a::add_scalar(x[0], -0.4); });
  op("transpose", one(-1, 1), [](Tape&, auto& x) { return a::transpose(x[0]); });
  op("relu", [](Rng& g) { return std::vector<Matrix>{fdops::off_kink(dim(g), dim(g), g)}; },
     [](Tape&, auto& x) { return a::relu(x[0]); });
  for (int mode = 0; mode < 3; ++mode) {
    auto two = [mode](Rng& g) {
      const int r = dim(g), cols = dim(g);
      return std::vector<Matrix>{u(r, cols, -2, 2, g), u(mode == 0 ? r : 1, mode == 2 ? 1 : cols, -2, 2, g)};
    };
    op("add", two, [](Tape&, auto& x) { return a::add(x[0], x[1]); });
    op("sub", two, [](Tape&, auto& x) { return a::sub(x[0], x[1]); });
    op("mul", two, [](Tape&, auto& x) { return a::mul(x[0], x[1]); });
  }
  op("matmul",
     [](Rng& g) {
       const int r = dim(g), k = dim(g), cols = dim(g);
       return std::vector<Matrix>{u(r, k, -1, 1, g), u(k, cols, -1, 1, g)};
     },
     [](Tape&, auto& x) { return a::matmul(x[0], x[1]); });
  op("softmax", row, [](Tape&, auto& x) { return a::softmax(x[0]); });
  op("log_softmax", row, [](Tape&, auto& x) { return a::log_softmax(x[0]); });
  op("mean_rows", row, [](Tape&, auto& x) { return a::mean_rows(x[0]); });
  op("sum_cols", row, [](Tape&, auto& x) { return a::sum_cols(x[0]); });
  op("sum", row, [](Tape&, auto& x) { return a::sum(x[0]); });
  op("mean", row, [](Tape&, auto& x) { return a::mean(x[0]); });
  op("concat",
     [](Rng& g) {
       const int r = dim(g);
       return std::vector<Matrix>{u(r, dim(g), -1, 1, g), u(r, dim(g), -1, 1, g)};
     },
     [](Tape&, auto& x) { return a::concat({x[0], x[1]}); });
  op("concat_rows",
     [](Rng& g) {
       const int cols = dim(g);
       return std::vector<Matrix>{u(dim(g), cols, -1, 1, g), u(dim(g), cols, -1, 1, g)};
     },
     [](Tape&, auto& x) { return a::concat_rows({x[0], x[1]}); });
  const std::vector<std::pair<int, int>> pairs = {{0, 1}, {0, 2}, {1, 2}};
  op("scatter_symmetric", [](Rng& g) { return std::vector<Matrix>{u(1, 3, -1, 1, g)}; },
     [&](Tape&, auto& x) { return a::scatter_symmetric(x[0], 3, pairs); });

  op("normalized_adjacency",
     [](Rng& g) {
       const int n = dim(g, 1, 5);
       return std::vector<Matrix>{u(n, n, 0, 1, g)};
     },
     [](Tape&, auto& x) { return nn::normalized_adjacency(x[0]); });
  op("gcn_layer",
     [](Rng& g) {
       const int n = dim(g, 1, 5), in = dim(g), out = dim(g);
       return std::vector<Matrix>{u(n, in, -1, 1, g), u(n, n, 0, 1, g), u(in, out, -1, 1, g),
                                  u(1, out, -0.5, 0.5, g)};
     },
     [](Tape&, auto& x) { return nn::gcn_layer(x[0], x[1], x[2], x[3]); });
  op("lstm_step",
     [](Rng& g) {
       const int in = dim(g), hidden = dim(g);
       return std::vector<Matrix>{u(1, hidden, -1, 1, g), u(1, hidden, -1, 1, g), u(1, in, -1, 1, g),
                                  u(in, 4 * hidden, -1, 1, g), u(hidden, 4 * hidden, -1, 1, g),
                                  u(1, 4 * hidden, -1, 1, g)};
     },
     [](Tape&, auto& x) {
       auto s = nn::lstm_step(x[0], x[1], x[2], x[3], x[4], x[5]);
       return a::concat({s.h, s.c});
     });

  record("actor head", fdops::check_module(
                           [](Rng& g) {
                             const int hidden = dim(g), actions = dim(g, 2, 5);
                             auto head = std::make_shared<nn::ActorHead>("actor", hidden, actions, g);
                             std::vector<Parameter*> ps;
                             head->collect(ps);
                             const Matrix h = u(1, hidden, -1, 1, g);
                             std::function<Var(Tape&)> build = [head, h](Tape& t) {
                               Var lp = a::log_softmax(head->logits(t, t.constant(h)));
                               return a::concat({lp, nn::entropy_from_log_probs(lp)});
                             };
                             return std::pair{ps, build};
                           },
                           kDraws, 2101));
  record("critic head", fdops::check_module(
                            [](Rng& g) {
                              const int hidden = dim(g), feats = dim(g, 0, 6), width = dim(g, 2, 6);
                              auto head = std::make_shared<nn::CriticHead>("critic", hidden, feats, width, g);
                              std::vector<Parameter*> ps;
                              head->collect(ps);
                              const Matrix h = u(1, hidden, -1, 1, g), na = u(1, feats, 0, 1, g);
                              std::function<Var(Tape&)> build = [head, h, na](Tape& t) {
                                return head->value(t, t.constant(h), t.constant(na));
                              };
                              return std::pair{ps, build};
                            },
                            kDraws, 2102));

  Rng lam_rng(2103);
  for (const char* name : {"elbo_regularizer", "prior_log_prob_expectation", "mask_entropy"}) {
    const double lam = std::uniform_real_distribution<double>(0.05, 0.95)(lam_rng);
    const std::string n = name;
    op(n, [](Rng& g) { return std::vector<Matrix>{u(1, dim(g, 1, 6), -4, 4, g)}; },
       [n, lam](Tape&, auto& x) {
         if (n == "elbo_regularizer") return mask::elbo_regularizer(x[0], lam);
         if (n == "prior_log_prob_expectation") return mask::prior_log_prob_expectation(x[0], lam);
         return mask::mask_entropy(x[0]);
       });
  }

  // Full per-agent loss on the two-agent line: 50 seeds x 2 agents.
  oracle::FdReport loss;
  int draws = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed)
    for (int i = 0; i < 2; ++i, ++draws) {
      const auto r = lossfd::total_loss_fd(seed, i, 6);
      loss.checked += r.checked;
      if (r.worst > loss.worst) {
        loss.worst = r.worst;
        loss.where = "seed " + std::to_string(seed) + " agent " + std::to_string(i) + ": " + r.where;
      }
    }
  c.expect(draws >= kDraws && loss.worst < 1e-4, "total loss rel err " + fmt(loss.worst) + " at " + loss.where);
  worst_all = std::max(worst_all, loss.worst);
  checked += loss.checked;
  c.notes << checked << " coordinates, worst relative error " << fmt(worst_all);
  return c.done();
}

// 3 ---------------------------------------------------------------------------

Outcome sampler_statistics() {
  Checks c;
  Rng rng(3001);
  const int n = 10000;
  for (double phi : {-2.0, 0.0, 1.386}) {
    const Eigen::RowVectorXd logits = Eigen::RowVectorXd::Constant(1, phi);
    int kept = 0, crossed = 0;
    for (int k = 0; k < n; ++k) {
      kept += mask::sample_mask(logits, 0.5, rng, true).values(0) == 1.0;
      crossed += mask::sample_mask(logits, 1.0, rng, false).values(0) > 0.5;
    }
    const double p = 1.0 / (1.0 + std::exp(-phi));
    const double bound = oracle::binomial_halfwidth_99(p, n);
    const double hard = kept / double(n), soft = crossed / double(n);
    c.expect(std::abs(hard - p) <= bound, "phi " + fmt(phi) + ": hard frequency " + fmt(hard, 4) +
                                              " vs " + fmt(p, 4) + " +- " + fmt(bound));
    c.expect(std::abs(soft - p) <= 0.02, "phi " + fmt(phi) + ": relaxed crossing " + fmt(soft, 4));
    c.notes << "phi " << phi << ": hard " << fmt(hard, 4) << " relaxed " << fmt(soft, 4) << " sigma "
            << fmt(p, 4) << "; ";
  }
  return c.done();
}

// 4 ---------------------------------------------------------------------------

Outcome return_oracle() {
  Checks c;
  Rng rng(4001);
  std::uniform_real_distribution<double> unit(0.01, 1.0);
  double worst = 0;
  for (int inst = 0; inst < 1000; ++inst) {
    const int n = 1 + static_cast<int>(rng() % 5);
    const auto g = oracle::random_graph(n, 0.5, rng);
    const int batch = 1 + static_cast<int>(rng() % 6);
    const int horizon = 1 + static_cast<int>(rng() % 4);
    const double gamma = unit(rng), alpha = unit(rng);
    train::ReturnInputs in;
    in.rewards = u(batch, n, -3, 1, rng);
    in.values = u(batch, n, -5, 5, rng);
    in.bootstrap = u(1, n, -5, 5, rng);
    for (int s = 0; s < batch; ++s) in.dones.push_back(rng() % 5 == 0);
    for (int i = 0; i < n; ++i) {
      const auto hops = graph::hop_distances(graph::ego_graph(g, i));
      for (int tau = 0; tau < batch; ++tau) {
        const double expect = oracle::brute_force_return(in, g, i, tau, horizon, gamma, alpha);
        worst = std::max(worst, std::abs(train::spatially_discounted_return(in, hops, tau, horizon, gamma, alpha) - expect));
        worst = std::max(worst, std::abs(train::advantage(in, hops, tau, horizon, gamma, alpha) -
                                         (expect - in.values(tau, i))));
      }
    }
  }
  c.expect(worst <= 1e-12, "max deviation " + fmt(worst));
  c.notes << "1000 instances, max deviation " << fmt(worst);
  return c.done();
}

// 5 ---------------------------------------------------------------------------

Outcome environment_laws() {
  Checks c;
  env::EnvConfig cfg;
  cfg.graph = graph::make_grid(3, 3);
  cfg.arrival_rate = 0.8;
  cfg.episode_length = 60;
  cfg.initial_queue_max = 8;
  cfg.capacity = 15;
  Rng rng(5001);
  auto actions = [&](const env::TrafficEnv& e) {
    std::vector<int> act(e.agent_count());
    for (auto& x : act) x = static_cast<int>(rng() % e.max_actions());
    return act;
  };

  env::TrafficEnv e(cfg);
  e.reset(1);
  long long violations = 0;
  for (int s = 0; s < 10000; ++s) {
    const int before = e.total_vehicles();
    const auto out = e.step(actions(e));
    violations += e.total_vehicles() != before + out.arrivals - out.exits;
    if (out.done) e.reset(rng());
  }
  c.expect(violations == 0, std::to_string(violations) + " conservation violations");

  e.reset(2);
  int probes = 0, leaks = 0;
  for (int s = 0; s < 30; ++s) {
    const auto act = actions(e);
    for (int i = 0; i < 9; ++i) {
      const auto d = oracle::bfs(cfg.graph, i);
      for (int k = 0; k < 9; ++k)
        if (d[k] >= 2) {
          ++probes;
          leaks += !env::locality_probe(e, act, i, k);
        }
    }
    e.step(act);
  }
  c.expect(leaks == 0, std::to_string(leaks) + " of " + std::to_string(probes) + " locality probes failed");

  auto trace = [&](std::uint64_t seed) {
    env::TrafficEnv t(cfg);
    Rng local(9);
    std::vector<Eigen::RowVectorXd> obs = t.reset(seed);
    std::vector<double> rewards;
    for (int s = 0; s < 200; ++s) {
      std::vector<int> act(t.agent_count());
      for (auto& x : act) x = static_cast<int>(local() % t.max_actions());
      const auto out = t.step(act);
      obs.insert(obs.end(), out.observations.begin(), out.observations.end());
      rewards.insert(rewards.end(), out.rewards.begin(), out.rewards.end());
      if (out.done) t.reset(seed + s);
    }
    return std::pair{obs, rewards};
  };
  c.expect(trace(11) == trace(11), "same seed gave different trajectories");
  c.expect(trace(11) != trace(12), "different seeds gave identical trajectories");
  c.notes << "10000 steps conserved, " << probes << " locality probes, determinism bit-exact";
  return c.done();
}

// 6 ---------------------------------------------------------------------------

env::EnvConfig small_grid(int r, int cols, int T) {
  env::EnvConfig e;
  e.graph = graph::make_grid(r, cols);
  e.episode_length = T;
  e.reward_scale = 20.0;
  e.initial_queue_max = 4;
  return e;
}

train::TrainConfig small_train(std::uint64_t seed) {
  train::TrainConfig t;
  t.seed = seed;
  t.hidden = 8;
  t.embed = 6;
  t.critic_width = 8;
  t.batch = 10;
  t.episodes = 1;
  return t;
}

std::vector<std::vector<int>> training_actions(train::Trainer& tr) {
  std::vector<std::vector<int>> out;
  while (tr.episode() < tr.config().episodes) {
    const auto b = tr.rollout(tr.config().batch);
    for (int s = 0; s < b.size(); ++s) {
      std::vector<int> row;
      for (const auto& ag : b.agents) row.push_back(ag.steps[s].action);
      out.push_back(row);
    }
    tr.update(b);
  }
  return out;
}

Outcome mask_degeneracy() {
  Checks c;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto none = small_train(seed);
    none.mask_mode = train::MaskMode::none;
    auto sat = small_train(seed);
    sat.logit_mode = train::LogitMode::free;
    sat.logit_init = 50.0;
    train::Trainer x(small_grid(3, 3, 40), none), y(small_grid(3, 3, 40), sat);
    const auto ax = training_actions(x), ay = training_actions(y);
    c.expect(ax == ay, "seed " + std::to_string(seed) + ": training actions differ");
    c.expect(x.evaluate(seed, 1).actions == y.evaluate(seed, 1).actions,
             "seed " + std::to_string(seed) + ": evaluation actions differ");
  }
  c.notes << "3 seeds, one training and one evaluation episode each on 3x3";
  return c.done();
}

// 7 ---------------------------------------------------------------------------

Outcome ablation_ordering() {
  Checks c;
  const harness::ExperimentConfig cfg = load("grid3x3.toml");
  c.expect(cfg.seeds.size() == 5, "config must list 5 seeds");
  c.expect(cfg.train.episodes == 300, "config must train 300 episodes");
  c.expect(cfg.env.graph == graph::make_grid(3, 3), "config must use the 3x3 grid");
  std::map<train::MaskMode, std::vector<double>> finals;
  for (auto mode : {train::MaskMode::learned, train::MaskMode::none, train::MaskMode::random}) {
    for (auto seed : cfg.seeds) {
      auto t = cfg.train;
      t.mask_mode = mode;
      t.seed = seed;
      train::Trainer tr(cfg.env, t);
      tr.run();
      finals[mode].push_back(harness::final_return(tr.episodes()));
    }
  }
  const auto& l = finals[train::MaskMode::learned];
  const auto& n = finals[train::MaskMode::none];
  const auto& r = finals[train::MaskMode::random];
  const double ml = oracle::mean(l), mn = oracle::mean(n), mr = oracle::mean(r);
  const double sl = oracle::sample_std(l), sn = oracle::sample_std(n), sr = oracle::sample_std(r);
  const double pooled_ln = std::sqrt((sl * sl + sn * sn) / 2), pooled_lr = std::sqrt((sl * sl + sr * sr) / 2);
  auto list = [](const std::vector<double>& v) {
    std::string out;
    for (double x : v) out += (out.empty() ? "" : " ") + fmt(x, 4);
    return out;
  };
  std::ostringstream summary;
  summary << "learned " << fmt(ml, 4) << " (sd " << fmt(sl) << "), none " << fmt(mn, 4) << " (sd " << fmt(sn)
          << "), random " << fmt(mr, 4) << " (sd " << fmt(sr) << "); per seed learned [" << list(l)
          << "] none [" << list(n) << "] random [" << list(r) << "]";
  c.expect(ml >= mn - pooled_ln, "learned below none - 1 pooled sd: " + summary.str());
  c.expect(ml - mr >= pooled_lr, "learned not 1 pooled sd above random: " + summary.str());
  c.notes << summary.str();
  return c.done();
}

// 8 ---------------------------------------------------------------------------

Outcome learning_sanity() {
  Checks c;
  harness::ExperimentConfig cfg = load("grid5x5.toml");
  cfg.output_dir = scratch("learning").string();
  cfg.plot = false;
  c.expect(cfg.seeds.size() == 3, "config must list 3 seeds");
  c.expect(cfg.train.episodes <= 500, "config trains more than 500 episodes");
  c.expect(cfg.env.graph == graph::make_grid(5, 5), "config must use the 5x5 grid");
  c.expect(cfg.train.method == nn::Method::bayesg, "config must train BayesG");
  const auto result = harness::run_experiment(cfg);
  c.expect(result.all_ok(), "a seed failed");
  if (!result.all_ok()) return c.done();

  const int E = cfg.train.episodes;
  std::vector<double> curve(E, 0.0);
  for (const auto& run : result.runs)
    for (const auto& e : run.episodes) curve.at(e.episode) += e.ret / result.runs.size();
  double first = 0, last = 0;
  for (int k = 0; k < 10; ++k) {
    first += curve[k] / 10;
    last += curve[E - 10 + k] / 10;
  }
  const double gain = (last - first) / std::abs(first);

  int bad = 0, rows = 0;
  for (const auto& run : result.runs) {
    std::ifstream in(run.metrics_path);
    std::string line;
    std::getline(in, line);
    c.expect(line == harness::kMetricsHeader, "metrics header: " + line);
    while (std::getline(in, line)) {
      std::stringstream ls(line);
      std::string cell;
      for (int col = 0; std::getline(ls, cell, ','); ++col)
        if (col >= 3 && col <= 8 && !std::isfinite(std::stod(cell))) ++bad;
      ++rows;
    }
  }
  c.expect(bad == 0, std::to_string(bad) + " non-finite loss cells");
  c.expect(rows > 0, "no metrics rows");
  c.expect(gain >= 0.3, "first-10 mean " + fmt(first, 4) + ", last-10 mean " + fmt(last, 4) + ", improvement " +
                            fmt(100 * gain) + "%");
  c.notes << "first-10 " << fmt(first, 4) << ", last-10 " << fmt(last, 4) << ", improvement " << fmt(100 * gain)
          << "%; " << rows << " metric rows finite";
  return c.done();
}

// 9 ---------------------------------------------------------------------------

Outcome execution_equivalence() {
  Checks c;
  for (auto mode : {train::MaskMode::learned, train::MaskMode::none, train::MaskMode::random}) {
    auto t = small_train(9);
    t.mask_mode = mode;
    train::Trainer tr(small_grid(3, 3, 30), t);
    tr.run();
    for (std::uint64_t seed : {21u, 22u, 23u}) {
      const auto ev = tr.evaluate(seed, 2);
      const auto ex = exec::run_execution(tr, {}, {}, seed, 2);
      c.expect(ex.actions == ev.actions, train::to_string(mode) + " seed " + std::to_string(seed) +
                                             ": ideal-channel actions differ from evaluation");
    }
    exec::ChannelConfig drop;
    drop.drop = 1.0;
    const auto ex = exec::run_execution(tr, drop, {}, 31, 2);
    c.expect(ex.messages_delivered == 0 && ex.stale_reads == ex.messages_sent && ex.messages_sent > 0,
             "drop 1: deliveries or cache reads inconsistent");
    for (double x : ex.returns) c.expect(std::isfinite(x), "drop 1: non-finite return");
  }
  c.notes << "3 mask modes x 3 seeds exact; drop 1 served every read from the zero cache";
  return c.done();
}

// 10 --------------------------------------------------------------------------

Outcome graph_accounting() {
  Checks c;
  const auto g = graph::make_grid(5, 5);
  c.expect(g.node_count() == 25 && g.edge_count() == 40,
           "5x5 grid: " + std::to_string(g.node_count()) + " nodes, " + std::to_string(g.edge_count()) + " edges");
  Rng rng(10001);
  int mismatches = 0;
  for (int k = 0; k < 1000; ++k) {
    const auto r = oracle::random_graph(1 + static_cast<int>(rng() % 12), 0.3, rng);
    long long sum = 0;
    for (int i = 0; i < r.node_count(); ++i) sum += r.degree(i);
    mismatches += sum != 2 * static_cast<long long>(r.edge_count());
  }
  c.expect(mismatches == 0, std::to_string(mismatches) + " degree-sum mismatches");

  auto t = small_train(4);
  train::Trainer tr(small_grid(3, 3, 30), t);
  tr.run();
  const auto latent = harness::export_latent_graph(tr, tr.env().graph(), 10, 4);
  const Eigen::MatrixXd adj = tr.env().graph().adjacency_matrix();
  int support = 0;
  for (int i = 0; i < adj.rows(); ++i)
    for (int j = 0; j < adj.cols(); ++j)
      if (i != j) support += (latent.retention(i, j) != 0.0) != (adj(i, j) != 0.0);
  c.expect(support == 0, std::to_string(support) + " entries where latent support differs from adjacency");
  c.notes << "25 nodes/40 edges, 1000 degree sums, latent support equals adjacency";
  return c.done();
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // 0 = no runtime limit
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  int only = 0;
  app.add_option("--only", only, "Run a single criterion (1-10)");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> all = {
      {1, "ELBO identity", 1, elbo_identity},
      {2, "gradient suite", 60, gradient_suite},
      {3, "sampler statistics", 5, sampler_statistics},
      {4, "return/advantage oracle", 10, return_oracle},
      {5, "environment laws", 0, environment_laws},
      {6, "mask degeneracy", 0, mask_degeneracy},
      {7, "ablation ordering", 1800, ablation_ordering},
      {8, "learning sanity", 3600, learning_sanity},
      {9, "execution equivalence", 0, execution_equivalence},
      {10, "graph accounting", 0, graph_accounting},
  };
  int failed = 0;
  for (const auto& cr : all) {
    if (only && cr.id != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = cr.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (o.pass && cr.budget_s > 0 && secs > cr.budget_s) {
      o.pass = false;
      o.detail = "took " + fmt(secs) + " s, limit " + fmt(cr.budget_s) + " s; " + o.detail;
    }
    failed += !o.pass;
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << cr.id << " " << cr.name << " (" << fmt(secs) << " s): "
              << o.detail << std::endl;
  }
  return failed ? 1 : 0;
}
