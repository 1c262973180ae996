#include "bayesg/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "bayesg/checkpoint.hpp"

namespace bayesg::harness {

namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

double sample_std(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

}  // namespace

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

std::string metrics_row(const train::UpdateRecord& u, double wall_clock) {
  const auto& l = u.loss;
  return std::to_string(u.step) + "," + std::to_string(u.episode) + "," + num(u.mean_return) + "," +
         num(l.policy) + "," + num(l.value) + "," + num(l.elbo) + "," + num(l.prior) + "," +
         num(l.mask_entropy) + "," + num(l.total) + "," + num(wall_clock);
}

bool ExperimentResult::all_ok() const {
  return std::all_of(runs.begin(), runs.end(), [](const SeedRun& r) { return r.ok; });
}

std::string resolve_output_dir(const ExperimentConfig& config) {
  if (const char* env = std::getenv("BAYESG_OUT"); env && *env) return env;
  return config.output_dir;
}

SeedRun train_seed(const ExperimentConfig& config, std::uint64_t seed, const std::string& dir,
                   const std::string& tag, std::ostream* log) {
  SeedRun run;
  run.seed = seed;
  fs::create_directories(dir);
  run.metrics_path = (fs::path(dir) / ("metrics_" + tag + ".csv")).string();
  run.returns_path = (fs::path(dir) / ("returns_" + tag + ".csv")).string();
  run.checkpoint_path = (fs::path(dir) / ("checkpoint_" + tag + ".bin")).string();

  ExperimentConfig single = config;
  single.seeds = {seed};
  single.train.seed = seed;
  const std::string text = serialize_config(single);
  const std::uint64_t hash = config_hash(single);

  std::ofstream metrics(run.metrics_path);
  std::ofstream returns(run.returns_path);
  metrics << kMetricsHeader << "\n";
  returns << kReturnsHeader << "\n";
  const auto start = std::chrono::steady_clock::now();
  try {
    train::Trainer trainer(single.env, single.train);
    long long updates = 0;
    trainer.run(
        [&](const train::UpdateRecord& u) {
          const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
          metrics << metrics_row(u, wall) << "\n";
          ++updates;
          if (config.checkpoint_every > 0 && updates % config.checkpoint_every == 0)
            save_checkpoint(run.checkpoint_path, capture(trainer, text, hash));
        },
        [&](const train::EpisodeRecord& e) {
          returns << e.episode << "," << e.step << "," << num(e.ret) << "\n";
          run.episodes.push_back(e);
          if (log && (e.episode + 1) % 50 == 0)
            *log << "  seed " << seed << " episode " << e.episode + 1 << " return " << e.ret << "\n";
        });
    save_checkpoint(run.checkpoint_path, capture(trainer, text, hash));
  } catch (const ad::NumericError& e) {
    run.ok = false;
    run.numeric_failure = true;
    run.error = e.what();
  } catch (const std::exception& e) {
    run.ok = false;
    run.error = e.what();
  }
  if (log && !run.ok) *log << "  seed " << seed << " failed: " << run.error << "\n";
  return run;
}

std::string summary_csv(const std::vector<SeedRun>& runs) {
  std::string out = std::string(kSummaryHeader) + "\n";
  std::size_t episodes = 0;
  for (const auto& r : runs)
    if (r.ok) episodes = std::max(episodes, r.episodes.size());
  for (std::size_t e = 0; e < episodes; ++e) {
    std::vector<double> xs;
    for (const auto& r : runs)
      if (r.ok && e < r.episodes.size()) xs.push_back(r.episodes[e].ret);
    out += std::to_string(e) + "," + num(mean_of(xs)) + "," + num(sample_std(xs)) + "," +
           std::to_string(xs.size()) + "\n";
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream* log) {
  ExperimentResult result;
  result.directory = resolve_output_dir(config);
  fs::create_directories(result.directory);
  write_text((fs::path(result.directory) / "config.toml").string(), serialize_config(config));
  for (std::uint64_t seed : config.seeds) {
    if (log) *log << "training seed " << seed << "\n";
    result.runs.push_back(train_seed(config, seed, result.directory, "seed" + std::to_string(seed), log));
  }
  result.summary_path = (fs::path(result.directory) / "summary.csv").string();
  write_text(result.summary_path, summary_csv(result.runs));
  if (config.plot)
    write_text((fs::path(result.directory) / "returns.svg").string(), returns_svg(result.runs));
  return result;
}

double final_return(const std::vector<train::EpisodeRecord>& episodes, double fraction) {
  if (episodes.empty()) return 0.0;
  const std::size_t n = episodes.size();
  const std::size_t tail = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * n)));
  double s = 0.0;
  for (std::size_t k = n - tail; k < n; ++k) s += episodes[k].ret;
  return s / static_cast<double>(tail);
}

std::vector<AblationRow> ablation_suite(const ExperimentConfig& config, std::ostream* log) {
  const std::string root = (fs::path(resolve_output_dir(config)) / "ablation").string();
  auto run_variant = [&](const std::string& group, const std::string& variant,
                         const ExperimentConfig& c) {
    AblationRow row{group, variant, {}, 0.0, 0.0};
    for (std::uint64_t seed : c.seeds) {
      if (log) *log << group << "=" << variant << " seed " << seed << "\n";
      SeedRun r = train_seed(c, seed, (fs::path(root) / (group + "_" + variant)).string(),
                             "seed" + std::to_string(seed), nullptr);
      if (r.ok) row.per_seed.push_back(final_return(r.episodes));
      else if (log) *log << "  failed: " << r.error << "\n";
    }
    row.mean = mean_of(row.per_seed);
    row.std = sample_std(row.per_seed);
    return row;
  };

  std::vector<AblationRow> rows;
  for (const char* mode : {"learned", "none", "random"}) {
    ExperimentConfig c = config;
    c.train.method = nn::Method::bayesg;
    c.train.mask_mode = train::mask_mode_from_string(mode);
    c.train.mask_features = {};
    rows.push_back(run_variant("mask", mode, c));
  }
  for (const char* feat : {"state", "traj", "policy", "all"}) {
    ExperimentConfig c = config;
    c.train.method = nn::Method::bayesg;
    c.train.mask_mode = train::MaskMode::learned;
    c.train.mask_features = mask::MaskFeatures::parse(feat);
    if (std::string(feat) == "all") {
      AblationRow all = rows.front();  // identical to the learned-mask row
      all.group = "features";
      all.variant = "all";
      rows.push_back(all);
      continue;
    }
    rows.push_back(run_variant("features", feat, c));
  }
  fs::create_directories(root);
  write_text((fs::path(root) / "ablation.csv").string(), ablation_csv(rows));
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "group,variant,mean_final_return,std_final_return,seeds\n";
  for (const auto& r : rows)
    out += r.group + "," + r.variant + "," + num(r.mean) + "," + num(r.std) + "," +
           std::to_string(r.per_seed.size()) + "\n";
  return out;
}

LatentGraph export_latent_graph(train::Trainer& trainer, const graph::EnvGraph& env_graph,
                                int snapshot_step, std::uint64_t seed) {
  const auto& g = trainer.env().graph();
  if (!(g == env_graph))
    throw std::invalid_argument("environment graph does not match the checkpoint's graph (" +
                                std::to_string(env_graph.node_count()) + " vs " +
                                std::to_string(g.node_count()) + " nodes)");
  if (snapshot_step < 0) throw std::invalid_argument("snapshot step must be non-negative");
  const int n = trainer.agent_count();
  const auto& cfg = trainer.config();

  env::TrafficEnv env(trainer.env_config());
  train::RuntimeState state;
  state.obs = env.reset(train::episode_seed(seed, 0, train::kEvalStreams));
  state.h.assign(n, Eigen::RowVectorXd::Zero(cfg.hidden));
  state.c = state.h;
  state.pi.assign(n, Eigen::RowVectorXd::Zero(env.max_actions()));
  std::vector<train::AgentStreams> streams;
  for (int i = 0; i < n; ++i) streams.push_back(train::make_streams(seed, i, train::kEvalStreams));
  for (int s = 0; s < snapshot_step; ++s) {
    train::Decision d = trainer.decide(state, streams, cfg.prior.tau_end, true);
    const auto outcome = env.step(d.actions);
    state.h = std::move(d.h);
    state.c = std::move(d.c);
    state.pi = std::move(d.probs);
    state.obs = outcome.observations;
    if (outcome.done) break;
  }

  LatentGraph out;
  out.retention = Eigen::MatrixXd::Identity(n, n);
  for (int i = 0; i < n; ++i) {
    train::Agent& a = trainer.agent(i);
    const auto& ego = a.ego();
    Eigen::RowVectorXd phi;
    if (a.learns_mask()) phi = a.edge_logits(train::gather_input(a, state), state.h[i]);
    for (int e = 0; e < ego.edge_count(); ++e) {
      auto [u, v] = ego.edges[e];
      if (u != 0) continue;
      double p = 1.0;
      if (a.learns_mask())
        p = mask::sigmoid(phi(e));
      else if (cfg.method == nn::Method::bayesg && cfg.mask_mode == train::MaskMode::random)
        p = 0.5;
      out.retention(i, ego.members[v]) = p;
    }
  }
  for (int i = 0; i < n; ++i)
    for (int j : g.neighbors(i)) out.edges.push_back({i, j, out.retention(i, j)});
  return out;
}

std::string latent_matrix_csv(const LatentGraph& g) {
  std::string out;
  for (Eigen::Index i = 0; i < g.retention.rows(); ++i) {
    for (Eigen::Index j = 0; j < g.retention.cols(); ++j)
      out += (j ? "," : "") + num(g.retention(i, j));
    out += "\n";
  }
  return out;
}

std::string latent_edges_csv(const LatentGraph& g) {
  std::string out = "from,to,weight\n";
  for (const auto& e : g.edges)
    out += std::to_string(e.from) + "," + std::to_string(e.to) + "," + num(e.weight) + "\n";
  return out;
}

std::string returns_svg(const std::vector<SeedRun>& runs) {
  const double width = 640, height = 360, left = 60, right = 20, top = 20, bottom = 40;
  std::size_t episodes = 0;
  double lo = 0.0, hi = 0.0;
  bool any = false;
  for (const auto& r : runs) {
    if (!r.ok) continue;
    episodes = std::max(episodes, r.episodes.size());
    for (const auto& e : r.episodes) {
      lo = any ? std::min(lo, e.ret) : e.ret;
      hi = any ? std::max(hi, e.ret) : e.ret;
      any = true;
    }
  }
  if (hi <= lo) hi = lo + 1.0;
  auto x = [&](double e) {
    return left + (episodes > 1 ? e / static_cast<double>(episodes - 1) : 0.0) * (width - left - right);
  };
  auto y = [&](double v) { return top + (hi - v) / (hi - lo) * (height - top - bottom); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << height - bottom << "\" x2=\"" << width - right
      << "\" y2=\"" << height - bottom << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
      << height - bottom << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << (width / 2) << "\" y=\"" << height - 8 << "\" text-anchor=\"middle\">episode</text>\n";
  svg << "<text x=\"14\" y=\"" << height / 2 << "\" transform=\"rotate(-90 14 " << height / 2
      << ")\" text-anchor=\"middle\">return</text>\n";
  svg << "<text x=\"" << left - 4 << "\" y=\"" << y(hi) + 4 << "\" text-anchor=\"end\">" << num(hi) << "</text>\n";
  svg << "<text x=\"" << left - 4 << "\" y=\"" << y(lo) << "\" text-anchor=\"end\">" << num(lo) << "</text>\n";
  for (const auto& r : runs) {
    if (!r.ok || r.episodes.empty()) continue;
    svg << "<polyline fill=\"none\" stroke=\"#9ab\" stroke-width=\"1\" points=\"";
    for (std::size_t e = 0; e < r.episodes.size(); ++e) svg << x(e) << "," << y(r.episodes[e].ret) << " ";
    svg << "\"/>\n";
  }
  if (episodes > 0) {
    svg << "<polyline fill=\"none\" stroke=\"#c33\" stroke-width=\"2\" points=\"";
    for (std::size_t e = 0; e < episodes; ++e) {
      std::vector<double> xs;
      for (const auto& r : runs)
        if (r.ok && e < r.episodes.size()) xs.push_back(r.episodes[e].ret);
      svg << x(e) << "," << y(mean_of(xs)) << " ";
    }
    svg << "\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace bayesg::harness
