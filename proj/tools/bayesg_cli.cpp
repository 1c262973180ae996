// Command-line front end: train, exec, ablate, export-graph, validate-config.
#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "bayesg/checkpoint.hpp"
#include "bayesg/config.hpp"
#include "bayesg/exec_sim.hpp"
#include "bayesg/experiment.hpp"

using namespace bayesg;
namespace fs = std::filesystem;

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericError = 3;

struct TrainOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> method, mask, features, entropy;
  std::optional<int> episodes;
};

harness::ExperimentConfig with_overrides(harness::ExperimentConfig cfg, const TrainOverrides& o) {
  try {
    if (o.seed) cfg.seeds = {*o.seed};
    if (o.method) cfg.train.method = nn::method_from_string(*o.method);
    if (o.mask) cfg.train.mask_mode = train::mask_mode_from_string(*o.mask);
    if (o.features) cfg.train.mask_features = mask::MaskFeatures::parse(*o.features);
    if (o.entropy) cfg.train.entropy = train::entropy_convention_from_string(*o.entropy);
    if (o.episodes) cfg.train.episodes = *o.episodes;
  } catch (const std::exception& e) {
    throw harness::ConfigError(0, e.what());
  }
  cfg.resolve();
  return cfg;
}

// Rebuilds the trainer stored in a checkpoint.
struct Restored {
  harness::ExperimentConfig config;
  std::unique_ptr<train::Trainer> trainer;
};

Restored restore_from(const std::string& path) {
  const harness::Checkpoint ck = harness::load_checkpoint(path);
  Restored r;
  r.config = harness::parse_config(ck.config_text);
  if (harness::config_hash(r.config) != ck.config_hash)
    throw harness::CheckpointError("checkpoint config hash does not match its stored config");
  r.config.train.seed = r.config.seeds.front();
  r.trainer = std::make_unique<train::Trainer>(r.config.env, r.config.train);
  harness::restore(*r.trainer, ck);
  return r;
}

int cmd_train(const std::string& config_path, const TrainOverrides& o) {
  auto cfg = with_overrides(harness::load_config_file(config_path), o);
  std::cout << "method " << nn::to_string(cfg.train.method) << ", mask " << train::to_string(cfg.train.mask_mode)
            << ", entropy convention " << train::to_string(cfg.train.entropy) << "\n";
  auto result = harness::run_experiment(cfg, &std::cout);
  std::cout << "wrote " << result.summary_path << "\n";
  for (const auto& r : result.runs)
    if (r.numeric_failure) return kNumericError;
  return result.all_ok() ? 0 : 1;
}

int cmd_exec(const std::string& checkpoint, std::optional<double> drop, std::optional<long long> delay,
             std::optional<int> episodes, std::optional<std::uint64_t> seed, const std::string& out_dir) {
  Restored r = restore_from(checkpoint);
  auto channel = r.config.channel;
  if (drop) channel.drop = *drop;
  if (delay) channel.delay = *delay;
  try {
    channel.validate();
  } catch (const std::exception& e) {
    throw harness::ConfigError(0, e.what());
  }
  const int n_ep = episodes.value_or(r.config.exec_episodes);
  const std::uint64_t s = seed.value_or(r.config.seeds.front());
  const auto run = exec::run_execution(*r.trainer, channel, r.config.schedule, s, n_ep);
  const auto edges = exec::message_accounting(run);

  const std::string dir = out_dir.empty() ? harness::resolve_output_dir(r.config) : out_dir;
  fs::create_directories(dir);
  std::string returns = "episode,return\n";
  for (std::size_t e = 0; e < run.returns.size(); ++e)
    returns += std::to_string(e) + "," + std::to_string(run.returns[e]) + "\n";
  std::string usage = "from,to,sent,delivered,retained_fraction\n";
  for (const auto& u : edges)
    usage += std::to_string(u.from) + "," + std::to_string(u.to) + "," + std::to_string(u.sent) + "," +
             std::to_string(u.delivered) + "," + std::to_string(u.retained) + "\n";
  harness::write_text((fs::path(dir) / "exec_returns.csv").string(), returns);
  harness::write_text((fs::path(dir) / "edge_usage.csv").string(), usage);
  std::cout << "episodes " << n_ep << ", messages sent " << run.messages_sent << ", delivered "
            << run.messages_delivered << ", retained-edge fraction " << run.retained_fraction << "\n";
  for (std::size_t e = 0; e < run.returns.size(); ++e)
    std::cout << "episode " << e << " return " << run.returns[e] << "\n";
  return 0;
}

int cmd_ablate(const std::string& config_path, const TrainOverrides& o) {
  auto cfg = with_overrides(harness::load_config_file(config_path), o);
  const auto rows = harness::ablation_suite(cfg, &std::cout);
  std::cout << harness::ablation_csv(rows);
  return 0;
}

int cmd_export(const std::string& checkpoint, int snapshot, const std::string& graph_spec,
               const std::string& out_dir) {
  Restored r = restore_from(checkpoint);
  graph::EnvGraph g = r.trainer->env().graph();
  if (!graph_spec.empty()) {
    try {
      g = graph::graph_from_spec(graph_spec);
    } catch (const std::exception& e) {
      throw harness::ConfigError(0, e.what());
    }
  }
  const auto latent = harness::export_latent_graph(*r.trainer, g, snapshot, r.config.seeds.front());
  const std::string dir = out_dir.empty() ? harness::resolve_output_dir(r.config) : out_dir;
  fs::create_directories(dir);
  harness::write_text((fs::path(dir) / "latent_graph.csv").string(), harness::latent_matrix_csv(latent));
  harness::write_text((fs::path(dir) / "latent_edges.csv").string(), harness::latent_edges_csv(latent));
  std::cout << harness::latent_matrix_csv(latent);
  return 0;
}

int cmd_validate(const std::string& config_path) {
  const auto cfg = harness::load_config_file(config_path);
  std::cout << harness::serialize_config(cfg);
  for (const auto& d : cfg.env.graph.diagnostics()) std::cerr << "note: " << d << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized traffic-signal MARL with latent interaction graphs"};
  app.require_subcommand(1);

  std::string config_path, checkpoint, graph_spec, out_dir;
  TrainOverrides over;
  std::optional<double> drop;
  std::optional<long long> delay;
  std::optional<int> exec_episodes;
  std::optional<std::uint64_t> exec_seed;
  int snapshot = 0;

  auto add_train_flags = [&](CLI::App* c) {
    c->add_option("--config", config_path, "Experiment config file")->required();
    c->add_option("--seed", over.seed, "Run a single seed");
    c->add_option("--method", over.method, "bayesg | ia2c | commnet | neurcomm");
    c->add_option("--mask", over.mask, "learned | none | random");
    c->add_option("--mask-features", over.features, "all, or a list of state,policy,traj");
    c->add_option("--entropy", over.entropy, "objective | a2c (sign of the entropy term)");
    c->add_option("--episodes", over.episodes, "Training episodes per seed");
  };
  auto* train_cmd = app.add_subcommand("train", "Train every configured seed");
  add_train_flags(train_cmd);
  auto* ablate_cmd = app.add_subcommand("ablate", "Masking-strategy and mask-feature ablations");
  add_train_flags(ablate_cmd);

  auto* exec_cmd = app.add_subcommand("exec", "Decentralized execution from a checkpoint");
  exec_cmd->add_option("--checkpoint", checkpoint)->required();
  exec_cmd->add_option("--drop", drop, "Message drop probability");
  exec_cmd->add_option("--delay", delay, "Message delay in ticks");
  exec_cmd->add_option("--episodes", exec_episodes);
  exec_cmd->add_option("--seed", exec_seed);
  exec_cmd->add_option("--out", out_dir);

  auto* export_cmd = app.add_subcommand("export-graph", "Write the latent retention matrix");
  export_cmd->add_option("--checkpoint", checkpoint)->required();
  export_cmd->add_option("--snapshot", snapshot, "Evaluation steps before the snapshot");
  export_cmd->add_option("--graph", graph_spec, "Environment graph to check against");
  export_cmd->add_option("--out", out_dir);

  auto* validate_cmd = app.add_subcommand("validate-config", "Parse and print a normalized config");
  validate_cmd->add_option("--config", config_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (*train_cmd) return cmd_train(config_path, over);
    if (*ablate_cmd) return cmd_ablate(config_path, over);
    if (*exec_cmd) return cmd_exec(checkpoint, drop, delay, exec_episodes, exec_seed, out_dir);
    if (*export_cmd) return cmd_export(checkpoint, snapshot, graph_spec, out_dir);
    if (*validate_cmd) return cmd_validate(config_path);
  } catch (const harness::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const exec::ExecError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ad::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumericError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
