#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "bayesg/config.hpp"
#include "bayesg/trainer.hpp"

namespace bayesg::harness {

inline constexpr const char* kMetricsHeader =
    "step,episode,mean_return,policy_loss,value_loss,elbo_loss,prior_loss,mask_entropy,total_loss,"
    "wall_clock";
inline constexpr const char* kReturnsHeader = "episode,step,return";
inline constexpr const char* kSummaryHeader = "episode,mean_return,std_return,seeds";

std::string metrics_row(const train::UpdateRecord& u, double wall_clock);

struct SeedRun {
  std::uint64_t seed = 0;
  bool ok = true;
  bool numeric_failure = false;
  std::string error;
  std::vector<train::EpisodeRecord> episodes;
  std::string metrics_path, returns_path, checkpoint_path;
};

struct ExperimentResult {
  std::string directory;
  std::vector<SeedRun> runs;
  std::string summary_path;
  bool all_ok() const;
};

// BAYESG_OUT, when set, replaces config.output_dir.
std::string resolve_output_dir(const ExperimentConfig& config);

// Trains one seed, writing metrics_<tag>.csv, returns_<tag>.csv and
// checkpoint_<tag>.bin into `dir`. Failures are reported in the result.
SeedRun train_seed(const ExperimentConfig& config, std::uint64_t seed, const std::string& dir,
                   const std::string& tag, std::ostream* log = nullptr);

// One run per seed, then summary.csv (and returns.svg when plotting).
ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr);

// Per-episode mean and sample standard deviation over successful seeds.
std::string summary_csv(const std::vector<SeedRun>& runs);

// Mean return over the last `fraction` of episodes.
double final_return(const std::vector<train::EpisodeRecord>& episodes, double fraction = 0.2);

struct AblationRow {
  std::string group;    // "mask" or "features"
  std::string variant;  // learned / none / random, or state / traj / policy / all
  std::vector<double> per_seed;
  double mean = 0.0;
  double std = 0.0;
};

// {learned, none, random} x seeds and {state, traj, policy, all} x seeds.
std::vector<AblationRow> ablation_suite(const ExperimentConfig& config, std::ostream* log = nullptr);
std::string ablation_csv(const std::vector<AblationRow>& rows);

struct LatentGraph {
  Eigen::MatrixXd retention;  // row i, column j = sigma(phi_ij) of agent i; diagonal 1
  struct Edge {
    int from, to;
    double weight;
  };
  std::vector<Edge> edges;
};

// Retention probabilities after `snapshot_step` hard-mask evaluation steps.
// Throws if `env_graph` differs from the trainer's graph.
LatentGraph export_latent_graph(train::Trainer& trainer, const graph::EnvGraph& env_graph,
                                int snapshot_step, std::uint64_t seed);
std::string latent_matrix_csv(const LatentGraph& g);
std::string latent_edges_csv(const LatentGraph& g);

// Static line chart of per-seed and mean episode returns.
std::string returns_svg(const std::vector<SeedRun>& runs);

void write_text(const std::string& path, const std::string& text);

}  // namespace bayesg::harness
