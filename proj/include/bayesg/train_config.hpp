#pragma once

#include <cstdint>
#include <string>

#include "bayesg/encoders.hpp"
#include "bayesg/latent_mask.hpp"
#include "bayesg/optimizer.hpp"

namespace bayesg::train {

enum class MaskMode { learned, none, random };
enum class LogitMode { network, free };
// objective: loss += beta * H(pi) with H = -sum pi log pi; rewards low entropy.
// a2c:       loss += beta * sum pi log pi (decentralized A2C actor loss, an entropy bonus).
enum class EntropyConvention { objective, a2c };

MaskMode mask_mode_from_string(const std::string& s);
std::string to_string(MaskMode m);
LogitMode logit_mode_from_string(const std::string& s);
std::string to_string(LogitMode m);
EntropyConvention entropy_convention_from_string(const std::string& s);
std::string to_string(EntropyConvention c);

struct TrainConfig {
  nn::Method method = nn::Method::bayesg;
  MaskMode mask_mode = MaskMode::learned;
  mask::MaskFeatures mask_features;
  LogitMode logit_mode = LogitMode::network;
  double logit_init = 0.0;     // initial edge-logit bias (network) or value (free)
  bool straight_through = false;
  bool exec_mean_mask = false;  // execute with sigma(phi) > 0.5 instead of sampling

  double gamma = 0.99;
  double alpha = 0.9;
  double beta = 0.01;
  EntropyConvention entropy = EntropyConvention::objective;
  int batch = 40;     // |B| = K
  int episodes = 100;
  double lr_actor = 5e-4;
  double lr_critic = 2.5e-4;
  double lr_graph = 5e-4;
  double elbo_weight = 1.0;
  double value_coef = 1.0;
  double clip_norm = 40.0;
  ad::OptimizerKind optimizer = ad::OptimizerKind::adam;
  mask::PriorConfig prior;

  int embed = 32;
  int hidden = 64;
  int critic_width = 64;
  int gcn_layers = 1;
  bool neighbor_edges = true;

  std::uint64_t seed = 1;

  void validate() const;
};

}  // namespace bayesg::train
