#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bayesg/encoders.hpp"
#include "bayesg/graph.hpp"
#include "bayesg/layers.hpp"

// Variational Bernoulli edge masks over an agent's ego-graph: binary-concrete
// sampling, the effective subgraph Z (.) G_env, and the closed-form prior and
// entropy terms of the mask ELBO.
namespace bayesg::mask {

using ad::Matrix;
using ad::Var;
using Row = Eigen::RowVectorXd;
using Rng = std::mt19937_64;

class MaskError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct PriorConfig {
  double retention = 0.5;  // lambda, strictly inside (0, 1)
  double tau_start = 1.0;
  double tau_end = 0.1;
  double anneal_fraction = 0.5;  // of total training steps

  void validate() const;
  // Geometric anneal from tau_start to tau_end, then constant.
  double temperature(long long step, long long total_steps) const;
};

// Numerically stable scalar helpers.
inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
inline double log_sigmoid(double x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

inline void check_retention(double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0))
    throw MaskError("retention bias lambda must lie strictly inside (0,1), got " +
                    std::to_string(lambda));
}

// E_q[log p(Z)] = sum_j sigma(phi_j) log(lambda) + (1 - sigma(phi_j)) log(1 - lambda).
template <typename Derived>
typename Derived::Scalar prior_log_prob_expectation(const Eigen::DenseBase<Derived>& logits,
                                                     double lambda) {
  check_retention(lambda);
  using S = typename Derived::Scalar;
  S total(0);
  for (Eigen::Index k = 0; k < logits.size(); ++k) {
    const S s = sigmoid(logits.derived().coeff(k));
    total += s * std::log(lambda) + (S(1) - s) * std::log1p(-lambda);
  }
  return total;
}

// Sum of per-edge Bernoulli entropies H(sigma(phi_j)), each in [0, ln 2].
template <typename Derived>
typename Derived::Scalar mask_entropy(const Eigen::DenseBase<Derived>& logits) {
  using S = typename Derived::Scalar;
  S total(0);
  for (Eigen::Index k = 0; k < logits.size(); ++k) {
    const S phi = logits.derived().coeff(k);
    const S s = sigmoid(phi);
    total -= s * log_sigmoid(phi) + (S(1) - s) * log_sigmoid(-phi);
  }
  return total;
}

// Prior term as regrouped in the final ELBO expansion:
// sum_j lambda log sigma(phi_j) + (1 - lambda) log(1 - sigma(phi_j)).
template <typename Derived>
typename Derived::Scalar regrouped_prior_term(const Eigen::DenseBase<Derived>& logits,
                                              double lambda) {
  check_retention(lambda);
  using S = typename Derived::Scalar;
  S total(0);
  for (Eigen::Index k = 0; k < logits.size(); ++k) {
    const S phi = logits.derived().coeff(k);
    total += lambda * log_sigmoid(phi) + (1.0 - lambda) * log_sigmoid(-phi);
  }
  return total;
}

// Combined mask regularizer of the BayesG ELBO:
// sum_j (lambda + s_j) log s_j + (2 - lambda - s_j) log(1 - s_j), s_j = sigma(phi_j).
template <typename Derived>
typename Derived::Scalar elbo_regularizer(const Eigen::DenseBase<Derived>& logits, double lambda) {
  check_retention(lambda);
  using S = typename Derived::Scalar;
  S total(0);
  for (Eigen::Index k = 0; k < logits.size(); ++k) {
    const S phi = logits.derived().coeff(k);
    const S s = sigmoid(phi);
    total += (lambda + s) * log_sigmoid(phi) + (2.0 - lambda - s) * log_sigmoid(-phi);
  }
  return total;
}

// Differentiable counterparts over a 1xM logit row.
Var prior_log_prob_expectation(Var logits, double lambda);
Var mask_entropy(Var logits);
Var regrouped_prior_term(Var logits, double lambda);
Var elbo_regularizer(Var logits, double lambda);

struct MaskSample {
  Row values;  // relaxed in (0,1) or hard in {0,1}
  Row noise;   // logistic noise L = log u - log(1 - u)
  double tau = 1.0;
  bool hard = false;
};

Row draw_logistic_noise(int count, Rng& rng);
// Relaxed: sigmoid((phi + L) / tau). Hard: 1[relaxed > 0.5].
MaskSample sample_mask(const Row& logits, double tau, Rng& rng, bool hard);
MaskSample mask_from_noise(const Row& logits, const Row& noise, double tau, bool hard);

// Differentiable mask with recorded noise. With straight_through, the forward
// value is the hard sample and the gradient is the relaxed one.
Var relaxed_mask(Var logits, const Row& noise, double tau, bool straight_through = false);

// A_eff = Z (.) A_ego, with z scattered symmetrically over the ego edges.
Matrix effective_subgraph(const Row& z, const graph::EgoGraph& ego);
Var effective_subgraph(Var z, const graph::EgoGraph& ego);

// Which channels feed the edge-logit network.
struct MaskFeatures {
  bool state = true;
  bool policy = true;
  bool trajectory = true;

  // "all", or a comma list of state / policy / traj (trajectory).
  static MaskFeatures parse(const std::string& s);
  std::string to_string() const;
  bool operator==(const MaskFeatures&) const = default;
};

// phi_ij = w . [f_i, f_j] + b over the selected channel rows of each ego edge.
class EdgeLogitNetwork {
 public:
  EdgeLogitNetwork() = default;
  EdgeLogitNetwork(const std::string& name, const nn::EncoderDims& dims, MaskFeatures features,
                   double init_bias, Rng& rng);

  Var logits(ad::Tape& t, const nn::AgentChannels& ch, const graph::EgoGraph& ego);
  void collect(std::vector<ad::Parameter*>& out) { linear_.collect(out); }
  const MaskFeatures& features() const { return features_; }

 private:
  MaskFeatures features_;
  nn::Linear linear_;
};

}  // namespace bayesg::mask
