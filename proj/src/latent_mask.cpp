#include "bayesg/latent_mask.hpp"

#include <limits>
#include <sstream>

namespace bayesg::mask {

void PriorConfig::validate() const {
  check_retention(retention);
  if (!(tau_start > 0.0) || !(tau_end > 0.0)) throw MaskError("temperatures must be positive");
  if (anneal_fraction < 0.0 || anneal_fraction > 1.0)
    throw MaskError("anneal fraction must lie in [0,1]");
}

double PriorConfig::temperature(long long step, long long total_steps) const {
  const double horizon = anneal_fraction * static_cast<double>(total_steps);
  if (horizon <= 0.0) return tau_end;
  const double progress = std::min(1.0, static_cast<double>(step) / horizon);
  return tau_start * std::pow(tau_end / tau_start, progress);
}

Var prior_log_prob_expectation(Var logits, double lambda) {
  check_retention(lambda);
  ad::Tape& t = *logits.tape();
  if (logits.cols() == 0) return t.constant(0.0);
  const double m = static_cast<double>(logits.cols());
  Var s = ad::sum(ad::sigmoid(logits));
  return ad::add_scalar(ad::scale(s, std::log(lambda) - std::log1p(-lambda)),
                        m * std::log1p(-lambda));
}

Var mask_entropy(Var logits) {
  ad::Tape& t = *logits.tape();
  if (logits.cols() == 0) return t.constant(0.0);
  Var s = ad::sigmoid(logits);
  Var one_minus = ad::add_scalar(ad::scale(s, -1.0), 1.0);
  Var terms = ad::add(ad::mul(s, ad::log_sigmoid(logits)),
                      ad::mul(one_minus, ad::log_sigmoid(ad::scale(logits, -1.0))));
  return ad::scale(ad::sum(terms), -1.0);
}

Var regrouped_prior_term(Var logits, double lambda) {
  check_retention(lambda);
  ad::Tape& t = *logits.tape();
  if (logits.cols() == 0) return t.constant(0.0);
  return ad::sum(ad::add(ad::scale(ad::log_sigmoid(logits), lambda),
                         ad::scale(ad::log_sigmoid(ad::scale(logits, -1.0)), 1.0 - lambda)));
}

Var elbo_regularizer(Var logits, double lambda) {
  check_retention(lambda);
  ad::Tape& t = *logits.tape();
  if (logits.cols() == 0) return t.constant(0.0);
  Var s = ad::sigmoid(logits);
  Var w_on = ad::add_scalar(s, lambda);
  Var w_off = ad::add_scalar(ad::scale(s, -1.0), 2.0 - lambda);
  return ad::sum(ad::add(ad::mul(w_on, ad::log_sigmoid(logits)),
                         ad::mul(w_off, ad::log_sigmoid(ad::scale(logits, -1.0)))));
}

Row draw_logistic_noise(int count, Rng& rng) {
  // u in the open interval (0,1)
  std::uniform_real_distribution<double> unif(std::numeric_limits<double>::min(), 1.0);
  Row noise(count);
  for (int k = 0; k < count; ++k) {
    double u = unif(rng);
    if (u >= 1.0) u = std::nextafter(1.0, 0.0);
    noise(k) = std::log(u) - std::log1p(-u);
  }
  return noise;
}

MaskSample mask_from_noise(const Row& logits, const Row& noise, double tau, bool hard) {
  if (!(tau > 0.0)) throw MaskError("temperature must be positive, got " + std::to_string(tau));
  if (logits.size() != noise.size()) throw MaskError("noise and logit counts differ");
  MaskSample z;
  z.noise = noise;
  z.tau = tau;
  z.hard = hard;
  z.values.resize(logits.size());
  for (Eigen::Index k = 0; k < logits.size(); ++k) {
    const double relaxed = sigmoid((logits(k) + noise(k)) / tau);
    z.values(k) = hard ? (relaxed > 0.5 ? 1.0 : 0.0) : relaxed;
  }
  return z;
}

MaskSample sample_mask(const Row& logits, double tau, Rng& rng, bool hard) {
  if (!(tau > 0.0)) throw MaskError("temperature must be positive, got " + std::to_string(tau));
  return mask_from_noise(logits, draw_logistic_noise(static_cast<int>(logits.size()), rng), tau, hard);
}

Var relaxed_mask(Var logits, const Row& noise, double tau, bool straight_through) {
  if (!(tau > 0.0)) throw MaskError("temperature must be positive, got " + std::to_string(tau));
  ad::Tape& t = *logits.tape();
  if (logits.cols() != noise.size()) throw MaskError("noise and logit counts differ");
  Var soft = ad::sigmoid(ad::scale(ad::add(logits, t.constant(Matrix(noise))), 1.0 / tau));
  if (!straight_through) return soft;
  Matrix hard = (soft.value().array() > 0.5).cast<double>().matrix();
  return ad::straight_through(soft, hard);
}

Matrix effective_subgraph(const Row& z, const graph::EgoGraph& ego) {
  if (z.size() != ego.edge_count())
    throw MaskError("mask has " + std::to_string(z.size()) + " entries but the ego-graph has " +
                    std::to_string(ego.edge_count()) + " edges");
  Matrix a = Matrix::Zero(ego.size(), ego.size());
  for (int e = 0; e < ego.edge_count(); ++e) {
    auto [u, v] = ego.edges[e];
    if (ego.adjacency(u, v) == 0.0)
      throw MaskError("mask references a non-ego edge (" + std::to_string(u) + "," +
                      std::to_string(v) + ")");
    a(u, v) = a(v, u) = z(e) * ego.adjacency(u, v);
  }
  return a;
}

Var effective_subgraph(Var z, const graph::EgoGraph& ego) {
  if (z.cols() != ego.edge_count())
    throw MaskError("mask has " + std::to_string(z.cols()) + " entries but the ego-graph has " +
                    std::to_string(ego.edge_count()) + " edges");
  for (auto [u, v] : ego.edges)
    if (ego.adjacency(u, v) == 0.0) throw MaskError("mask references a non-ego edge");
  ad::Tape& t = *z.tape();
  if (ego.edge_count() == 0) return t.constant(Matrix::Zero(ego.size(), ego.size()));
  Var scattered = ad::scatter_symmetric(z, ego.size(), ego.edges);
  return ad::mul(scattered, t.constant(ego.adjacency));
}

MaskFeatures MaskFeatures::parse(const std::string& s) {
  if (s == "all") return {};
  MaskFeatures f{false, false, false};
  std::stringstream ss(s);
  for (std::string tok; std::getline(ss, tok, ',');) {
    if (tok == "state")
      f.state = true;
    else if (tok == "policy")
      f.policy = true;
    else if (tok == "traj" || tok == "trajectory")
      f.trajectory = true;
    else
      throw MaskError("unknown mask feature \"" + tok + "\"");
  }
  if (!f.state && !f.policy && !f.trajectory) throw MaskError("mask feature set is empty");
  return f;
}

std::string MaskFeatures::to_string() const {
  std::string out;
  auto add = [&out](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += ",";
    out += name;
  };
  add(state, "state");
  add(policy, "policy");
  add(trajectory, "traj");
  return out;
}

EdgeLogitNetwork::EdgeLogitNetwork(const std::string& name, const nn::EncoderDims& dims,
                                   MaskFeatures features, double init_bias, Rng& rng)
    : features_(features) {
  const int width = (features.state ? dims.state : 0) + (features.policy ? dims.policy : 0) +
                    (features.trajectory ? dims.traj : 0);
  linear_ = nn::Linear(name + "/edge", 2 * width, 1, rng);
  linear_.bias.value.setConstant(init_bias);
}

Var EdgeLogitNetwork::logits(ad::Tape& t, const nn::AgentChannels& ch, const graph::EgoGraph& ego) {
  if (ego.edge_count() == 0) return t.constant(Matrix::Zero(1, 0));
  std::vector<Var> channels;
  if (features_.state) channels.push_back(ch.states);
  if (features_.policy) channels.push_back(ch.policies);
  if (features_.trajectory) channels.push_back(ch.trajectories);
  Var feats = channels.size() == 1 ? channels[0] : ad::concat(channels);
  std::vector<Var> rows;
  rows.reserve(ego.edges.size());
  for (auto [u, v] : ego.edges)
    rows.push_back(ad::concat({ad::slice(feats, u, 1, 0, feats.cols()),
                               ad::slice(feats, v, 1, 0, feats.cols())}));
  return ad::transpose(linear_(t, ad::concat_rows(rows)));
}

}  // namespace bayesg::mask
