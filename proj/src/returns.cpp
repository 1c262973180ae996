#include "bayesg/returns.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bayesg::train {

double spatially_discounted_return(const ReturnInputs& in, const graph::HopDistanceTable& hops,
                                   int tau, int horizon, double gamma, double alpha) {
  const int batch = static_cast<int>(in.rewards.rows());
  if (tau < 0 || tau >= batch) throw std::out_of_range("return: step index outside the batch");
  if (horizon < 1) throw std::invalid_argument("return: horizon must be positive");
  const int i = hops.members.at(0);
  const int n = std::min(horizon, batch - tau);

  double ret = 0.0;
  double discount = 1.0;
  for (int k = 0; k < n; ++k) {
    const int s = tau + k;
    double spatial = 0.0;
    for (std::size_t m = 0; m < hops.members.size(); ++m)
      spatial += std::pow(alpha, hops.distance[m]) * in.rewards(s, hops.members[m]);
    ret += discount * spatial;
    discount *= gamma;
    if (in.dones[s]) return ret;
  }
  const double tail = tau + n < batch ? in.values(tau + n, i) : in.bootstrap(i);
  return ret + discount * tail;
}

double advantage(const ReturnInputs& in, const graph::HopDistanceTable& hops, int tau,
                 int horizon, double gamma, double alpha) {
  const int i = hops.members.at(0);
  return spatially_discounted_return(in, hops, tau, horizon, gamma, alpha) - in.values(tau, i);
}

Eigen::VectorXd agent_returns(const ReturnInputs& in, const graph::HopDistanceTable& hops,
                              int horizon, double gamma, double alpha) {
  Eigen::VectorXd out(in.rewards.rows());
  for (int tau = 0; tau < in.rewards.rows(); ++tau)
    out(tau) = spatially_discounted_return(in, hops, tau, horizon, gamma, alpha);
  return out;
}

}  // namespace bayesg::train
