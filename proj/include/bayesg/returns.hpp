#pragma once

#include <vector>

#include <Eigen/Dense>

#include "bayesg/graph.hpp"

namespace bayesg::train {

// Rewards and rollout-time values for one batch; row tau, column agent.
struct ReturnInputs {
  Eigen::MatrixXd rewards;    // B x N
  Eigen::MatrixXd values;     // B x N, v_{i,tau}
  Eigen::RowVectorXd bootstrap;  // 1 x N, v_{i,B}
  std::vector<bool> dones;    // episode ended after step tau
};

// R_i,tau = sum_{k<n} gamma^k sum_{j in V_i} alpha^{d_ij} r_{j,tau+k} + gamma^n v_{i,tau+n},
// n = min(K, B - tau). The sum stops at an episode end, which bootstraps 0.
double spatially_discounted_return(const ReturnInputs& in, const graph::HopDistanceTable& hops,
                                   int tau, int horizon, double gamma, double alpha);

// A = R - v_{i,tau}.
double advantage(const ReturnInputs& in, const graph::HopDistanceTable& hops, int tau,
                 int horizon, double gamma, double alpha);

// Returns for every step of one agent.
Eigen::VectorXd agent_returns(const ReturnInputs& in, const graph::HopDistanceTable& hops,
                              int horizon, double gamma, double alpha);

}  // namespace bayesg::train
