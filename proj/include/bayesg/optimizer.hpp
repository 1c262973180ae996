#pragma once

#include <string>
#include <vector>

#include "bayesg/autodiff.hpp"

namespace bayesg::ad {

enum class OptimizerKind { sgd, adam };

OptimizerKind optimizer_kind_from_string(const std::string& s);
std::string to_string(OptimizerKind k);

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Parameters sharing one learning rate (actor, critic or graph).
struct ParamGroup {
  std::vector<Parameter*> params;
  double learning_rate = 1e-3;
};

// Scales gradients in place so their joint L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_grad_norm(const std::vector<Parameter*>& params, double max_norm);

class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(OptimizerKind kind, std::vector<ParamGroup> groups, AdamSettings adam = {});

  // Applies one update from the accumulated Parameter::grad values. Returns
  // false and leaves every parameter untouched if any gradient is non-finite.
  bool step();
  void zero_grad();

  OptimizerKind kind() const { return kind_; }
  long long step_count() const { return t_; }
  std::vector<Parameter*> parameters() const;
  const std::vector<ParamGroup>& groups() const { return groups_; }

  // Moment buffers, aligned with parameters(); exposed for checkpointing.
  std::vector<Matrix>& first_moments() { return m_; }
  std::vector<Matrix>& second_moments() { return v_; }
  void set_step_count(long long t) { t_ = t; }

 private:
  OptimizerKind kind_ = OptimizerKind::adam;
  std::vector<ParamGroup> groups_;
  AdamSettings adam_;
  std::vector<Matrix> m_, v_;
  long long t_ = 0;
};

}  // namespace bayesg::ad
