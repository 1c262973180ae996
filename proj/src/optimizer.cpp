#include "bayesg/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace bayesg::ad {

OptimizerKind optimizer_kind_from_string(const std::string& s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "sgd") return OptimizerKind::sgd;
  throw std::invalid_argument("unknown optimizer \"" + s + "\"");
}

std::string to_string(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd"; }

double clip_grad_norm(const std::vector<Parameter*>& params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params) sq += p->grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (Parameter* p : params) p->grad *= s;
  }
  return norm;
}

Optimizer::Optimizer(OptimizerKind kind, std::vector<ParamGroup> groups, AdamSettings adam)
    : kind_(kind), groups_(std::move(groups)), adam_(adam) {
  for (const auto& g : groups_)
    for (const Parameter* p : g.params) {
      m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
}

std::vector<Parameter*> Optimizer::parameters() const {
  std::vector<Parameter*> out;
  for (const auto& g : groups_) out.insert(out.end(), g.params.begin(), g.params.end());
  return out;
}

void Optimizer::zero_grad() {
  for (const auto& g : groups_)
    for (Parameter* p : g.params) p->zero_grad();
}

bool Optimizer::step() {
  for (const auto& g : groups_)
    for (const Parameter* p : g.params)
      if (!p->grad.allFinite()) return false;
  ++t_;
  const double bc1 = 1.0 - std::pow(adam_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(adam_.beta2, static_cast<double>(t_));
  std::size_t k = 0;
  for (const auto& g : groups_) {
    for (Parameter* p : g.params) {
      if (kind_ == OptimizerKind::sgd) {
        p->value -= g.learning_rate * p->grad;
      } else {
        m_[k] = adam_.beta1 * m_[k] + (1.0 - adam_.beta1) * p->grad;
        v_[k] = adam_.beta2 * v_[k] + (1.0 - adam_.beta2) * p->grad.cwiseAbs2();
        p->value.array() -= g.learning_rate * (m_[k].array() / bc1) /
                            ((v_[k].array() / bc2).sqrt() + adam_.eps);
      }
      ++k;
    }
  }
  return true;
}

}  // namespace bayesg::ad
