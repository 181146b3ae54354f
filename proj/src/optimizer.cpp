#include "armr/optimizer.hpp"

#include <cmath>

namespace armr {

Adam::Adam(ParameterStore& params, AdamConfig config) : params_(&params), config_(config) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_.push_back(Matrix::Zero(params[i].value.rows(), params[i].value.cols()));
    v_.push_back(Matrix::Zero(params[i].value.rows(), params[i].value.cols()));
  }
}

void Adam::step() {
  ++step_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  const double step_size = config_.lr / c1;
  const double b1 = config_.beta1, b2 = config_.beta2, eps = config_.eps;
  for (std::size_t i = 0; i < params_->size(); ++i) {
    Parameter& p = (*params_)[i];
    auto m = m_[i].array();
    auto v = v_[i].array();
    auto g = p.grad.array();
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.square();
    p.value.array() -= step_size * m / ((v / c2).sqrt() + eps);
  }
}

void Adam::save_state(Checkpoint& ckpt) const {
  for (std::size_t i = 0; i < params_->size(); ++i) {
    const std::string& name = (*params_)[i].name;
    ckpt.tensors["adam.m/" + name] = m_[i];
    ckpt.tensors["adam.v/" + name] = v_[i];
  }
  ckpt.meta["adam_step"] = step_;
}

void Adam::load_state(const Checkpoint& ckpt) {
  for (std::size_t i = 0; i < params_->size(); ++i) {
    const std::string& name = (*params_)[i].name;
    auto m = ckpt.tensors.find("adam.m/" + name);
    auto v = ckpt.tensors.find("adam.v/" + name);
    if (m == ckpt.tensors.end() || v == ckpt.tensors.end())
      throw CheckpointError("checkpoint lacks optimizer state for " + name);
    m_[i] = m->second;
    v_[i] = v->second;
  }
  step_ = ckpt.meta.value("adam_step", 0LL);
}

}  // namespace armr
