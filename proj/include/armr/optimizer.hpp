#pragma once

#include <vector>

#include "armr/autodiff.hpp"
#include "armr/checkpoint.hpp"

namespace armr {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction and no weight decay. Moments are kept per
/// parameter, in store order.
class Adam {
 public:
  Adam(ParameterStore& params, AdamConfig config);

  /// Applies one update from the gradients currently held in the store.
  void step();
  long long steps() const { return step_; }

  /// Moments are written as "adam.m/<name>" and "adam.v/<name>", the step count in meta.
  void save_state(Checkpoint& ckpt) const;
  void load_state(const Checkpoint& ckpt);

 private:
  ParameterStore* params_;
  AdamConfig config_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  long long step_ = 0;
};

}  // namespace armr
