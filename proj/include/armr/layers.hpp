#pragma once

#include <string>

#include "armr/autodiff.hpp"
#include "armr/rng.hpp"

namespace armr {

/// Uniform [-bound, bound) matrix drawn from `rng` in row-major order.
Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng);

/// y = x W + b with W: in x out, b: 1 x out. Bias starts at zero.
struct Linear {
  Parameter* weight = nullptr;
  Parameter* bias = nullptr;

  static Linear create(ParameterStore& store, const std::string& name, int in, int out, Rng& rng);
  Var operator()(Graph& g, Var x) const;
};

/// Two affine maps with a ReLU between them.
struct FeedForward {
  Linear first;
  Linear second;

  static FeedForward create(ParameterStore& store, const std::string& name, int in, int hidden,
                            int out, Rng& rng);
  Var operator()(Graph& g, Var x) const;
};

/// Gain (ones) and bias (zeros), both 1 x dim.
struct LayerNormParams {
  Parameter* gain = nullptr;
  Parameter* bias = nullptr;

  static LayerNormParams create(ParameterStore& store, const std::string& name, int dim);
  Var operator()(Graph& g, Var x) const;
};

}  // namespace armr
