#pragma once

#include <string>

#include "armr/autodiff.hpp"
#include "armr/layers.hpp"
#include "armr/rng.hpp"

namespace armr {

/// Single-layer diagonal selective state-space model (Mamba-style selection
/// without the convolution and gating branches).
///
/// For channel c and step t, with a = -exp(a_log):
///   delta_t = softplus(x_t Wd + bd)            (1 x dim)
///   B_t     = x_t Wb + bb,  C_t = x_t Wc + bc   (1 x state)
///   s_t[c]  = exp(delta_t[c] a[c]) * s_{t-1}[c] + delta_t[c] B_t x_t[c]
///   y_t[c]  = <C_t, s_t[c]> + D[c] x_t[c],      s_0 = 0
struct SsmParams {
  int dim = 0;
  int state_size = 0;
  Parameter* a_log = nullptr;  // dim x state
  Linear delta;                // dim -> dim
  Linear input;                // dim -> state (B)
  Linear output;               // dim -> state (C)
  Parameter* skip = nullptr;   // 1 x dim (D)

  /// Projection biases start at zero except delta's, which starts at
  /// softplus^-1(0.5); a = -exp(a_log) is drawn from [-1, -0.1].
  static SsmParams create(ParameterStore& store, const std::string& name, int dim,
                          int state_size, Rng& rng);
};

/// Fused scan kernel over precomputed selections. x, delta: L x dim;
/// b, c: L x state; a: dim x state (negative); d: 1 x dim. Returns L x dim.
Var selective_scan(Var x, Var delta, Var b, Var c, Var a, Var d);

/// Runs the scan over x (L x dim, oldest row first). L = 0 yields a 0 x dim tensor.
Var ssm_scan(Graph& g, const SsmParams& p, Var x);

}  // namespace armr
