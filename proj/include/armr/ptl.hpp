#pragma once

#include <string>

#include "armr/autodiff.hpp"
#include "armr/layers.hpp"
#include "armr/ssm.hpp"

namespace armr {

/// How a temporal encoder treats its input. `piecewise` is the full
/// near/far model; the rest back the ablation variants.
enum class TemporalMode {
  piecewise,  // feedforward on the N most recent rows, selective SSM on the rest
  near_only,  // far branch always empty
  far_only,   // whole sequence through the SSM, no feedforward branch
  recurrent,  // plain tanh RNN read out into the same 2N x dim shape
};

/// Sequences enter every temporal encoder most-recent-first: row 0 is the
/// latest visit, rows 0..N-1 form the near segment. The far segment is
/// flipped back to oldest-first before the scan so the recurrence runs
/// forward in time. Output is always 2N x dim.
class TemporalEncoder {
 public:
  static TemporalEncoder create(ParameterStore& store, const std::string& name, TemporalMode mode,
                                int dim, int split_n, int state_size, Rng& rng);

  Var operator()(Graph& g, Var seq) const;

  TemporalMode mode() const { return mode_; }
  int dim() const { return dim_; }
  int split_n() const { return split_n_; }

  // Exposed for reference re-implementations in tests.
  const FeedForward& ff_near() const { return ff_near_; }
  const SsmParams& ssm() const { return ssm_; }
  const LayerNormParams& ln_near() const { return ln_near_; }
  const LayerNormParams& ln_fuse() const { return ln_fuse_; }
  const Linear& rnn_input() const { return rnn_input_; }
  const Parameter* rnn_recurrent() const { return rnn_recurrent_; }
  const Linear& rnn_readout() const { return rnn_readout_; }

 private:
  Var piecewise(Graph& g, Var seq, bool use_far) const;
  Var far_only(Graph& g, Var seq) const;
  Var recurrent(Graph& g, Var seq) const;
  /// First min(T, N) rows of `rows`, zero-padded to N.
  Var near_rows(Graph& g, Var rows) const;
  Var fuse(Graph& g, Var h_near, Var h_far) const;

  TemporalMode mode_ = TemporalMode::piecewise;
  int dim_ = 0;
  int split_n_ = 0;
  FeedForward ff_near_;
  SsmParams ssm_;
  LayerNormParams ln_near_;
  LayerNormParams ln_fuse_;
  Linear rnn_input_;
  Parameter* rnn_recurrent_ = nullptr;
  Linear rnn_readout_;
};

}  // namespace armr
