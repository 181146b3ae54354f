#include "armr/ptl.hpp"

#include <cmath>
#include <stdexcept>

namespace armr {

TemporalEncoder TemporalEncoder::create(ParameterStore& store, const std::string& name,
                                        TemporalMode mode, int dim, int split_n, int state_size,
                                        Rng& rng) {
  if (dim < 1 || split_n < 1 || state_size < 1)
    throw std::invalid_argument("TemporalEncoder: dim, split_n and state_size must be >= 1");
  TemporalEncoder e;
  e.mode_ = mode;
  e.dim_ = dim;
  e.split_n_ = split_n;
  switch (mode) {
    case TemporalMode::piecewise:
      e.ff_near_ = FeedForward::create(store, name + ".ff_near", dim, 4 * dim, dim, rng);
      e.ssm_ = SsmParams::create(store, name + ".ssm", dim, state_size, rng);
      e.ln_near_ = LayerNormParams::create(store, name + ".ln_near", dim);
      e.ln_fuse_ = LayerNormParams::create(store, name + ".ln_fuse", dim);
      break;
    case TemporalMode::near_only:
      e.ff_near_ = FeedForward::create(store, name + ".ff_near", dim, 4 * dim, dim, rng);
      e.ln_near_ = LayerNormParams::create(store, name + ".ln_near", dim);
      e.ln_fuse_ = LayerNormParams::create(store, name + ".ln_fuse", dim);
      break;
    case TemporalMode::far_only:
      e.ssm_ = SsmParams::create(store, name + ".ssm", dim, state_size, rng);
      e.ln_near_ = LayerNormParams::create(store, name + ".ln_near", dim);
      e.ln_fuse_ = LayerNormParams::create(store, name + ".ln_fuse", dim);
      break;
    case TemporalMode::recurrent:
      e.rnn_input_ = Linear::create(store, name + ".rnn_in", dim, dim, rng);
      e.rnn_recurrent_ = &store.add(name + ".rnn_rec",
                                    uniform_matrix(dim, dim, 1.0 / std::sqrt(dim), rng));
      e.rnn_readout_ = Linear::create(store, name + ".rnn_out", dim, 2 * split_n * dim, rng);
      break;
  }
  return e;
}

Var TemporalEncoder::operator()(Graph& g, Var seq) const {
  if (seq.cols() != dim_)
    throw ShapeError("temporal encoder: sequence " + shape_string(seq.value()) +
                     " does not have width " + std::to_string(dim_));
  switch (mode_) {
    case TemporalMode::piecewise: return piecewise(g, seq, true);
    case TemporalMode::near_only: return piecewise(g, seq, false);
    case TemporalMode::far_only: return far_only(g, seq);
    case TemporalMode::recurrent: return recurrent(g, seq);
  }
  throw std::logic_error("unreachable temporal mode");
}

Var TemporalEncoder::near_rows(Graph& g, Var rows) const {
  const Eigen::Index available = std::min<Eigen::Index>(rows.rows(), split_n_);
  Var head = slice_rows(rows, 0, available);
  if (available == split_n_) return head;
  return concat_rows({head, g.constant(Matrix::Zero(split_n_ - available, dim_))});
}

Var TemporalEncoder::fuse(Graph& g, Var h_near, Var h_far) const {
  if (h_far.rows() == 0) return ln_fuse_(g, h_near);
  Var attention = softmax(matmul(h_near, transpose(h_far)), 1);
  return ln_fuse_(g, add(h_near, matmul(attention, h_far)));
}

Var TemporalEncoder::piecewise(Graph& g, Var seq, bool use_far) const {
  Var near = near_rows(g, seq);
  Var h_near = ln_near_(g, add(near, ff_near_(g, near)));
  const Eigen::Index far_len = use_far ? std::max<Eigen::Index>(seq.rows() - split_n_, 0) : 0;
  Var h_far = far_len > 0 ? ssm_scan(g, ssm_, reverse_rows(slice_rows(seq, split_n_, far_len)))
                          : g.constant(Matrix(0, dim_));
  return concat_rows({h_near, fuse(g, h_near, h_far)});
}

Var TemporalEncoder::far_only(Graph& g, Var seq) const {
  // Scan oldest-first, then flip back so row 0 is the latest step again.
  Var h_all = seq.rows() > 0 ? reverse_rows(ssm_scan(g, ssm_, reverse_rows(seq)))
                             : g.constant(Matrix(0, dim_));
  Var h_near = ln_near_(g, near_rows(g, h_all));
  return concat_rows({h_near, fuse(g, h_near, h_all)});
}

Var TemporalEncoder::recurrent(Graph& g, Var seq) const {
  Var state = g.constant(Matrix::Zero(1, dim_));
  Var w_rec = g.param(*rnn_recurrent_);
  if (seq.rows() > 0) {
    Var projected = rnn_input_(g, reverse_rows(seq));
    for (Eigen::Index t = 0; t < seq.rows(); ++t)
      state = tanh(add(slice_rows(projected, t, 1), matmul(state, w_rec)));
  }
  return reshape(rnn_readout_(g, state), 2 * split_n_, dim_);
}

}  // namespace armr
