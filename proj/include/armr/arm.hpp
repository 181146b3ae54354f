#pragma once

#include <span>
#include <string>
#include <vector>

#include "armr/autodiff.hpp"
#include "armr/ptl.hpp"
#include "armr/records.hpp"

namespace armr {

/// Per-visit partition of a medication history into reused and newly introduced drugs.
struct MedSplit {
  std::vector<CodeSet> old_seq;
  std::vector<CodeSet> new_seq;
};

/// old_i = m_i intersect (m_1 u ... u m_{i-1}), new_i = m_i \ old_i; the first visit is all new.
/// Throws std::out_of_range for indices outside [0, num_medications).
MedSplit split_medications(std::span<const CodeSet> history, int num_medications);

struct UsageMasks {
  Eigen::VectorXd used;    // time-decayed usage, >= 0
  Eigen::VectorXd unused;  // 1 for never-prescribed drugs, else 0
};

/// With T - 1 = history.size():
///   used_j   = sum_i scale * exp(-rate * (T - i)) * [j in m_i]
///   unused_j = 1 - [j in m_1 u ... u m_{T-1}]
/// `scale` and `rate` are the positive (post-softplus) values.
UsageMasks usage_masks(std::span<const CodeSet> history, int num_medications, double scale,
                       double rate);

/// Produces the per-patient medication embedding E'_m (|M| x dim).
///
/// adaptive (full model): two temporal encoders over the reused/new drug
/// sequences, gated by the usage masks:
///   q_o = softmax_rows(E_m h_o^T W_o / sqrt(dim)), likewise q_n
///   E'_m = E_m * (used . q_o + unused . q_n)
/// non-adaptive (no-arm ablation): one encoder over raw prescriptions,
///   E'_m = E_m * softmax_rows(E_m h^T W / sqrt(dim))
class MedicationEncoder {
 public:
  static MedicationEncoder create(ParameterStore& store, Parameter& med_embedding, bool adaptive,
                                  TemporalMode mode, int dim, int split_n, int state_size,
                                  Rng& rng);

  /// `history` is m_1..m_{T-1} in chronological order (may be empty).
  Var operator()(Graph& g, std::span<const CodeSet> history) const;

  /// Graph form of usage_masks over the learnable decay scalars; returns (used, unused) as |M| x 1.
  std::pair<Var, Var> masks(Graph& g, std::span<const CodeSet> history) const;

  bool adaptive() const { return adaptive_; }
  int num_medications() const { return static_cast<int>(embedding_->value.rows()); }

  const Parameter& embedding() const { return *embedding_; }
  const TemporalEncoder& ptl_old() const { return ptl_old_; }
  const TemporalEncoder& ptl_new() const { return ptl_new_; }
  const Parameter& w_old() const { return *w_old_; }
  const Parameter& w_new() const { return *w_new_; }
  const Parameter& alpha() const { return *alpha_; }
  const Parameter& beta() const { return *beta_; }

 private:
  Var gate(Graph& g, Var table, const TemporalEncoder& enc, Parameter& w,
           const std::vector<CodeSet>& recent_first) const;

  bool adaptive_ = true;
  int dim_ = 0;
  Parameter* embedding_ = nullptr;
  TemporalEncoder ptl_old_;  // also the single encoder when non-adaptive
  TemporalEncoder ptl_new_;
  Parameter* w_old_ = nullptr;
  Parameter* w_new_ = nullptr;
  Parameter* alpha_ = nullptr;
  Parameter* beta_ = nullptr;
};

/// softplus^-1(y) for y > 0.
double inverse_softplus(double y);

}  // namespace armr
