#pragma once

#include "armr/autodiff.hpp"
#include "armr/records.hpp"

namespace armr {

inline constexpr double kProbabilityClamp = 1e-12;

/// 1 x n multi-hot row for `codes`.
Matrix multi_hot(const CodeSet& codes, int n);

/// -sum_i [m_i ln p_i + (1 - m_i) ln(1 - p_i)], probabilities clamped to
/// [1e-12, 1 - 1e-12]. Summed over labels, not averaged.
Var bce_loss(Var probs, const Matrix& target);

/// sum over (positive i, negative j) of max(0, 1 - (p_i - p_j)) / n.
Var multilabel_margin_loss(Var probs, const Matrix& target);

/// alpha * bce + (1 - alpha) * margin.
Var combined_loss(Var probs, const Matrix& target, double alpha);

}  // namespace armr
