#include "armr/arm.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <stdexcept>

namespace armr {

double inverse_softplus(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

namespace {

void check_range(const CodeSet& s, int num_medications) {
  for (int m : s)
    if (m < 0 || m >= num_medications)
      throw std::out_of_range("medication index " + std::to_string(m) + " out of range [0, " +
                              std::to_string(num_medications) + ")");
}

template <typename Seq>
std::vector<CodeSet> reversed(const Seq& seq) {
  return std::vector<CodeSet>(seq.rbegin(), seq.rend());
}

}  // namespace

MedSplit split_medications(std::span<const CodeSet> history, int num_medications) {
  MedSplit out;
  std::vector<bool> seen(static_cast<std::size_t>(num_medications), false);
  for (const CodeSet& visit : history) {
    check_range(visit, num_medications);
    CodeSet old_set, new_set;
    for (int m : visit) (seen[m] ? old_set : new_set).push_back(m);
    for (int m : visit) seen[m] = true;
    out.old_seq.push_back(std::move(old_set));
    out.new_seq.push_back(std::move(new_set));
  }
  return out;
}

UsageMasks usage_masks(std::span<const CodeSet> history, int num_medications, double scale,
                       double rate) {
  UsageMasks m{Eigen::VectorXd::Zero(num_medications), Eigen::VectorXd::Ones(num_medications)};
  const auto total = static_cast<double>(history.size() + 1);  // T
  for (std::size_t i = 0; i < history.size(); ++i) {
    check_range(history[i], num_medications);
    const double age = total - static_cast<double>(i + 1);
    const double weight = scale * std::exp(-rate * age);
    for (int j : history[i]) {
      m.used(j) += weight;
      m.unused(j) = 0.0;
    }
  }
  return m;
}

MedicationEncoder MedicationEncoder::create(ParameterStore& store, Parameter& med_embedding,
                                            bool adaptive, TemporalMode mode, int dim, int split_n,
                                            int state_size, Rng& rng) {
  MedicationEncoder e;
  e.adaptive_ = adaptive;
  e.dim_ = dim;
  e.embedding_ = &med_embedding;
  const double bound = 1.0 / std::sqrt(dim);
  if (adaptive) {
    e.ptl_old_ = TemporalEncoder::create(store, "arm.ptl_old", mode, dim, split_n, state_size, rng);
    e.ptl_new_ = TemporalEncoder::create(store, "arm.ptl_new", mode, dim, split_n, state_size, rng);
    e.w_old_ = &store.add("arm.w_old", uniform_matrix(2 * split_n, dim, bound, rng));
    e.w_new_ = &store.add("arm.w_new", uniform_matrix(2 * split_n, dim, bound, rng));
    e.alpha_ = &store.add("arm.alpha", Matrix::Constant(1, 1, inverse_softplus(1.0)));
    e.beta_ = &store.add("arm.beta", Matrix::Constant(1, 1, inverse_softplus(0.1)));
  } else {
    e.ptl_old_ = TemporalEncoder::create(store, "med.ptl", mode, dim, split_n, state_size, rng);
    e.w_old_ = &store.add("med.w", uniform_matrix(2 * split_n, dim, bound, rng));
  }
  return e;
}

std::pair<Var, Var> MedicationEncoder::masks(Graph& g, std::span<const CodeSet> history) const {
  const int num_meds = num_medications();
  const auto h = static_cast<Eigen::Index>(history.size());
  Matrix unused = Matrix::Ones(num_meds, 1);
  if (h == 0) return {g.constant(Matrix::Zero(num_meds, 1)), g.constant(std::move(unused))};

  Matrix indicator = Matrix::Zero(num_meds, h);
  Matrix ages(1, h);
  for (Eigen::Index i = 0; i < h; ++i) {
    for (int j : history[static_cast<std::size_t>(i)]) {
      indicator(j, i) = 1.0;
      unused(j, 0) = 0.0;
    }
    ages(0, i) = static_cast<double>(h - i);  // T - i with 1-based i
  }
  Var rate = softplus(g.param(*beta_));
  Var decay = exp(scale(g.constant(std::move(ages)), neg(rate)));
  Var used = scale(matmul(g.constant(std::move(indicator)), transpose(decay)),
                   softplus(g.param(*alpha_)));
  return {used, g.constant(std::move(unused))};
}

Var MedicationEncoder::gate(Graph& g, Var table, const TemporalEncoder& enc, Parameter& w,
                            const std::vector<CodeSet>& recent_first) const {
  Var seq = embedding_bag(table, recent_first);
  Var h = enc(g, seq);  // 2N x dim
  Var logits = matmul(matmul(table, transpose(h)), g.param(w));
  return softmax(scale(logits, 1.0 / std::sqrt(static_cast<double>(dim_))), 1);
}

Var MedicationEncoder::operator()(Graph& g, std::span<const CodeSet> history) const {
  Var table = g.param(*embedding_);
  if (!adaptive_) {
    for (const CodeSet& s : history) check_range(s, num_medications());
    Var q = gate(g, table, ptl_old_, *w_old_, reversed(history));
    return hadamard(table, q);
  }
  const MedSplit split = split_medications(history, num_medications());
  Var q_old = gate(g, table, ptl_old_, *w_old_, reversed(split.old_seq));
  Var q_new = gate(g, table, ptl_new_, *w_new_, reversed(split.new_seq));
  auto [used, unused] = masks(g, history);
  return hadamard(table, add(scale_rows(q_old, used), scale_rows(q_new, unused)));
}

}  // namespace armr
