#include "armr/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace armr {

Matrix multi_hot(const CodeSet& codes, int n) {
  Matrix m = Matrix::Zero(1, n);
  for (int c : codes) {
    if (c < 0 || c >= n) throw std::out_of_range("multi_hot: index " + std::to_string(c));
    m(0, c) = 1.0;
  }
  return m;
}

namespace {

void check_target(const char* op, const Matrix& probs, const Matrix& target) {
  if (probs.rows() != 1 || target.rows() != 1 || probs.cols() != target.cols())
    throw ShapeError(std::string(op) + ": probabilities " + shape_string(probs) + " vs target " +
                     shape_string(target));
}

}  // namespace

Var bce_loss(Var probs, const Matrix& target) {
  const Matrix& p = probs.value();
  check_target("bce_loss", p, target);
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.cols(); ++i) {
    const double c = std::clamp(p(0, i), kProbabilityClamp, 1.0 - kProbabilityClamp);
    total -= target(0, i) * std::log(c) + (1.0 - target(0, i)) * std::log(1.0 - c);
  }
  int ip = probs.id;
  return probs.graph->record(
      Matrix::Constant(1, 1, total), {ip}, [ip, target](Graph& g, const Matrix&, const Matrix& gy) {
        const Matrix& p = g.value(ip);
        Matrix gp = Matrix::Zero(1, p.cols());
        for (Eigen::Index i = 0; i < p.cols(); ++i) {
          const double v = p(0, i);
          if (v < kProbabilityClamp || v > 1.0 - kProbabilityClamp) continue;
          gp(0, i) = gy(0, 0) * (-target(0, i) / v + (1.0 - target(0, i)) / (1.0 - v));
        }
        g.accumulate(ip, gp);
      });
}

Var multilabel_margin_loss(Var probs, const Matrix& target) {
  const Matrix& p = probs.value();
  check_target("multilabel_margin_loss", p, target);
  std::vector<Eigen::Index> pos, negs;
  for (Eigen::Index i = 0; i < p.cols(); ++i) (target(0, i) > 0.5 ? pos : negs).push_back(i);
  const double n = static_cast<double>(p.cols());
  double total = 0.0;
  for (auto i : pos)
    for (auto j : negs) total += std::max(0.0, 1.0 - (p(0, i) - p(0, j)));
  int ip = probs.id;
  return probs.graph->record(
      Matrix::Constant(1, 1, total / n), {ip},
      [ip, pos, negs, n](Graph& g, const Matrix&, const Matrix& gy) {
        const Matrix& p = g.value(ip);
        Matrix gp = Matrix::Zero(1, p.cols());
        const double w = gy(0, 0) / n;
        for (auto i : pos)
          for (auto j : negs)
            if (1.0 - (p(0, i) - p(0, j)) > 0.0) {
              gp(0, i) -= w;
              gp(0, j) += w;
            }
        g.accumulate(ip, gp);
      });
}

Var combined_loss(Var probs, const Matrix& target, double alpha) {
  if (alpha < 0.0 || alpha > 1.0)
    throw std::invalid_argument("combined_loss: alpha must lie in [0, 1]");
  return add(scale(bce_loss(probs, target), alpha),
             scale(multilabel_margin_loss(probs, target), 1.0 - alpha));
}

}  // namespace armr
