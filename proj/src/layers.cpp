#include "armr/layers.hpp"

#include <cmath>

namespace armr {

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
  return m;
}

Linear Linear::create(ParameterStore& store, const std::string& name, int in, int out, Rng& rng) {
  Linear l;
  l.weight = &store.add(name + ".weight", uniform_matrix(in, out, 1.0 / std::sqrt(in), rng));
  l.bias = &store.add(name + ".bias", Matrix::Zero(1, out));
  return l;
}

Var Linear::operator()(Graph& g, Var x) const {
  return add(matmul(x, g.param(*weight)), g.param(*bias));
}

FeedForward FeedForward::create(ParameterStore& store, const std::string& name, int in,
                                int hidden, int out, Rng& rng) {
  return {Linear::create(store, name + ".0", in, hidden, rng),
          Linear::create(store, name + ".1", hidden, out, rng)};
}

Var FeedForward::operator()(Graph& g, Var x) const { return second(g, relu(first(g, x))); }

LayerNormParams LayerNormParams::create(ParameterStore& store, const std::string& name, int dim) {
  return {&store.add(name + ".gain", Matrix::Ones(1, dim)),
          &store.add(name + ".bias", Matrix::Zero(1, dim))};
}

Var LayerNormParams::operator()(Graph& g, Var x) const {
  return layer_norm(x, g.param(*gain), g.param(*bias));
}

}  // namespace armr
