#include "armr/ssm.hpp"

#include <cmath>
#include <vector>

namespace armr {

SsmParams SsmParams::create(ParameterStore& store, const std::string& name, int dim,
                            int state_size, Rng& rng) {
  SsmParams p;
  p.dim = dim;
  p.state_size = state_size;
  Matrix a_log(dim, state_size);
  for (Eigen::Index i = 0; i < a_log.size(); ++i) a_log.data()[i] = std::log(rng.uniform(0.1, 1.0));
  p.a_log = &store.add(name + ".a_log", std::move(a_log));
  p.delta = Linear::create(store, name + ".delta", dim, dim, rng);
  p.delta.bias->value.setConstant(std::log(std::expm1(0.5)));
  p.input = Linear::create(store, name + ".b", dim, state_size, rng);
  p.output = Linear::create(store, name + ".c", dim, state_size, rng);
  p.skip = &store.add(name + ".d", Matrix::Ones(1, dim));
  return p;
}

Var selective_scan(Var x, Var delta, Var b, Var c, Var a, Var d) {
  const Matrix& xv = x.value();
  const Matrix& dv = delta.value();
  const Matrix& bv = b.value();
  const Matrix& cv = c.value();
  const Matrix& av = a.value();
  const Matrix& skip = d.value();
  const Eigen::Index len = xv.rows(), dim = xv.cols(), state = av.cols();
  if (dv.rows() != len || dv.cols() != dim || bv.rows() != len || bv.cols() != state ||
      cv.rows() != len || cv.cols() != state || av.rows() != dim || skip.rows() != 1 ||
      skip.cols() != dim)
    throw ShapeError("selective_scan: inconsistent shapes x" + shape_string(xv) + " delta" +
                     shape_string(dv) + " b" + shape_string(bv) + " c" + shape_string(cv) +
                     " a" + shape_string(av) + " d" + shape_string(skip));

  // states[t] holds s_t (dim x state); states[0] = 0.
  std::vector<Matrix> states(static_cast<std::size_t>(len) + 1, Matrix::Zero(dim, state));
  Matrix y(len, dim);
  for (Eigen::Index t = 0; t < len; ++t) {
    const Matrix decay = (dv.row(t).transpose().asDiagonal() * av).array().exp().matrix();
    const Eigen::VectorXd u = dv.row(t).transpose().cwiseProduct(xv.row(t).transpose());
    Matrix& s = states[t + 1];
    s = decay.cwiseProduct(states[t]) + u * bv.row(t);
    y.row(t) = (s * cv.row(t).transpose()).transpose() + skip.row(0).cwiseProduct(xv.row(t));
  }

  std::vector<int> ids = {x.id, delta.id, b.id, c.id, a.id, d.id};
  return x.graph->record(
      std::move(y), ids,
      [ids, states = std::move(states)](Graph& g, const Matrix&, const Matrix& gy) {
        const Matrix& xv = g.value(ids[0]);
        const Matrix& dv = g.value(ids[1]);
        const Matrix& bv = g.value(ids[2]);
        const Matrix& cv = g.value(ids[3]);
        const Matrix& av = g.value(ids[4]);
        const Matrix& skip = g.value(ids[5]);
        const Eigen::Index len = xv.rows(), dim = xv.cols(), state = av.cols();
        Matrix gx = Matrix::Zero(len, dim), gdelta = Matrix::Zero(len, dim);
        Matrix gb = Matrix::Zero(len, state), gc = Matrix::Zero(len, state);
        Matrix ga = Matrix::Zero(dim, state), gd = Matrix::Zero(1, dim);
        Matrix carry = Matrix::Zero(dim, state);  // dL/ds_t
        for (Eigen::Index t = len - 1; t >= 0; --t) {
          const Matrix& s = states[t + 1];
          const Matrix& s_prev = states[t];
          gc.row(t) += gy.row(t) * s;
          carry += gy.row(t).transpose() * cv.row(t);
          gd.row(0) += gy.row(t).cwiseProduct(xv.row(t));
          gx.row(t) += gy.row(t).cwiseProduct(skip.row(0));

          const Matrix decay = (dv.row(t).transpose().asDiagonal() * av).array().exp().matrix();
          const Matrix gdecay = carry.cwiseProduct(s_prev).cwiseProduct(decay);
          const Eigen::VectorXd carry_b = carry * bv.row(t).transpose();  // dim
          gdelta.row(t) += (gdecay.cwiseProduct(av).rowwise().sum() +
                            carry_b.cwiseProduct(xv.row(t).transpose()))
                               .transpose();
          ga += dv.row(t).transpose().asDiagonal() * gdecay;
          const Eigen::VectorXd u = dv.row(t).transpose().cwiseProduct(xv.row(t).transpose());
          gb.row(t) += u.transpose() * carry;
          gx.row(t) += dv.row(t).cwiseProduct(carry_b.transpose());
          carry = carry.cwiseProduct(decay);
        }
        g.accumulate(ids[0], gx);
        g.accumulate(ids[1], gdelta);
        g.accumulate(ids[2], gb);
        g.accumulate(ids[3], gc);
        g.accumulate(ids[4], ga);
        g.accumulate(ids[5], gd);
      });
}

Var ssm_scan(Graph& g, const SsmParams& p, Var x) {
  if (x.cols() != p.dim)
    throw ShapeError("ssm_scan: input " + shape_string(x.value()) + " does not have width " +
                     std::to_string(p.dim));
  if (x.rows() == 0) return g.constant(Matrix(0, p.dim));
  Var delta = softplus(p.delta(g, x));
  Var b = p.input(g, x);
  Var c = p.output(g, x);
  Var a = neg(exp(g.param(*p.a_log)));
  return selective_scan(x, delta, b, c, a, g.param(*p.skip));
}

}  // namespace armr
