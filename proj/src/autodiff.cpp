#include "armr/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace armr {

std::string shape_string(const Matrix& m) {
  std::ostringstream os;
  os << "[" << m.rows() << " x " << m.cols() << "]";
  return os.str();
}

Parameter::Parameter(std::string n, Matrix v)
    : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

Parameter& ParameterStore::add(std::string name, Matrix value) {
  if (find(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  params_.push_back(std::make_unique<Parameter>(std::move(name), std::move(value)));
  return *params_.back();
}

Parameter* ParameterStore::find(const std::string& name) {
  for (auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

const Parameter* ParameterStore::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

std::vector<std::string> ParameterStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p->name);
  return out;
}

const Matrix& Var::value() const { return graph->value(id); }

// ---- Graph -------------------------------------------------------------------

Var Graph::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Graph::param(Parameter& p) {
  for (const auto& [ptr, id] : param_nodes_)
    if (ptr == &p) return {this, id};
  Node n;
  n.param = &p;
  n.requires_grad = track_;
  nodes_.push_back(std::move(n));
  int id = static_cast<int>(nodes_.size() - 1);
  param_nodes_.emplace_back(&p, id);
  return {this, id};
}

Var Graph::record(Matrix value, std::vector<int> inputs, Backward fn) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                [this](int i) { return nodes_[i].requires_grad; });
  n.inputs = std::move(inputs);
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

const Matrix& Graph::value(int id) const {
  const Node& n = nodes_[id];
  return n.param ? n.param->value : n.value;
}

Matrix& Graph::grad_buffer(int id) {
  Node& n = nodes_[id];
  if (n.param) return n.param->grad;
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Graph::backward(Var loss) {
  if (loss.graph != this) throw std::invalid_argument("backward: loss belongs to another graph");
  const Matrix& lv = value(loss.id);
  if (lv.rows() != 1 || lv.cols() != 1)
    throw ShapeError("backward: loss must be 1 x 1, got " + shape_string(lv));
  if (!nodes_[loss.id].requires_grad) return;
  accumulate(loss.id, Matrix::Ones(1, 1));
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.param || !n.backward || n.grad.size() == 0) continue;
    n.backward(*this, n.value, n.grad);
  }
}

// ---- primitives ----------------------------------------------------------------

namespace {

void require_same(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                     shape_string(b));
}

void require_same_graph(Var a, Var b) {
  if (a.graph != b.graph) throw std::invalid_argument("operands belong to different graphs");
}

template <typename F>
Var unary(Var a, Matrix out, F&& local_grad) {
  int ia = a.id;
  return a.graph->record(std::move(out), {ia},
                         [ia, local_grad](Graph& g, const Matrix& y, const Matrix& gy) {
                           g.accumulate(ia, local_grad(g.value(ia), y, gy));
                         });
}

}  // namespace

Var matmul(Var a, Var b) {
  require_same_graph(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows())
    throw ShapeError("matmul: inner extents disagree " + shape_string(av) + " x " +
                     shape_string(bv));
  int ia = a.id, ib = b.id;
  return a.graph->record(av * bv, {ia, ib}, [ia, ib](Graph& g, const Matrix&, const Matrix& gy) {
    if (g.requires_grad(ia)) g.accumulate(ia, gy * g.value(ib).transpose());
    if (g.requires_grad(ib)) g.accumulate(ib, g.value(ia).transpose() * gy);
  });
}

namespace {

Var add_signed(Var a, Var b, double sign, const char* op) {
  require_same_graph(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  int ia = a.id, ib = b.id;
  if (av.rows() == bv.rows() && av.cols() == bv.cols()) {
    return a.graph->record(av + sign * bv, {ia, ib},
                           [ia, ib, sign](Graph& g, const Matrix&, const Matrix& gy) {
                             g.accumulate(ia, gy);
                             g.accumulate(ib, sign * gy);
                           });
  }
  if (bv.rows() == 1 && bv.cols() == av.cols()) {
    Matrix out = av;
    out.rowwise() += sign * bv.row(0);
    return a.graph->record(std::move(out), {ia, ib},
                           [ia, ib, sign](Graph& g, const Matrix&, const Matrix& gy) {
                             g.accumulate(ia, gy);
                             g.accumulate(ib, sign * gy.colwise().sum());
                           });
  }
  if (av.rows() == 1 && av.cols() == bv.cols()) {
    Matrix out = sign * bv;
    out.rowwise() += av.row(0);
    return a.graph->record(std::move(out), {ia, ib},
                           [ia, ib, sign](Graph& g, const Matrix&, const Matrix& gy) {
                             g.accumulate(ia, gy.colwise().sum());
                             g.accumulate(ib, sign * gy);
                           });
  }
  throw ShapeError(std::string(op) + ": cannot broadcast " + shape_string(av) + " with " +
                   shape_string(bv));
}

}  // namespace

Var add(Var a, Var b) { return add_signed(a, b, 1.0, "add"); }
Var sub(Var a, Var b) { return add_signed(a, b, -1.0, "sub"); }

Var neg(Var a) { return scale(a, -1.0); }

Var hadamard(Var a, Var b) {
  require_same_graph(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  require_same("hadamard", av, bv);
  int ia = a.id, ib = b.id;
  return a.graph->record(av.cwiseProduct(bv), {ia, ib},
                         [ia, ib](Graph& g, const Matrix&, const Matrix& gy) {
                           if (g.requires_grad(ia)) g.accumulate(ia, gy.cwiseProduct(g.value(ib)));
                           if (g.requires_grad(ib)) g.accumulate(ib, gy.cwiseProduct(g.value(ia)));
                         });
}

Var scale(Var a, double c) {
  return unary(a, c * a.value(), [c](const Matrix&, const Matrix&, const Matrix& gy) {
    return Matrix(c * gy);
  });
}

Var scale(Var a, Var s) {
  require_same_graph(a, s);
  const Matrix& sv = s.value();
  if (sv.rows() != 1 || sv.cols() != 1)
    throw ShapeError("scale: scalar operand must be 1 x 1, got " + shape_string(sv));
  int ia = a.id, is = s.id;
  return a.graph->record(sv(0, 0) * a.value(), {ia, is},
                         [ia, is](Graph& g, const Matrix&, const Matrix& gy) {
                           const double sc = g.value(is)(0, 0);
                           if (g.requires_grad(ia)) g.accumulate(ia, sc * gy);
                           if (g.requires_grad(is)) {
                             Matrix d(1, 1);
                             d(0, 0) = gy.cwiseProduct(g.value(ia)).sum();
                             g.accumulate(is, d);
                           }
                         });
}

Var scale_rows(Var x, Var w) {
  require_same_graph(x, w);
  const Matrix& xv = x.value();
  const Matrix& wv = w.value();
  if (wv.cols() != 1 || wv.rows() != xv.rows())
    throw ShapeError("scale_rows: weights " + shape_string(wv) + " do not match rows of " +
                     shape_string(xv));
  int ix = x.id, iw = w.id;
  Matrix out = wv.col(0).asDiagonal() * xv;
  return x.graph->record(std::move(out), {ix, iw},
                         [ix, iw](Graph& g, const Matrix&, const Matrix& gy) {
                           if (g.requires_grad(ix))
                             g.accumulate(ix, g.value(iw).col(0).asDiagonal() * gy);
                           if (g.requires_grad(iw))
                             g.accumulate(iw, gy.cwiseProduct(g.value(ix)).rowwise().sum());
                         });
}

Var transpose(Var a) {
  return unary(a, a.value().transpose(), [](const Matrix&, const Matrix&, const Matrix& gy) {
    return Matrix(gy.transpose());
  });
}

Var sigmoid(Var a) {
  Matrix y = a.value().unaryExpr([](double v) {
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
  return unary(a, std::move(y), [](const Matrix&, const Matrix& y, const Matrix& gy) {
    return Matrix(gy.array() * y.array() * (1.0 - y.array()));
  });
}

Var relu(Var a) {
  return unary(a, a.value().cwiseMax(0.0), [](const Matrix& x, const Matrix&, const Matrix& gy) {
    return Matrix((x.array() > 0.0).select(gy, 0.0));
  });
}

Var tanh(Var a) {
  return unary(a, a.value().array().tanh().matrix(),
               [](const Matrix&, const Matrix& y, const Matrix& gy) {
                 return Matrix(gy.array() * (1.0 - y.array().square()));
               });
}

Var exp(Var a) {
  return unary(a, a.value().array().exp().matrix(),
               [](const Matrix&, const Matrix& y, const Matrix& gy) {
                 return Matrix(gy.cwiseProduct(y));
               });
}

Var softplus(Var a) {
  Matrix y = a.value().unaryExpr(
      [](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); });
  return unary(a, std::move(y), [](const Matrix& x, const Matrix&, const Matrix& gy) {
    Matrix s = x.unaryExpr([](double v) {
      if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
      const double e = std::exp(v);
      return e / (1.0 + e);
    });
    return Matrix(gy.cwiseProduct(s));
  });
}

Var softmax(Var x, int axis) {
  if (axis != 0 && axis != 1)
    throw ShapeError("softmax: axis must be 0 or 1, got " + std::to_string(axis));
  const Matrix& xv = x.value();
  Matrix y(xv.rows(), xv.cols());
  if (axis == 1) {
    for (Eigen::Index r = 0; r < xv.rows(); ++r) {
      auto e = (xv.row(r).array() - xv.row(r).maxCoeff()).exp();
      y.row(r) = e / e.sum();
    }
  } else {
    for (Eigen::Index c = 0; c < xv.cols(); ++c) {
      auto e = (xv.col(c).array() - xv.col(c).maxCoeff()).exp();
      y.col(c) = e / e.sum();
    }
  }
  return unary(x, std::move(y), [axis](const Matrix&, const Matrix& y, const Matrix& gy) {
    Matrix gyy = gy.cwiseProduct(y);
    Matrix gx = gyy;
    if (axis == 1) {
      Eigen::VectorXd s = gyy.rowwise().sum();
      gx -= s.asDiagonal() * y;
    } else {
      Eigen::RowVectorXd s = gyy.colwise().sum();
      gx -= y * s.asDiagonal();
    }
    return gx;
  });
}

Var layer_norm(Var x, Var gain, Var bias) {
  const Matrix& xv = x.value();
  const Matrix& gv = gain.value();
  const Matrix& bv = bias.value();
  const Eigen::Index n = xv.cols();
  if (gv.rows() != 1 || gv.cols() != n || bv.rows() != 1 || bv.cols() != n)
    throw ShapeError("layer_norm: gain " + shape_string(gv) + " / bias " + shape_string(bv) +
                     " do not match " + shape_string(xv));
  Matrix xhat(xv.rows(), n);
  Eigen::VectorXd inv_std(xv.rows());
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    const double mu = xv.row(r).mean();
    const double var = (xv.row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + kLayerNormEpsilon);
    xhat.row(r) = (xv.row(r).array() - mu) * inv_std(r);
  }
  Matrix y = xhat.array().rowwise() * gv.row(0).array();
  y.rowwise() += bv.row(0);
  int ix = x.id, ig = gain.id, ib = bias.id;
  return x.graph->record(
      std::move(y), {ix, ig, ib},
      [ix, ig, ib, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          Graph& g, const Matrix&, const Matrix& gy) {
        if (g.requires_grad(ig)) g.accumulate(ig, gy.cwiseProduct(xhat).colwise().sum());
        if (g.requires_grad(ib)) g.accumulate(ib, gy.colwise().sum());
        if (g.requires_grad(ix)) {
          Matrix gxhat = gy.array().rowwise() * g.value(ig).row(0).array();
          Matrix gx(gxhat.rows(), gxhat.cols());
          for (Eigen::Index r = 0; r < gxhat.rows(); ++r) {
            const double m1 = gxhat.row(r).mean();
            const double m2 = gxhat.row(r).dot(xhat.row(r)) / static_cast<double>(gxhat.cols());
            gx.row(r) = inv_std(r) * (gxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
          }
          g.accumulate(ix, gx);
        }
      });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  Graph* graph = parts[0].graph;
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  std::vector<int> ids;
  std::vector<Eigen::Index> offsets;
  for (const Var& p : parts) {
    if (p.graph != graph) throw std::invalid_argument("concat_rows: mixed graphs");
    if (p.cols() != cols)
      throw ShapeError("concat_rows: column mismatch " + shape_string(parts[0].value()) + " vs " +
                       shape_string(p.value()));
    ids.push_back(p.id);
    offsets.push_back(rows);
    rows += p.rows();
  }
  Matrix out(rows, cols);
  for (std::size_t i = 0; i < parts.size(); ++i)
    if (parts[i].rows() > 0) out.middleRows(offsets[i], parts[i].rows()) = parts[i].value();
  std::vector<int> inputs = ids;
  return graph->record(std::move(out), std::move(inputs),
                       [ids, offsets](Graph& g, const Matrix&, const Matrix& gy) {
                         for (std::size_t i = 0; i < ids.size(); ++i) {
                           const Eigen::Index r = g.value(ids[i]).rows();
                           if (r > 0 && g.requires_grad(ids[i]))
                             g.accumulate(ids[i], gy.middleRows(offsets[i], r));
                         }
                       });
}

Var concat_rows(std::initializer_list<Var> parts) {
  return concat_rows(std::span<const Var>(parts.begin(), parts.size()));
}

Var slice_rows(Var x, Eigen::Index begin, Eigen::Index count) {
  const Matrix& xv = x.value();
  if (begin < 0 || count < 0 || begin + count > xv.rows())
    throw ShapeError("slice_rows: rows [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of " + shape_string(xv));
  int ix = x.id;
  return x.graph->record(xv.middleRows(begin, count), {ix},
                         [ix, begin, count](Graph& g, const Matrix&, const Matrix& gy) {
                           if (count > 0) g.grad_buffer(ix).middleRows(begin, count) += gy;
                         });
}

Var reverse_rows(Var x) {
  return unary(x, x.value().colwise().reverse(),
               [](const Matrix&, const Matrix&, const Matrix& gy) {
                 return Matrix(gy.colwise().reverse());
               });
}

Var reshape(Var x, Eigen::Index rows, Eigen::Index cols) {
  const Matrix& xv = x.value();
  if (rows * cols != xv.size())
    throw ShapeError("reshape: cannot view " + shape_string(xv) + " as [" + std::to_string(rows) +
                     " x " + std::to_string(cols) + "]");
  Matrix out = Eigen::Map<const Matrix>(xv.data(), rows, cols);
  const Eigen::Index r0 = xv.rows(), c0 = xv.cols();
  return unary(x, std::move(out), [r0, c0](const Matrix&, const Matrix&, const Matrix& gy) {
    return Matrix(Eigen::Map<const Matrix>(gy.data(), r0, c0));
  });
}

Var sum(Var x) {
  Matrix s(1, 1);
  s(0, 0) = x.value().sum();
  return unary(x, std::move(s), [](const Matrix& xv, const Matrix&, const Matrix& gy) {
    return Matrix(Matrix::Constant(xv.rows(), xv.cols(), gy(0, 0)));
  });
}

Var mean(Var x) {
  const double n = static_cast<double>(x.value().size());
  if (n == 0) throw ShapeError("mean: empty tensor");
  Matrix s(1, 1);
  s(0, 0) = x.value().sum() / n;
  return unary(x, std::move(s), [n](const Matrix& xv, const Matrix&, const Matrix& gy) {
    return Matrix(Matrix::Constant(xv.rows(), xv.cols(), gy(0, 0) / n));
  });
}

Var gather_rows(Var x, std::span<const int> rows) {
  const Matrix& xv = x.value();
  Matrix out(static_cast<Eigen::Index>(rows.size()), xv.cols());
  std::vector<int> idx(rows.begin(), rows.end());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= xv.rows())
      throw ShapeError("gather_rows: row " + std::to_string(idx[i]) + " out of " +
                       shape_string(xv));
    out.row(static_cast<Eigen::Index>(i)) = xv.row(idx[i]);
  }
  int ix = x.id;
  return x.graph->record(std::move(out), {ix},
                         [ix, idx = std::move(idx)](Graph& g, const Matrix&, const Matrix& gy) {
                           Matrix& gx = g.grad_buffer(ix);
                           for (std::size_t i = 0; i < idx.size(); ++i)
                             gx.row(idx[i]) += gy.row(static_cast<Eigen::Index>(i));
                         });
}

Var embedding_bag(Var table, std::span<const std::vector<int>> sets) {
  const Matrix& tv = table.value();
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(sets.size()), tv.cols());
  std::vector<std::vector<int>> copy(sets.begin(), sets.end());
  for (std::size_t r = 0; r < copy.size(); ++r)
    for (int k : copy[r]) {
      if (k < 0 || k >= tv.rows())
        throw ShapeError("embedding_bag: index " + std::to_string(k) + " out of table " +
                         shape_string(tv));
      out.row(static_cast<Eigen::Index>(r)) += tv.row(k);
    }
  int it = table.id;
  return table.graph->record(
      std::move(out), {it}, [it, copy = std::move(copy)](Graph& g, const Matrix&, const Matrix& gy) {
        Matrix& gt = g.grad_buffer(it);
        for (std::size_t r = 0; r < copy.size(); ++r)
          for (int k : copy[r]) gt.row(k) += gy.row(static_cast<Eigen::Index>(r));
      });
}

Var cosine_rows(Var v, Var m) {
  require_same_graph(v, m);
  const Matrix& vv = v.value();
  const Matrix& mv = m.value();
  if (vv.rows() != 1 || vv.cols() != mv.cols())
    throw ShapeError("cosine_rows: " + shape_string(vv) + " vs " + shape_string(mv));
  constexpr double kFloor = 1e-12;
  const double vnorm = std::max(vv.norm(), kFloor);
  Eigen::VectorXd mnorm = mv.rowwise().norm().cwiseMax(kFloor);
  Eigen::VectorXd dots = mv * vv.row(0).transpose();
  Matrix out = (dots.array() / (mnorm.array() * vnorm)).matrix().transpose();
  int iv = v.id, im = m.id;
  return v.graph->record(
      out, {iv, im},
      [iv, im, vnorm, mnorm](Graph& g, const Matrix& y, const Matrix& gy) {
        const Matrix& vv = g.value(iv);
        const Matrix& mv = g.value(im);
        // d cos / d v = m_j / (|m_j||v|) - cos_j v / |v|^2
        if (g.requires_grad(iv)) {
          Eigen::VectorXd w = gy.row(0).transpose().cwiseQuotient(mnorm) / vnorm;
          Matrix gv = w.transpose() * mv;
          gv -= (gy.row(0).dot(y.row(0)) / (vnorm * vnorm)) * vv;
          g.accumulate(iv, gv);
        }
        // d cos_j / d m_j = v / (|m_j||v|) - cos_j m_j / |m_j|^2
        if (g.requires_grad(im)) {
          Eigen::VectorXd a = gy.row(0).transpose().cwiseQuotient(mnorm) / vnorm;
          Eigen::VectorXd b =
              (gy.row(0).transpose().cwiseProduct(y.row(0).transpose())).cwiseQuotient(
                  mnorm.cwiseProduct(mnorm));
          Matrix gm = a * vv.row(0);
          gm -= b.asDiagonal() * mv;
          g.accumulate(im, gm);
        }
      });
}

}  // namespace armr

namespace armr {

std::map<std::string, Matrix> grad(Var loss, ParameterStore& params) {
  params.zero_grad();
  loss.graph->backward(loss);
  std::map<std::string, Matrix> out;
  for (std::size_t i = 0; i < params.size(); ++i) out.emplace(params[i].name, params[i].grad);
  return out;
}

}  // namespace armr
