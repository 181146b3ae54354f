#pragma once

// Straight-line re-implementations of the model's forward computations on
// plain Eigen matrices. They read parameters by name and share no code with
// the library beyond the Matrix type, so they serve as independent oracles.

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "armr/autodiff.hpp"
#include "armr/records.hpp"

namespace ref {

using armr::Matrix;
using Sets = std::vector<std::vector<int>>;

inline const Matrix& P(const armr::ParameterStore& s, const std::string& name) {
  const armr::Parameter* p = s.find(name);
  if (!p) throw std::runtime_error("reference: no parameter " + name);
  return p->value;
}

inline bool has(const armr::ParameterStore& s, const std::string& name) {
  return s.find(name) != nullptr;
}

inline double softplus(double x) { return x > 30 ? x : std::log(1.0 + std::exp(x)); }

inline Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double mu = 0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) mu += x(r, c);
    mu /= static_cast<double>(x.cols());
    double var = 0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) var += (x(r, c) - mu) * (x(r, c) - mu);
    var /= static_cast<double>(x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c)
      out(r, c) = (x(r, c) - mu) / std::sqrt(var + 1e-5) * gain(0, c) + bias(0, c);
  }
  return out;
}

inline Matrix softmax_rows(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double mx = x(r, 0);
    for (Eigen::Index c = 1; c < x.cols(); ++c) mx = std::max(mx, x(r, c));
    double z = 0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) z += std::exp(x(r, c) - mx);
    for (Eigen::Index c = 0; c < x.cols(); ++c) out(r, c) = std::exp(x(r, c) - mx) / z;
  }
  return out;
}

inline Matrix affine(const armr::ParameterStore& s, const std::string& name, const Matrix& x) {
  Matrix y = x * P(s, name + ".weight");
  for (Eigen::Index r = 0; r < y.rows(); ++r) y.row(r) += P(s, name + ".bias").row(0);
  return y;
}

inline Matrix feed_forward(const armr::ParameterStore& s, const std::string& name, const Matrix& x) {
  Matrix h = affine(s, name + ".0", x);
  for (Eigen::Index i = 0; i < h.size(); ++i) h.data()[i] = std::max(0.0, h.data()[i]);
  return affine(s, name + ".1", h);
}

/// Step-by-step selective recurrence, channel by channel, state by state.
inline Matrix ssm_naive(const Matrix& x, const Matrix& wd, const Matrix& bd, const Matrix& wb,
                        const Matrix& bb, const Matrix& wc, const Matrix& bc, const Matrix& a_log,
                        const Matrix& d) {
  const Eigen::Index len = x.rows(), dim = x.cols(), n = a_log.cols();
  Matrix y = Matrix::Zero(len, dim);
  std::vector<std::vector<double>> s(static_cast<std::size_t>(dim),
                                     std::vector<double>(static_cast<std::size_t>(n), 0.0));
  for (Eigen::Index t = 0; t < len; ++t) {
    std::vector<double> bt(static_cast<std::size_t>(n)), ct(static_cast<std::size_t>(n));
    for (Eigen::Index k = 0; k < n; ++k) {
      double vb = bb(0, k), vc = bc(0, k);
      for (Eigen::Index i = 0; i < dim; ++i) {
        vb += x(t, i) * wb(i, k);
        vc += x(t, i) * wc(i, k);
      }
      bt[k] = vb;
      ct[k] = vc;
    }
    for (Eigen::Index c = 0; c < dim; ++c) {
      double pre = bd(0, c);
      for (Eigen::Index i = 0; i < dim; ++i) pre += x(t, i) * wd(i, c);
      const double delta = softplus(pre);
      double out = d(0, c) * x(t, c);
      for (Eigen::Index k = 0; k < n; ++k) {
        const double a = -std::exp(a_log(c, k));
        s[c][k] = std::exp(delta * a) * s[c][k] + delta * bt[k] * x(t, c);
        out += ct[k] * s[c][k];
      }
      y(t, c) = out;
    }
  }
  return y;
}

inline Matrix ssm(const armr::ParameterStore& s, const std::string& name, const Matrix& x) {
  return ssm_naive(x, P(s, name + ".delta.weight"), P(s, name + ".delta.bias"),
                   P(s, name + ".b.weight"), P(s, name + ".b.bias"), P(s, name + ".c.weight"),
                   P(s, name + ".c.bias"), P(s, name + ".a_log"), P(s, name + ".d"));
}

inline Matrix reverse(const Matrix& x) { return x.colwise().reverse(); }

inline Matrix stack(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() + b.rows(), a.cols());
  out << a, b;
  return out;
}

inline Matrix first_rows_padded(const Matrix& x, int n) {
  Matrix out = Matrix::Zero(n, x.cols());
  const Eigen::Index k = std::min<Eigen::Index>(n, x.rows());
  out.topRows(k) = x.topRows(k);
  return out;
}

inline Matrix fuse(const armr::ParameterStore& s, const std::string& name, const Matrix& h_near,
                   const Matrix& h_far) {
  if (h_far.rows() == 0) return layer_norm(h_near, P(s, name + ".ln_fuse.gain"), P(s, name + ".ln_fuse.bias"));
  const Matrix att = softmax_rows(h_near * h_far.transpose());
  return layer_norm(h_near + att * h_far, P(s, name + ".ln_fuse.gain"), P(s, name + ".ln_fuse.bias"));
}

/// Temporal encoder output (2N x dim) for a most-recent-first sequence.
/// `kind` is one of "piecewise", "near", "far", "rnn".
inline Matrix temporal(const armr::ParameterStore& s, const std::string& name, const Matrix& seq,
                       int n, const std::string& kind) {
  const Eigen::Index dim = seq.cols();
  if (kind == "rnn") {
    Matrix h = Matrix::Zero(1, dim);
    for (Eigen::Index t = seq.rows() - 1; t >= 0; --t) {
      Matrix pre = seq.row(t) * P(s, name + ".rnn_in.weight") + P(s, name + ".rnn_in.bias") +
                   h * P(s, name + ".rnn_rec");
      h = pre.array().tanh().matrix();
    }
    const Matrix flat = affine(s, name + ".rnn_out", h);
    Matrix out(2 * n, dim);
    for (Eigen::Index r = 0; r < 2 * n; ++r)
      for (Eigen::Index c = 0; c < dim; ++c) out(r, c) = flat(0, r * dim + c);
    return out;
  }
  if (kind == "far") {
    const Matrix all = seq.rows() ? reverse(ssm(s, name + ".ssm", reverse(seq))) : Matrix(0, dim);
    const Matrix h_near = layer_norm(first_rows_padded(all, n), P(s, name + ".ln_near.gain"),
                                     P(s, name + ".ln_near.bias"));
    return stack(h_near, fuse(s, name, h_near, all));
  }
  const Matrix near = first_rows_padded(seq, n);
  const Matrix h_near = layer_norm(near + feed_forward(s, name + ".ff_near", near),
                                   P(s, name + ".ln_near.gain"), P(s, name + ".ln_near.bias"));
  Matrix h_far(0, dim);
  if (kind == "piecewise" && seq.rows() > n)
    h_far = ssm(s, name + ".ssm", reverse(seq.bottomRows(seq.rows() - n)));
  return stack(h_near, fuse(s, name, h_near, h_far));
}

/// Row r = sum of table rows in sets[r], computed as multi-hot times table.
inline Matrix embed(const Matrix& table, const Sets& sets) {
  Matrix hot = Matrix::Zero(static_cast<Eigen::Index>(sets.size()), table.rows());
  for (std::size_t r = 0; r < sets.size(); ++r)
    for (int c : sets[r]) hot(static_cast<Eigen::Index>(r), c) = 1.0;
  return hot * table;
}

inline Sets reversed(const Sets& s) { return Sets(s.rbegin(), s.rend()); }

inline std::string kind_of(const std::string& variant) {
  if (variant == "no-ptl") return "rnn";
  if (variant == "no-ptl-l") return "near";
  if (variant == "no-ptl-n") return "far";
  return "piecewise";
}

/// Patient representation (4N x dim) from chronological diagnosis/procedure sets.
inline Matrix patient(const armr::ParameterStore& s, const Sets& diags, const Sets& procs, int n,
                      const std::string& kind) {
  const Matrix d = temporal(s, "encoder.ptl_d", embed(P(s, "encoder.diag_embedding"), reversed(diags)), n, kind);
  const Matrix p = temporal(s, "encoder.ptl_p", embed(P(s, "encoder.proc_embedding"), reversed(procs)), n, kind);
  return stack(d, p);
}

/// Responsive medication embedding for a chronological history m_1..m_{T-1}.
inline Matrix medication(const armr::ParameterStore& s, const Sets& history, int n,
                         const std::string& kind) {
  const Matrix& e = P(s, "med.embedding");
  const double dim = static_cast<double>(e.cols());
  auto gate = [&](const std::string& enc, const std::string& w, const Sets& seq) {
    const Matrix h = temporal(s, enc, embed(e, reversed(seq)), n, kind);
    return softmax_rows(e * h.transpose() * P(s, w) / std::sqrt(dim));
  };
  if (!has(s, "arm.alpha")) return e.cwiseProduct(gate("med.ptl", "med.w", history));

  // Reused / new split by running union.
  Sets old_seq, new_seq;
  std::set<int> seen;
  for (const auto& m : history) {
    std::vector<int> o, nw;
    for (int j : m) (seen.count(j) ? o : nw).push_back(j);
    old_seq.push_back(o);
    new_seq.push_back(nw);
    seen.insert(m.begin(), m.end());
  }
  const double alpha = softplus(P(s, "arm.alpha")(0, 0));
  const double beta = softplus(P(s, "arm.beta")(0, 0));
  const Eigen::Index meds = e.rows();
  const double total = static_cast<double>(history.size()) + 1.0;
  Eigen::VectorXd used = Eigen::VectorXd::Zero(meds), unused = Eigen::VectorXd::Ones(meds);
  for (std::size_t i = 0; i < history.size(); ++i)
    for (int j : history[i]) {
      used(j) += alpha * std::exp(-beta * (total - static_cast<double>(i + 1)));
      unused(j) = 0.0;
    }
  const Matrix q_o = gate("arm.ptl_old", "arm.w_old", old_seq);
  const Matrix q_n = gate("arm.ptl_new", "arm.w_new", new_seq);
  Matrix mix(meds, e.cols());
  for (Eigen::Index j = 0; j < meds; ++j) mix.row(j) = used(j) * q_o.row(j) + unused(j) * q_n.row(j);
  return e.cwiseProduct(mix);
}

/// Probabilities for visit t (1-based) of `record`.
inline Matrix forward(const armr::ParameterStore& s, const armr::PatientRecord& record, int t, int n,
                      const std::string& variant) {
  const std::string kind = kind_of(variant);
  Sets diags, procs, meds;
  for (int i = 0; i < t; ++i) {
    diags.push_back(record.visits[i].diagnoses);
    procs.push_back(record.visits[i].procedures);
    if (i < t - 1) meds.push_back(record.visits[i].medications);
  }
  const Matrix h = patient(s, diags, procs, n, kind);
  Matrix flat(1, h.size());
  for (Eigen::Index r = 0; r < h.rows(); ++r)
    for (Eigen::Index c = 0; c < h.cols(); ++c) flat(0, r * h.cols() + c) = h(r, c);
  const Matrix o1 = feed_forward(s, "head.o1", flat);
  const Matrix v = feed_forward(s, "head.o2", flat);
  const Matrix em = medication(s, meds, n, kind);
  const double w1 = P(s, "head.w1")(0, 0), w2 = P(s, "head.w2")(0, 0);
  Matrix p(1, em.rows());
  for (Eigen::Index j = 0; j < em.rows(); ++j) {
    const double cosv =
        v.row(0).dot(em.row(j)) / (std::max(v.norm(), 1e-12) * std::max(em.row(j).norm(), 1e-12));
    p(0, j) = 1.0 / (1.0 + std::exp(-(w1 * o1(0, j) + w2 * cosv)));
  }
  return p;
}

}  // namespace ref
