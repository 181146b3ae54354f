#include "armr/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include "armr/rng.hpp"
#include "armr/ssm.hpp"

namespace armr {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
  return std::abs(analytic - numeric) / denom;
}

bool GradCheckReport::passed() const {
  return std::all_of(results.begin(), results.end(), [](const auto& r) { return r.passed; });
}

double GradCheckReport::max_error() const {
  double m = 0.0;
  for (const auto& r : results) m = std::max(m, r.max_error);
  return m;
}

nlohmann::json GradCheckReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : results)
    rows.push_back({{"name", r.name},
                    {"trials", r.trials},
                    {"entries", r.entries},
                    {"max_error", r.max_error},
                    {"passed", r.passed}});
  return {{"results", rows},
          {"passed", passed()},
          {"max_error", max_error()},
          {"step", kGradCheckStep},
          {"tolerance", kGradCheckTolerance},
          {"seconds", seconds}};
}

double check_gradient(const LossFn& loss, std::vector<Matrix> inputs, double step) {
  ParameterStore store;
  for (std::size_t i = 0; i < inputs.size(); ++i)
    store.add("x" + std::to_string(i), std::move(inputs[i]));

  auto evaluate = [&](bool track) {
    Graph g(track);
    std::vector<Var> leaves;
    for (std::size_t i = 0; i < store.size(); ++i) leaves.push_back(g.param(store[i]));
    Var out = loss(g, leaves);
    if (track) {
      store.zero_grad();
      g.backward(out);
    }
    return out.value()(0, 0);
  };

  evaluate(true);
  double worst = 0.0;
  for (std::size_t i = 0; i < store.size(); ++i) {
    Parameter& p = store[i];
    const Matrix analytic = p.grad;
    for (Eigen::Index k = 0; k < p.value.size(); ++k) {
      double& x = p.value.data()[k];
      const double saved = x;
      x = saved + step;
      const double up = evaluate(false);
      x = saved - step;
      const double down = evaluate(false);
      x = saved;
      worst = std::max(worst, relative_error(analytic.data()[k], (up - down) / (2 * step)));
    }
  }
  return worst;
}

double check_model_gradient(Model& model, const PatientRecord& record, double step) {
  ParameterStore& store = model.params();
  {
    Graph g;
    Var loss = model.patient_loss(g, record);
    store.zero_grad();
    g.backward(loss);
  }
  auto loss_value = [&] {
    Graph g(false);
    return model.patient_loss(g, record).value()(0, 0);
  };
  double worst = 0.0;
  for (std::size_t i = 0; i < store.size(); ++i) {
    Parameter& p = store[i];
    const Matrix analytic = p.grad;
    for (Eigen::Index k = 0; k < p.value.size(); ++k) {
      double& x = p.value.data()[k];
      const double saved = x;
      x = saved + step;
      const double up = loss_value();
      x = saved - step;
      const double down = loss_value();
      x = saved;
      worst = std::max(worst, relative_error(analytic.data()[k], (up - down) / (2 * step)));
    }
  }
  return worst;
}

ModelConfig gradcheck_model_config(Variant variant) {
  ModelConfig c;
  c.vocab = {6, 5, 7};
  c.dim = 4;
  c.split_n = 1;
  c.state_size = 3;
  c.variant = variant;
  return c;
}

Model gradcheck_model(Variant variant, std::uint64_t seed) {
  Model model(gradcheck_model_config(variant), seed);
  Rng rng = Rng::stream(seed, "gradcheck-jitter", static_cast<std::uint64_t>(variant));
  ParameterStore& store = model.params();
  for (std::size_t i = 0; i < store.size(); ++i) {
    Matrix& v = store[i].value;
    for (Eigen::Index k = 0; k < v.size(); ++k) v.data()[k] += rng.uniform(-0.2, 0.2);
  }
  return model;
}

PatientRecord gradcheck_patient(std::uint64_t seed, int visits) {
  const Vocab v = gradcheck_model_config(Variant::full).vocab;
  Rng rng = Rng::stream(seed, "gradcheck-patient", static_cast<std::uint64_t>(visits));
  auto draw = [&](int n) {
    std::set<int> s;
    const int k = 1 + static_cast<int>(rng.below(3));
    while (static_cast<int>(s.size()) < k) s.insert(static_cast<int>(rng.below(static_cast<std::uint64_t>(n))));
    return CodeSet(s.begin(), s.end());
  };
  PatientRecord r;
  r.patient_id = "gradcheck";
  for (int t = 0; t < visits; ++t) {
    Visit visit;
    visit.diagnoses = draw(v.num_diagnoses);
    visit.procedures = draw(v.num_procedures);
    visit.medications = draw(v.num_medications);
    r.visits.push_back(std::move(visit));
  }
  return r;
}

namespace {

Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double lo = -2.0,
                     double hi = 2.0) {
  Matrix m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = rng.uniform(lo, hi);
  return m;
}

int dim_between(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

// Contracting with a fixed random weight exercises the whole Jacobian rather
// than only its column sums.
Var project(Graph& g, Var out, Rng& rng) {
  Matrix w = random_matrix(rng, out.rows(), out.cols(), -1.0, 1.0);
  return sum(hadamard(out, g.constant(std::move(w))));
}

struct Case {
  std::string name;
  // Draws the inputs and returns the loss builder for one trial.
  std::function<std::pair<std::vector<Matrix>, LossFn>(Rng&)> make;
};

std::vector<Case> primitive_cases() {
  std::vector<Case> cases;
  auto unary = [&](std::string name, Var (*op)(Var), double lo = -2.0, double hi = 2.0) {
    cases.push_back({name, [op, lo, hi](Rng& rng) {
                       const int m = dim_between(rng, 1, 4), n = dim_between(rng, 1, 4);
                       const std::uint64_t proj = rng.next();
                       LossFn f = [op, proj](Graph& g, const std::vector<Var>& x) {
                         Rng r(proj);
                         return project(g, op(x[0]), r);
                       };
                       return std::make_pair(std::vector<Matrix>{random_matrix(rng, m, n, lo, hi)}, f);
                     }});
  };
  auto binary = [&](std::string name, std::function<Var(Var, Var)> op, bool broadcast) {
    cases.push_back({name, [op, broadcast](Rng& rng) {
                       const int m = dim_between(rng, 1, 4), n = dim_between(rng, 1, 4);
                       const std::uint64_t proj = rng.next();
                       LossFn f = [op, proj](Graph& g, const std::vector<Var>& x) {
                         Rng r(proj);
                         return project(g, op(x[0], x[1]), r);
                       };
                       return std::make_pair(
                           std::vector<Matrix>{random_matrix(rng, m, n),
                                               random_matrix(rng, broadcast ? 1 : m, n)},
                           f);
                     }});
  };

  cases.push_back({"matmul", [](Rng& rng) {
                     const int m = dim_between(rng, 1, 4), k = dim_between(rng, 1, 4),
                               n = dim_between(rng, 1, 4);
                     const std::uint64_t proj = rng.next();
                     LossFn f = [proj](Graph& g, const std::vector<Var>& x) {
                       Rng r(proj);
                       return project(g, matmul(x[0], x[1]), r);
                     };
                     return std::make_pair(
                         std::vector<Matrix>{random_matrix(rng, m, k), random_matrix(rng, k, n)}, f);
                   }});
  binary("add", [](Var a, Var b) { return add(a, b); }, false);
  binary("add_row_broadcast", [](Var a, Var b) { return add(a, b); }, true);
  binary("sub", [](Var a, Var b) { return sub(a, b); }, false);
  binary("sub_row_broadcast", [](Var a, Var b) { return sub(b, a); }, true);
  binary("hadamard", [](Var a, Var b) { return hadamard(a, b); }, false);
  unary("neg", [](Var a) { return neg(a); });
  unary("scale", [](Var a) { return scale(a, -1.7); });
  unary("transpose", [](Var a) { return transpose(a); });
  unary("sigmoid", [](Var a) { return sigmoid(a); });
  unary("tanh", [](Var a) { return tanh(a); });
  unary("exp", [](Var a) { return exp(a); });
  unary("softplus", [](Var a) { return softplus(a); });
  // Kept away from the kink so the central difference is well defined.
  cases.push_back({"relu", [](Rng& rng) {
                     const int m = dim_between(rng, 1, 4), n = dim_between(rng, 1, 4);
                     Matrix x = random_matrix(rng, m, n);
                     for (Eigen::Index k = 0; k < x.size(); ++k)
                       if (std::abs(x.data()[k]) < 1e-3) x.data()[k] = 0.5;
                     const std::uint64_t proj = rng.next();
                     LossFn f = [proj](Graph& g, const std::vector<Var>& v) {
                       Rng r(proj);
                       return project(g, relu(v[0]), r);
                     };
                     return std::make_pair(std::vector<Matrix>{x}, f);
                   }});
  unary("softmax_rows", [](Var a) { return softmax(a, 1); });
  unary("softmax_cols", [](Var a) { return softmax(a, 0); });
  unary("sum", [](Var a) { return sum(a); });
  unary("mean", [](Var a) { return mean(a); });
  unary("reverse_rows", [](Var a) { return reverse_rows(a); });
  cases.push_back({"scale_by_node", [](Rng& rng) {
                     const int m = dim_between(rng, 1, 4), n = dim_between(rng, 1, 4);
                     const std::uint64_t proj = rng.next();
                     LossFn f = [proj](Graph& g, const std::vector<Var>& x) {
                       Rng r(proj);
                       return project(g, scale(x[0], x[1]), r);
                     };
                     return std::make_pair(
                         std::vector<Matrix>{random_matrix(rng, m, n), random_matrix(rng, 1, 1)}, f);
                   }});
  cases.push_back({"scale_rows", [](Rng& rng) {
                     const int m = dim_between(rng, 1, 4), n = dim_between(rng, 1, 4);
                     const std::uint64_t proj = rng.next();
                     LossFn f = [proj](Graph& g, const std::vector<Var>& x) {
                       Rng r(proj);
                       return project(g, scale_rows(x[0], x[1]), r);
                     };
                     return std::make_pair(
                         std::vector<Matrix>{random_matrix(rng, m, n), random_matrix(rng, m, 1)}, f);
                   }});
  cases.push_back({"layer_norm", [](Rng& rng) {
                     const int m = dim_between(rng, 1, 4), n = dim_between(rng, 2, 5);
                     const std::uint64_t proj = rng.next();
                     LossFn f = [proj](Graph& g, const std::vector<Var>& x) {
                       Rng r(proj);
                       return project(g, layer_norm(x[0], x[1], x[2]), r);
                     };
                     return std::make_pair(
                         std::vector<Matrix>{random_matrix(rng, m, n), random_matrix(rng, 1, n),
                                             random_matrix(rng, 1, n)},
                         f);
                   }});
  cases.push_back({"concat_rows", [](Rng& rng) {
                     const int n = dim_between(rng, 1, 4);
                     std::vector<Matrix> in{random_matrix(rng, dim_between(rng, 1, 3), n),
                                            random_matrix(rng, dim_between(rng, 1, 3), n),
                                            random_matrix(rng, dim_between(rng, 1, 3), n)};
                     const std::uint64_t proj = rng.next();
                     LossFn f = [proj](Graph& g, const std::vector<Var>& x) {
                       Rng r(proj);
                       return project(g, concat_rows({x[0], x[1], x[2]}), r);
                     };
                     return std::make_pair(in, f);
                   }});
  cases.push_back({"slice_rows", [](Rng& rng) {
                     const int m = dim_between(rng, 2, 5), n = dim_between(rng, 1, 4);
                     const int begin = static_cast<int>(rng.below(static_cast<std::uint64_t>(m)));
                     const int count = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(m - begin)));
                     const std::uint64_t proj = rng.next();
                     LossFn f = [proj, begin, count](Graph& g, const std::vector<Var>& x) {
                       Rng r(proj);
                       return project(g, slice_rows(x[0], begin, count), r);
                     };
                     return std::make_pair(std::vector<Matrix>{random_matrix(rng, m, n)}, f);
                   }});
  cases.push_back({"reshape", [](Rng& rng) {
                     const int m = dim_between(rng, 1, 4), n = dim_between(rng, 1, 4);
                     const std::uint64_t proj = rng.next();
                     LossFn f = [proj, m, n](Graph& g, const std::vector<Var>& x) {
                       Rng r(proj);
                       return project(g, reshape(x[0], 1, m * n), r);
                     };
                     return std::make_pair(std::vector<Matrix>{random_matrix(rng, m, n)}, f);
                   }});
  cases.push_back({"gather_rows", [](Rng& rng) {
                     const int m = dim_between(rng, 2, 5), n = dim_between(rng, 1, 4);
                     std::vector<int> rows;
                     const int k = dim_between(rng, 1, 6);
                     for (int i = 0; i < k; ++i)
                       rows.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(m))));
                     const std::uint64_t proj = rng.next();
                     LossFn f = [proj, rows](Graph& g, const std::vector<Var>& x) {
                       Rng r(proj);
                       return project(g, gather_rows(x[0], rows), r);
                     };
                     return std::make_pair(std::vector<Matrix>{random_matrix(rng, m, n)}, f);
                   }});
  cases.push_back({"embedding_bag", [](Rng& rng) {
                     const int m = dim_between(rng, 2, 6), n = dim_between(rng, 1, 4);
                     std::vector<std::vector<int>> sets(static_cast<std::size_t>(dim_between(rng, 1, 4)));
                     for (auto& s : sets) {
                       std::set<int> codes;
                       const int k = static_cast<int>(rng.below(static_cast<std::uint64_t>(m)));
                       for (int i = 0; i < k; ++i)
                         codes.insert(static_cast<int>(rng.below(static_cast<std::uint64_t>(m))));
                       s.assign(codes.begin(), codes.end());
                     }
                     const std::uint64_t proj = rng.next();
                     LossFn f = [proj, sets](Graph& g, const std::vector<Var>& x) {
                       Rng r(proj);
                       return project(g, embedding_bag(x[0], sets), r);
                     };
                     return std::make_pair(std::vector<Matrix>{random_matrix(rng, m, n)}, f);
                   }});
  cases.push_back({"cosine_rows", [](Rng& rng) {
                     const int m = dim_between(rng, 1, 4), n = dim_between(rng, 2, 4);
                     const std::uint64_t proj = rng.next();
                     LossFn f = [proj](Graph& g, const std::vector<Var>& x) {
                       Rng r(proj);
                       return project(g, cosine_rows(x[0], x[1]), r);
                     };
                     return std::make_pair(
                         std::vector<Matrix>{random_matrix(rng, 1, n), random_matrix(rng, m, n)}, f);
                   }});
  cases.push_back({"selective_scan", [](Rng& rng) {
                     const int len = dim_between(rng, 1, 6), dim = dim_between(rng, 1, 4),
                               state = dim_between(rng, 1, 3);
                     std::vector<Matrix> in{random_matrix(rng, len, dim),
                                            random_matrix(rng, len, dim, 0.05, 2.0),
                                            random_matrix(rng, len, state),
                                            random_matrix(rng, len, state),
                                            random_matrix(rng, dim, state, -2.0, -0.05),
                                            random_matrix(rng, 1, dim)};
                     const std::uint64_t proj = rng.next();
                     LossFn f = [proj](Graph& g, const std::vector<Var>& x) {
                       Rng r(proj);
                       return project(g, selective_scan(x[0], x[1], x[2], x[3], x[4], x[5]), r);
                     };
                     return std::make_pair(in, f);
                   }});
  return cases;
}

}  // namespace

GradCheckReport run_gradcheck(std::uint64_t seed, int trials) {
  const auto start = std::chrono::steady_clock::now();
  GradCheckReport report;
  for (const Case& c : primitive_cases()) {
    GradCheckResult r;
    r.name = c.name;
    Rng rng = Rng::stream(seed, "gradcheck", fnv1a(c.name));
    for (int t = 0; t < trials; ++t) {
      auto [inputs, fn] = c.make(rng);
      for (const auto& m : inputs) r.entries += m.size();
      r.max_error = std::max(r.max_error, check_gradient(fn, std::move(inputs)));
      ++r.trials;
    }
    r.passed = r.max_error < kGradCheckTolerance;
    report.results.push_back(std::move(r));
  }
  for (Variant v : kAllVariants)
    for (int visits : {2, 4}) {
      GradCheckResult r;
      r.name = "model/" + std::string(to_string(v)) + "/" + std::to_string(visits) + "-visit";
      Model model = gradcheck_model(v, seed);
      r.entries = static_cast<std::int64_t>(model.params().scalar_count());
      r.max_error = check_model_gradient(model, gradcheck_patient(seed, visits));
      r.trials = 1;
      r.passed = r.max_error < kGradCheckTolerance;
      report.results.push_back(std::move(r));
    }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace armr
