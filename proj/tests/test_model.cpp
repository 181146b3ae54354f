#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "armr/encoder.hpp"
#include "armr/gradcheck.hpp"
#include "armr/loss.hpp"
#include "armr/model.hpp"
#include "armr/rng.hpp"
#include "reference.hpp"

using namespace armr;

namespace {

PatientRecord random_patient(Rng& rng, const Vocab& v, int visits) {
  auto draw = [&](int n, int max_k) {
    std::set<int> s;
    const int k = static_cast<int>(rng.below(static_cast<std::uint64_t>(max_k + 1)));
    for (int i = 0; i < k; ++i) s.insert(static_cast<int>(rng.below(static_cast<std::uint64_t>(n))));
    return CodeSet(s.begin(), s.end());
  };
  PatientRecord r;
  r.patient_id = "p";
  for (int t = 0; t < visits; ++t)
    r.visits.push_back({draw(v.num_diagnoses, 4), draw(v.num_procedures, 3), draw(v.num_medications, 4), {}});
  return r;
}

void perturb(ParameterStore& store, Rng& rng) {
  for (std::size_t i = 0; i < store.size(); ++i) {
    Matrix& v = store[i].value;
    for (Eigen::Index k = 0; k < v.size(); ++k) v.data()[k] += rng.uniform(-0.2, 0.2);
  }
}

ModelConfig small_config(Variant v, int n = 2) {
  ModelConfig c;
  c.vocab = {11, 9, 8};
  c.dim = 6;
  c.split_n = n;
  c.state_size = 3;
  c.variant = v;
  return c;
}

Matrix row(std::initializer_list<double> v) {
  Matrix m(1, static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) m(0, i++) = x;
  return m;
}

}  // namespace

TEST(EmbedVisit, EmptySingletonAndPair) {
  Rng rng(1);
  Matrix table(5, 3);
  for (Eigen::Index i = 0; i < table.size(); ++i) table.data()[i] = rng.uniform(-1, 1);
  Graph g;
  Var t = g.constant(table);
  EXPECT_EQ(embed_visit(t, {}).value(), Matrix::Zero(1, 3));
  EXPECT_EQ(embed_visit(t, {3}).value(), Matrix(table.row(3)));
  Matrix hot = Matrix::Zero(1, 5);
  hot(0, 1) = hot(0, 4) = 1.0;
  EXPECT_LT((embed_visit(t, {1, 4}).value() - hot * table).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(embed_visit(t, {5}), ShapeError);
}

TEST(PatientEncoder, ShapeAndReference) {
  Rng rng(3);
  ParameterStore store;
  const Vocab v{11, 9, 8};
  auto enc = PatientEncoder::create(store, v, TemporalMode::piecewise, 6, 2, 3, rng);
  perturb(store, rng);
  for (int t = 1; t <= 10; ++t) {
    const PatientRecord r = random_patient(rng, v, t);
    std::vector<CodeSet> d, p;
    for (const auto& visit : r.visits) {
      d.push_back(visit.diagnoses);
      p.push_back(visit.procedures);
    }
    Graph g;
    const Matrix got = enc(g, d, p).value();
    ASSERT_EQ(got.rows(), 8);
    ASSERT_EQ(got.cols(), 6);
    EXPECT_LT((got - ref::patient(store, d, p, 2, "piecewise")).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(PatientEncoder, LengthMismatchIsError) {
  Rng rng(3);
  ParameterStore store;
  auto enc = PatientEncoder::create(store, {4, 4, 4}, TemporalMode::piecewise, 4, 2, 3, rng);
  Graph g;
  const std::vector<CodeSet> d{{1}, {2}}, p{{1}};
  EXPECT_THROW(enc(g, d, p), std::invalid_argument);
}

TEST(PatientEncoder, EmptyCodesGiveConstant) {
  Rng rng(4);
  ParameterStore store;
  auto enc = PatientEncoder::create(store, {4, 4, 4}, TemporalMode::piecewise, 4, 2, 3, rng);
  const std::vector<CodeSet> empty{{}};
  Graph g;
  const Matrix a = enc(g, empty, empty).value();
  // Both halves see a single zero row; at init that is the zero output.
  EXPECT_EQ(a, Matrix::Zero(8, 4));
}

TEST(PatientEncoder, VisitEmbeddingIgnoresCodeOrder) {
  Rng rng(5);
  ParameterStore store;
  auto enc = PatientEncoder::create(store, {6, 6, 4}, TemporalMode::piecewise, 4, 2, 3, rng);
  Graph g;
  const std::vector<CodeSet> d1{{1, 3, 5}}, d2{{5, 1, 3}}, p{{0}};
  EXPECT_EQ(enc(g, d1, p).value(), enc(g, d2, p).value());
}

class Variants : public ::testing::TestWithParam<Variant> {};

TEST_P(Variants, ForwardMatchesReference) {
  Rng rng(51);
  for (int n : {1, 2}) {
    Model model(small_config(GetParam(), n), 7);
    perturb(model.params(), rng);
    for (int visits : {1, 2, 3, 5}) {
      const PatientRecord r = random_patient(rng, model.config().vocab, visits);
      for (int t = 1; t <= visits; ++t) {
        Graph g;
        const Matrix got = model.forward_visit(g, r, t).value();
        const Matrix want = ref::forward(model.params(), r, t, n, std::string(to_string(GetParam())));
        EXPECT_LT((got - want).cwiseAbs().maxCoeff(), 1e-10) << "n " << n << " t " << t;
      }
    }
  }
}

TEST_P(Variants, ProbabilitiesInOpenInterval) {
  Rng rng(52);
  Model model(small_config(GetParam()), 1);
  const PatientRecord r = random_patient(rng, model.config().vocab, 4);
  for (const auto& vp : predict(model, r)) {
    ASSERT_EQ(vp.probs.size(), 8);
    EXPECT_GT(vp.probs.minCoeff(), 0.0);
    EXPECT_LT(vp.probs.maxCoeff(), 1.0);
    EXPECT_EQ(vp.predicted, threshold_predictions(vp.probs, 0.5));
  }
}

TEST_P(Variants, EndToEndGradient) {
  for (std::uint64_t seed : {0, 1, 2}) {
    Model model = gradcheck_model(GetParam(), seed);
    EXPECT_LT(check_model_gradient(model, gradcheck_patient(seed, 2)), kGradCheckTolerance) << seed;
  }
}

INSTANTIATE_TEST_SUITE_P(All, Variants, ::testing::ValuesIn(kAllVariants),
                         [](const auto& info) {
                           std::string s(to_string(info.param));
                           for (char& c : s)
                             if (c == '-') c = '_';
                           return s;
                         });

TEST(Model, ZeroHeadWeightsGiveOneHalf) {
  Model model(small_config(Variant::full), 3);
  model.params().find("head.w1")->value.setZero();
  model.params().find("head.w2")->value.setZero();
  Rng rng(1);
  const PatientRecord r = random_patient(rng, model.config().vocab, 2);
  Graph g;
  EXPECT_EQ(model.forward_visit(g, r, 2).value(), Matrix::Constant(1, 8, 0.5));
}

TEST(Model, HeadWeightsStartAtOne) {
  Model model(small_config(Variant::full), 3);
  EXPECT_EQ(model.w1().value(0, 0), 1.0);
  EXPECT_EQ(model.w2().value(0, 0), 1.0);
}

TEST(Model, VisitIndexOutOfRange) {
  Model model(small_config(Variant::full), 3);
  Rng rng(1);
  const PatientRecord r = random_patient(rng, model.config().vocab, 2);
  Graph g;
  EXPECT_THROW(model.forward_visit(g, r, 0), std::out_of_range);
  EXPECT_THROW(model.forward_visit(g, r, 3), std::out_of_range);
}

TEST(Model, CurrentMedicationsDoNotLeakIntoPrediction) {
  Model model(small_config(Variant::full), 3);
  Rng rng(9);
  PatientRecord r = random_patient(rng, model.config().vocab, 3);
  Graph g;
  const Matrix before = model.forward_visit(g, r, 3).value();
  r.visits[2].medications = {0, 1, 2, 3, 4, 5, 6, 7};
  EXPECT_EQ(model.forward_visit(g, r, 3).value(), before);
  r.visits[1].medications = {7};
  EXPECT_NE(model.forward_visit(g, r, 3).value(), before);
}

TEST(Model, PredictIsPure) {
  Model model(small_config(Variant::full), 3);
  Rng rng(9);
  const PatientRecord r = random_patient(rng, model.config().vocab, 4);
  const auto a = predict(model, r), b = predict(model, r);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].probs, b[i].probs);
    EXPECT_EQ(a[i].predicted, b[i].predicted);
  }
}

TEST(Model, NoArmVariantLacksArmParameters) {
  Model model(small_config(Variant::no_arm), 3);
  for (const auto& name : model.params().names()) EXPECT_NE(name.rfind("arm.", 0), 0u) << name;
  Model full(small_config(Variant::full), 3);
  EXPECT_NE(full.params().find("arm.alpha"), nullptr);
}

TEST(Model, VariantNamesRoundTrip) {
  for (Variant v : kAllVariants) EXPECT_EQ(parse_variant(to_string(v)), v);
  EXPECT_THROW(parse_variant("full-ish"), std::invalid_argument);
}

TEST(Model, SameSeedSameParameters) {
  Model a(small_config(Variant::full), 5), b(small_config(Variant::full), 5),
      c(small_config(Variant::full), 6);
  bool differs = false;
  for (std::size_t i = 0; i < a.params().size(); ++i) {
    EXPECT_EQ(a.params()[i].value, b.params()[i].value);
    differs |= a.params()[i].value != c.params()[i].value;
  }
  EXPECT_TRUE(differs);
}

TEST(Threshold, StrictInequality) {
  Eigen::RowVectorXd p(3);
  p << 0.51, 0.49, 0.5;
  EXPECT_EQ(threshold_predictions(p, 0.5), CodeSet{0});
  p << 0.1, 0.2, 0.3;
  EXPECT_TRUE(threshold_predictions(p, 0.5).empty());
}

TEST(Loss, BceOneHalf) {
  Graph g;
  EXPECT_NEAR(bce_loss(g.constant(row({0.5})), row({1})).value()(0, 0), std::log(2.0), 1e-15);
}

TEST(Loss, BceSymmetryAndPerfectLimit) {
  Graph g;
  for (double p : {0.1, 0.3, 0.77}) {
    EXPECT_NEAR(bce_loss(g.constant(row({p})), row({1})).value()(0, 0),
                bce_loss(g.constant(row({1 - p})), row({0})).value()(0, 0), 1e-15);
  }
  EXPECT_LT(bce_loss(g.constant(row({1.0, 0.0})), row({1, 0})).value()(0, 0), 1e-11);
}

TEST(Loss, BceIsSummed) {
  Graph g;
  EXPECT_NEAR(bce_loss(g.constant(row({0.5, 0.5})), row({1, 0})).value()(0, 0), 2 * std::log(2.0), 1e-15);
}

TEST(Loss, HingeExample) {
  Graph g;
  EXPECT_NEAR(multilabel_margin_loss(g.constant(row({0.8, 0.3})), row({1, 0})).value()(0, 0), 0.25, 1e-15);
}

TEST(Loss, HingeVacuousAndSaturated) {
  Graph g;
  EXPECT_EQ(multilabel_margin_loss(g.constant(row({0.2, 0.9})), row({1, 1})).value()(0, 0), 0.0);
  EXPECT_EQ(multilabel_margin_loss(g.constant(row({0.2, 0.9})), row({0, 0})).value()(0, 0), 0.0);
  EXPECT_EQ(multilabel_margin_loss(g.constant(row({1.0, 0.0})), row({1, 0})).value()(0, 0), 0.0);
}

TEST(Loss, CombinedEndpointsAndMix) {
  Graph g;
  Var p1 = g.constant(row({0.5}));
  EXPECT_EQ(combined_loss(p1, row({1}), 1.0).value()(0, 0), bce_loss(p1, row({1})).value()(0, 0));
  Var p2 = g.constant(row({0.8, 0.3}));
  EXPECT_EQ(combined_loss(p2, row({1, 0}), 0.0).value()(0, 0), 0.25);
  const double bce2 = -std::log(0.8) - std::log(0.7);
  EXPECT_NEAR(combined_loss(p2, row({1, 0}), 0.7).value()(0, 0), 0.7 * bce2 + 0.3 * 0.25, 1e-15);
  EXPECT_THROW(combined_loss(p2, row({1, 0}), 1.5), std::invalid_argument);
}

TEST(Loss, LengthMismatchIsError) {
  Graph g;
  EXPECT_THROW(bce_loss(g.constant(row({0.5, 0.5})), row({1})), ShapeError);
}
