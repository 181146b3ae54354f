#include <algorithm>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "armr/metrics.hpp"
#include "armr/rng.hpp"

using namespace armr;

namespace {

CodeSet random_set(Rng& rng, int universe) {
  std::set<int> s;
  const int k = static_cast<int>(rng.below(static_cast<std::uint64_t>(universe + 1)));
  for (int i = 0; i < k; ++i) s.insert(static_cast<int>(rng.below(static_cast<std::uint64_t>(universe))));
  return {s.begin(), s.end()};
}

// Counts by membership over the whole universe.
std::pair<double, double> by_enumeration(const CodeSet& pred, const CodeSet& target, int universe) {
  int both = 0, either = 0, np = 0, nt = 0;
  for (int j = 0; j < universe; ++j) {
    const bool p = std::count(pred.begin(), pred.end(), j) > 0;
    const bool t = std::count(target.begin(), target.end(), j) > 0;
    both += p && t;
    either += p || t;
    np += p;
    nt += t;
  }
  const double jac = either ? static_cast<double>(both) / either : 1.0;
  double f = 0.0;
  if (np == 0 && nt == 0) {
    f = 1.0;
  } else if (np && nt && both) {
    const double prec = static_cast<double>(both) / np, rec = static_cast<double>(both) / nt;
    f = 2 * prec * rec / (prec + rec);
  }
  return {jac, f};
}

// Sweeps every distinct threshold from high to low; each step admits a tie
// group. Inside a group the lower index is ranked first, matching the
// documented tie rule, so the group's positives are credited one by one.
double brute_force_ap(const std::vector<double>& probs, const CodeSet& target) {
  std::vector<double> thresholds = probs;
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  const double positives = static_cast<double>(target.size());
  double ap = 0.0;
  int admitted = 0, hits = 0;
  for (double th : thresholds) {
    for (std::size_t j = 0; j < probs.size(); ++j) {
      if (probs[j] != th) continue;
      ++admitted;
      if (std::count(target.begin(), target.end(), static_cast<int>(j))) {
        ++hits;
        ap += (static_cast<double>(hits) / admitted) * (1.0 / positives);
      }
    }
  }
  return ap;
}

VisitPrediction prediction(std::vector<double> probs, CodeSet target, double delta = 0.5) {
  VisitPrediction p;
  p.probs = Eigen::Map<Eigen::RowVectorXd>(probs.data(), static_cast<Eigen::Index>(probs.size()));
  p.predicted = threshold_predictions(p.probs, delta);
  p.target = std::move(target);
  return p;
}

}  // namespace

TEST(Jaccard, Examples) {
  EXPECT_DOUBLE_EQ(jaccard({0, 1, 2}, {1, 2, 3}), 0.5);
  EXPECT_DOUBLE_EQ(jaccard({4, 7}, {4, 7}), 1.0);
  EXPECT_DOUBLE_EQ(jaccard({1}, {2}), 0.0);
  EXPECT_DOUBLE_EQ(jaccard({}, {}), 1.0);
}

TEST(F1, Examples) {
  EXPECT_DOUBLE_EQ(f1({0, 1}, {1, 2}), 0.5);
  EXPECT_DOUBLE_EQ(f1({0, 1, 2, 3}, {0, 1}), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(f1({}, {1}), 0.0);
  EXPECT_DOUBLE_EQ(f1({1}, {}), 0.0);
  EXPECT_DOUBLE_EQ(f1({}, {}), 1.0);
  EXPECT_DOUBLE_EQ(f1({1}, {2}), 0.0);
}

TEST(SetMetrics, MatchEnumerationAndOrdering) {
  Rng rng(101);
  for (int trial = 0; trial < 500; ++trial) {
    const int universe = 1 + static_cast<int>(rng.below(12));
    const CodeSet p = random_set(rng, universe), t = random_set(rng, universe);
    const auto [jac, f] = by_enumeration(p, t, universe);
    EXPECT_DOUBLE_EQ(jaccard(p, t), jac);
    EXPECT_DOUBLE_EQ(f1(p, t), f);
    EXPECT_LE(jaccard(p, t), f1(p, t) + 1e-15);
    EXPECT_GE(jaccard(p, t), 0.0);
    EXPECT_LE(f1(p, t), 1.0);
  }
}

TEST(Prauc, Examples) {
  const std::vector<double> a{0.9, 0.1}, b{0.1, 0.9};
  EXPECT_DOUBLE_EQ(*prauc(a, {0}), 1.0);
  EXPECT_DOUBLE_EQ(*prauc(b, {0}), 0.5);
  EXPECT_FALSE(prauc(a, {}).has_value());
}

TEST(Prauc, TiesBreakByAscendingIndex) {
  const std::vector<double> p{0.5, 0.5, 0.5};
  EXPECT_DOUBLE_EQ(*prauc(p, {0}), 1.0);
  EXPECT_DOUBLE_EQ(*prauc(p, {2}), 1.0 / 3.0);
}

TEST(Prauc, MatchesThresholdEnumeration) {
  Rng rng(202);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(15));
    std::vector<double> probs(static_cast<std::size_t>(n));
    // Coarse grid so ties occur.
    for (auto& p : probs) p = static_cast<double>(rng.below(6)) / 5.0;
    CodeSet target = random_set(rng, n);
    if (target.empty()) target = {static_cast<int>(rng.below(static_cast<std::uint64_t>(n)))};
    EXPECT_NEAR(*prauc(probs, target), brute_force_ap(probs, target), 1e-12);
  }
}

TEST(Metrics, InvariantUnderConsistentRelabelling) {
  Rng rng(303);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(10));
    std::vector<double> probs(static_cast<std::size_t>(n));
    for (auto& p : probs) p = rng.uniform();
    CodeSet target = random_set(rng, n), pred = random_set(rng, n);
    if (target.empty()) target = {0};
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    auto map_set = [&](const CodeSet& s) {
      CodeSet out;
      for (int j : s) out.push_back(perm[static_cast<std::size_t>(j)]);
      std::sort(out.begin(), out.end());
      return out;
    };
    std::vector<double> pprobs(probs.size());
    for (int j = 0; j < n; ++j) pprobs[static_cast<std::size_t>(perm[static_cast<std::size_t>(j)])] = probs[static_cast<std::size_t>(j)];
    EXPECT_DOUBLE_EQ(jaccard(pred, target), jaccard(map_set(pred), map_set(target)));
    EXPECT_DOUBLE_EQ(f1(pred, target), f1(map_set(pred), map_set(target)));
    // Continuous scores have no ties, so the ranking is relabelling-invariant.
    EXPECT_NEAR(*prauc(probs, target), *prauc(pprobs, map_set(target)), 1e-12);
  }
}

TEST(Aggregate, PerfectPredictor) {
  const auto s = score_visit(prediction({0.9, 0.1, 0.8}, {0, 2}));
  const auto r = aggregate({"a"}, {{s}}, Aggregation::patient_mean);
  EXPECT_EQ(r.jaccard, 1.0);
  EXPECT_EQ(r.f1, 1.0);
  EXPECT_EQ(r.prauc, 1.0);
}

TEST(Aggregate, ConstantHalfPredictsNothing) {
  const auto s = score_visit(prediction({0.5, 0.5, 0.5}, {1}));
  EXPECT_EQ(s.jaccard, 0.0);
  EXPECT_TRUE(s.empty_prediction);
}

TEST(Aggregate, ThreePatientFixture) {
  // Patient a: one visit. probs {0.7, 0.2, 0.6}, target {0, 1}
  //   pred {0, 2}: jaccard 1/3, f1 1/2, AP: ranks 0(+),2(-),1(+) -> (1 + 2/3)/2 = 5/6
  // Patient b: two visits.
  //   v1 probs {0.9, 0.8, 0.1}, target {0, 1}: pred {0, 1}: 1, 1, AP 1
  //   v2 probs {0.1, 0.2, 0.3}, target {2}: pred {}: 0, 0, AP 1
  // Patient c: one visit with no positives. probs {0.6, 0.1, 0.1}, target {}
  //   pred {0}: jaccard 0, f1 0, AP skipped
  std::vector<std::vector<VisitScore>> s{
      {score_visit(prediction({0.7, 0.2, 0.6}, {0, 1}))},
      {score_visit(prediction({0.9, 0.8, 0.1}, {0, 1})),
       score_visit(prediction({0.1, 0.2, 0.3}, {2}))},
      {score_visit(prediction({0.6, 0.1, 0.1}, {}))}};
  const std::vector<std::string> ids{"a", "b", "c"};

  const auto pm = aggregate(ids, s, Aggregation::patient_mean);
  EXPECT_NEAR(pm.jaccard, (1.0 / 3 + 0.5 + 0.0) / 3, 1e-15);
  EXPECT_NEAR(pm.f1, (0.5 + 0.5 + 0.0) / 3, 1e-15);
  EXPECT_NEAR(pm.prauc, (5.0 / 6 + 1.0) / 2, 1e-15);
  EXPECT_EQ(pm.visits_evaluated, 4);
  EXPECT_EQ(pm.visits_without_positives, 1);
  EXPECT_EQ(pm.empty_predictions, 1);
  ASSERT_EQ(pm.per_patient.size(), 3u);
  EXPECT_FALSE(pm.per_patient[2].prauc.has_value());

  double mean = 0;
  for (const auto& p : pm.per_patient) mean += p.jaccard;
  EXPECT_NEAR(pm.jaccard, mean / 3, 1e-12);

  const auto vm = aggregate(ids, s, Aggregation::visit_mean);
  EXPECT_NEAR(vm.jaccard, (1.0 / 3 + 1 + 0 + 0) / 4, 1e-15);
  EXPECT_NEAR(vm.f1, (0.5 + 1 + 0 + 0) / 4, 1e-15);
  EXPECT_NEAR(vm.prauc, (5.0 / 6 + 1 + 1) / 3, 1e-15);
}

TEST(Aggregate, ModesAgreeForSingleVisitPatients) {
  Rng rng(404);
  std::vector<std::vector<VisitScore>> s;
  std::vector<std::string> ids;
  for (int p = 0; p < 20; ++p) {
    std::vector<double> probs(6);
    for (auto& x : probs) x = rng.uniform();
    s.push_back({score_visit(prediction(probs, random_set(rng, 6)))});
    ids.push_back("p" + std::to_string(p));
  }
  const auto a = aggregate(ids, s, Aggregation::patient_mean);
  const auto b = aggregate(ids, s, Aggregation::visit_mean);
  EXPECT_NEAR(a.jaccard, b.jaccard, 1e-12);
  EXPECT_NEAR(a.f1, b.f1, 1e-12);
  EXPECT_NEAR(a.prauc, b.prauc, 1e-12);
}

TEST(Aggregation, Names) {
  EXPECT_EQ(parse_aggregation("visit-mean"), Aggregation::visit_mean);
  EXPECT_EQ(to_string(Aggregation::patient_mean), "patient-mean");
  EXPECT_THROW(parse_aggregation("median"), std::invalid_argument);
}
