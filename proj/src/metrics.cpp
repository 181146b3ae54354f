#include "armr/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace armr {

namespace {

std::size_t intersection_size(const CodeSet& a, const CodeSet& b) {
  std::size_t n = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

}  // namespace

double jaccard(const CodeSet& pred, const CodeSet& target) {
  const auto inter = intersection_size(pred, target);
  const auto uni = pred.size() + target.size() - inter;
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double f1(const CodeSet& pred, const CodeSet& target) {
  if (pred.empty() && target.empty()) return 1.0;
  if (pred.empty() || target.empty()) return 0.0;
  const auto inter = static_cast<double>(intersection_size(pred, target));
  const double precision = inter / static_cast<double>(pred.size());
  const double recall = inter / static_cast<double>(target.size());
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

std::optional<double> prauc(std::span<const double> probs, const CodeSet& target) {
  if (target.empty()) return std::nullopt;
  std::vector<bool> positive(probs.size(), false);
  for (int t : target) {
    if (t < 0 || static_cast<std::size_t>(t) >= probs.size())
      throw std::out_of_range("prauc: target index " + std::to_string(t));
    positive[static_cast<std::size_t>(t)] = true;
  }
  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  double ap = 0.0;
  std::size_t hits = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (!positive[order[rank]]) continue;
    ++hits;
    ap += static_cast<double>(hits) / static_cast<double>(rank + 1);
  }
  return ap / static_cast<double>(target.size());
}

std::string_view to_string(Aggregation a) {
  return a == Aggregation::patient_mean ? "patient-mean" : "visit-mean";
}

Aggregation parse_aggregation(std::string_view name) {
  if (name == "patient-mean") return Aggregation::patient_mean;
  if (name == "visit-mean") return Aggregation::visit_mean;
  throw std::invalid_argument("unknown aggregation '" + std::string(name) +
                              "' (expected patient-mean or visit-mean)");
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json pp = nlohmann::json::array();
  for (const auto& p : per_patient) {
    pp.push_back({{"patient_id", p.patient_id},
                  {"jaccard", p.jaccard},
                  {"f1", p.f1},
                  {"prauc", p.prauc ? nlohmann::json(*p.prauc) : nlohmann::json(nullptr)},
                  {"visits", p.visits}});
  }
  return {{"jaccard", jaccard},
          {"f1", f1},
          {"prauc", prauc},
          {"aggregation", std::string(to_string(aggregation))},
          {"visits_evaluated", visits_evaluated},
          {"visits_without_positives", visits_without_positives},
          {"empty_predictions", empty_predictions},
          {"per_patient", std::move(pp)}};
}

VisitScore score_visit(const VisitPrediction& p) {
  VisitScore s;
  s.jaccard = jaccard(p.predicted, p.target);
  s.f1 = f1(p.predicted, p.target);
  s.prauc = prauc(std::span<const double>(p.probs.data(), static_cast<std::size_t>(p.probs.size())),
                  p.target);
  s.empty_prediction = p.predicted.empty();
  return s;
}

EvalReport aggregate(const std::vector<std::string>& patient_ids,
                     const std::vector<std::vector<VisitScore>>& scores, Aggregation mode) {
  if (patient_ids.size() != scores.size())
    throw std::invalid_argument("aggregate: ids and scores differ in length");
  EvalReport r;
  r.aggregation = mode;
  double vj = 0, vf = 0, vp = 0;
  int vp_count = 0;
  double pj = 0, pf = 0, pp = 0;
  int patients = 0, pp_count = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& visits = scores[i];
    if (visits.empty()) continue;
    PatientScore ps;
    ps.patient_id = patient_ids[i];
    ps.visits = static_cast<int>(visits.size());
    double sp = 0;
    int np = 0;
    for (const VisitScore& v : visits) {
      ps.jaccard += v.jaccard;
      ps.f1 += v.f1;
      vj += v.jaccard;
      vf += v.f1;
      if (v.prauc) {
        sp += *v.prauc;
        vp += *v.prauc;
        ++np;
        ++vp_count;
      } else {
        ++r.visits_without_positives;
      }
      if (v.empty_prediction) ++r.empty_predictions;
      ++r.visits_evaluated;
    }
    ps.jaccard /= ps.visits;
    ps.f1 /= ps.visits;
    if (np > 0) {
      ps.prauc = sp / np;
      pp += *ps.prauc;
      ++pp_count;
    }
    pj += ps.jaccard;
    pf += ps.f1;
    ++patients;
    r.per_patient.push_back(std::move(ps));
  }
  if (mode == Aggregation::patient_mean) {
    r.jaccard = patients ? pj / patients : 0.0;
    r.f1 = patients ? pf / patients : 0.0;
    r.prauc = pp_count ? pp / pp_count : 0.0;
  } else {
    r.jaccard = r.visits_evaluated ? vj / r.visits_evaluated : 0.0;
    r.f1 = r.visits_evaluated ? vf / r.visits_evaluated : 0.0;
    r.prauc = vp_count ? vp / vp_count : 0.0;
  }
  return r;
}

EvalReport evaluate(const Model& model, std::span<const PatientRecord> records, Aggregation mode,
                    int workers) {
  std::vector<std::vector<VisitScore>> scores(records.size());
  auto work = [&](std::size_t begin, std::size_t step) {
    for (std::size_t i = begin; i < records.size(); i += step)
      for (const auto& p : predict(model, records[i])) scores[i].push_back(score_visit(p));
  };
  const auto n = static_cast<std::size_t>(std::max(1, workers));
  if (n == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n; ++w) pool.emplace_back(work, w, n);
  }
  std::vector<std::string> ids;
  ids.reserve(records.size());
  for (const auto& r : records) ids.push_back(r.patient_id);
  return aggregate(ids, scores, mode);
}

}  // namespace armr
