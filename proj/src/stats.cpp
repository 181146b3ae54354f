#include "armr/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include "armr/arm.hpp"
#include "armr/metrics.hpp"

namespace armr {

namespace {

// Sums after sorting so the result does not depend on patient order.
double stable_mean(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

std::vector<double> new_drug_ratios(const PatientRecord& record) {
  std::vector<CodeSet> meds;
  int limit = 1;
  for (const auto& v : record.visits) {
    meds.push_back(v.medications);
    if (!v.medications.empty()) limit = std::max(limit, v.medications.back() + 1);
  }
  const MedSplit s = split_medications(meds, limit);
  std::vector<double> out;
  for (std::size_t i = 0; i < meds.size(); ++i) {
    if (meds[i].empty()) continue;
    out.push_back(static_cast<double>(s.new_seq[i].size()) / static_cast<double>(meds[i].size()));
  }
  return out;
}

NewDrugHistogram new_drug_histogram(const std::vector<PatientRecord>& records, int num_bins,
                                    bool include_first_visits) {
  if (num_bins < 1) throw std::invalid_argument("num_bins must be >= 1");
  NewDrugHistogram h;
  h.include_first_visits = include_first_visits;
  h.counts.assign(static_cast<std::size_t>(num_bins), 0);
  std::vector<double> binned, follow_up;
  for (const auto& r : records) {
    std::size_t k = 0;
    for (double ratio : new_drug_ratios(r)) {
      const bool is_first = k++ == 0;
      if (!is_first) follow_up.push_back(ratio);
      if (is_first && !include_first_visits) continue;
      binned.push_back(ratio);
      const int b = std::min(num_bins - 1, static_cast<int>(std::floor(ratio * num_bins)));
      ++h.counts[static_cast<std::size_t>(b)];
    }
  }
  h.visits = static_cast<std::int64_t>(binned.size());
  h.mean = stable_mean(std::move(binned));
  h.follow_up_visits = static_cast<std::int64_t>(follow_up.size());
  h.follow_up_mean = stable_mean(std::move(follow_up));
  return h;
}

nlohmann::json NewDrugHistogram::to_json() const {
  const auto bins = counts.size();
  nlohmann::json edges = nlohmann::json::array();
  for (std::size_t b = 0; b <= bins; ++b) edges.push_back(static_cast<double>(b) / static_cast<double>(bins));
  return {{"bin_edges", edges},
          {"counts", counts},
          {"mean", mean},
          {"visits", visits},
          {"follow_up_mean", follow_up_mean},
          {"follow_up_visits", follow_up_visits},
          {"include_first_visits", include_first_visits}};
}

std::map<std::int64_t, IntervalBucket> similarity_by_interval(
    const std::vector<PatientRecord>& records, std::int64_t bucket_width, IntervalUnit unit) {
  if (bucket_width < 1) throw std::invalid_argument("bucket_width must be >= 1");
  std::map<std::int64_t, std::vector<double>> values;
  for (const auto& r : records) {
    const auto& vs = r.visits;
    for (std::size_t i = 0; i < vs.size(); ++i)
      for (std::size_t j = i + 1; j < vs.size(); ++j) {
        std::int64_t interval = static_cast<std::int64_t>(j - i);
        if (unit == IntervalUnit::days && vs[i].admit_day && vs[j].admit_day)
          interval = *vs[j].admit_day - *vs[i].admit_day;
        const std::int64_t bucket = (interval + bucket_width - 1) / bucket_width;
        values[bucket].push_back(jaccard(vs[i].medications, vs[j].medications));
      }
  }
  std::map<std::int64_t, IntervalBucket> out;
  for (auto& [bucket, v] : values) {
    const auto n = static_cast<std::int64_t>(v.size());
    out[bucket] = {stable_mean(std::move(v)), n};
  }
  return out;
}

nlohmann::json similarity_to_json(const std::map<std::int64_t, IntervalBucket>& buckets,
                                  std::int64_t bucket_width) {
  nlohmann::json b = nlohmann::json::array(), m = nlohmann::json::array(),
                 c = nlohmann::json::array();
  for (const auto& [k, v] : buckets) {
    b.push_back(k);
    m.push_back(v.mean);
    c.push_back(v.count);
  }
  return {{"bucket_width", bucket_width}, {"buckets", b}, {"mean_jaccard", m}, {"pairs", c}};
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman: length mismatch");
  const auto n = x.size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  const auto rx = ranks(x), ry = ranks(y);
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / static_cast<double>(n);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

double similarity_trend(const std::map<std::int64_t, IntervalBucket>& buckets,
                        std::int64_t min_count) {
  std::vector<double> x, y;
  for (const auto& [k, v] : buckets)
    if (v.count >= min_count) {
      x.push_back(static_cast<double>(k));
      y.push_back(v.mean);
    }
  return spearman(x, y);
}

CohortSummary summarize(const std::vector<PatientRecord>& records) {
  CohortSummary s;
  std::set<int> d, p, m;
  double nd = 0, np = 0, nm = 0;
  for (const auto& r : records) {
    ++s.patients;
    s.visits += r.num_visits();
    s.max_visits = std::max(s.max_visits, r.num_visits());
    for (const auto& v : r.visits) {
      nd += static_cast<double>(v.diagnoses.size());
      np += static_cast<double>(v.procedures.size());
      nm += static_cast<double>(v.medications.size());
      d.insert(v.diagnoses.begin(), v.diagnoses.end());
      p.insert(v.procedures.begin(), v.procedures.end());
      m.insert(v.medications.begin(), v.medications.end());
    }
  }
  if (s.patients) s.avg_visits = static_cast<double>(s.visits) / static_cast<double>(s.patients);
  if (s.visits) {
    const auto nv = static_cast<double>(s.visits);
    s.avg_diagnoses = nd / nv;
    s.avg_procedures = np / nv;
    s.avg_medications = nm / nv;
  }
  s.distinct_diagnoses = static_cast<int>(d.size());
  s.distinct_procedures = static_cast<int>(p.size());
  s.distinct_medications = static_cast<int>(m.size());
  return s;
}

nlohmann::json CohortSummary::to_json() const {
  return {{"patients", patients},
          {"visits", visits},
          {"avg_visits", avg_visits},
          {"max_visits", max_visits},
          {"avg_diagnoses_per_visit", avg_diagnoses},
          {"avg_procedures_per_visit", avg_procedures},
          {"avg_medications_per_visit", avg_medications},
          {"distinct_diagnoses", distinct_diagnoses},
          {"distinct_procedures", distinct_procedures},
          {"distinct_medications", distinct_medications}};
}

}  // namespace armr
