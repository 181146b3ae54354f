#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "armr/records.hpp"
#include "json.hpp"

namespace armr {

/// |new| / |prescribed| for every visit with a nonempty prescription, in
/// visit order. The first visit has no history, so its ratio is 1.
std::vector<double> new_drug_ratios(const PatientRecord& record);

struct NewDrugHistogram {
  std::vector<std::int64_t> counts;  // bin b covers [b/B, (b+1)/B), the last bin is closed
  double mean = 0.0;                 // over the binned visits
  std::int64_t visits = 0;
  /// Same quantities restricted to follow-up visits (second visit onward).
  double follow_up_mean = 0.0;
  std::int64_t follow_up_visits = 0;
  bool include_first_visits = true;

  nlohmann::json to_json() const;
};

NewDrugHistogram new_drug_histogram(const std::vector<PatientRecord>& records, int num_bins,
                                    bool include_first_visits = true);

enum class IntervalUnit { days, visits };

struct IntervalBucket {
  double mean = 0.0;
  std::int64_t count = 0;
};

/// Mean medication-set Jaccard of all visit pairs i < j of each patient,
/// grouped by ceil(interval / bucket_width). Interval is the admit_day
/// difference when both visits carry one (unit days), else j - i.
std::map<std::int64_t, IntervalBucket> similarity_by_interval(
    const std::vector<PatientRecord>& records, std::int64_t bucket_width,
    IntervalUnit unit = IntervalUnit::days);

nlohmann::json similarity_to_json(const std::map<std::int64_t, IntervalBucket>& buckets,
                                  std::int64_t bucket_width);

/// Spearman rank correlation with average ranks for ties. NaN when either
/// side is constant or fewer than two points are given.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

/// Spearman correlation between bucket index and mean similarity over the
/// buckets holding at least `min_count` pairs.
double similarity_trend(const std::map<std::int64_t, IntervalBucket>& buckets,
                        std::int64_t min_count);

/// Figures in the style of a dataset-statistics table.
struct CohortSummary {
  std::int64_t patients = 0;
  std::int64_t visits = 0;
  double avg_visits = 0.0;
  int max_visits = 0;
  double avg_diagnoses = 0.0;
  double avg_procedures = 0.0;
  double avg_medications = 0.0;
  int distinct_diagnoses = 0;
  int distinct_procedures = 0;
  int distinct_medications = 0;

  nlohmann::json to_json() const;
};

CohortSummary summarize(const std::vector<PatientRecord>& records);

}  // namespace armr
