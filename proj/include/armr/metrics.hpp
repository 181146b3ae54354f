#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "armr/model.hpp"
#include "armr/records.hpp"
#include "json.hpp"

namespace armr {

/// |pred n target| / |pred u target|; two empty sets score 1.
double jaccard(const CodeSet& pred, const CodeSet& target);

/// Harmonic mean of precision and recall; two empty sets score 1, any other
/// zero denominator scores 0.
double f1(const CodeSet& pred, const CodeSet& target);

/// Average precision: labels ranked by descending score (ties by ascending
/// index), summing precision at each positive times 1/|positives|.
/// Empty when the target has no positives.
std::optional<double> prauc(std::span<const double> probs, const CodeSet& target);

enum class Aggregation { patient_mean, visit_mean };

std::string_view to_string(Aggregation a);
Aggregation parse_aggregation(std::string_view name);

struct VisitScore {
  double jaccard = 0.0;
  double f1 = 0.0;
  std::optional<double> prauc;
  bool empty_prediction = false;
};

struct PatientScore {
  std::string patient_id;
  double jaccard = 0.0;
  double f1 = 0.0;
  std::optional<double> prauc;  // mean over visits that have positives
  int visits = 0;
};

struct EvalReport {
  double jaccard = 0.0;
  double f1 = 0.0;
  double prauc = 0.0;
  std::vector<PatientScore> per_patient;
  int visits_evaluated = 0;
  int visits_without_positives = 0;  // skipped by PRAUC
  int empty_predictions = 0;
  Aggregation aggregation = Aggregation::patient_mean;

  nlohmann::json to_json() const;
};

VisitScore score_visit(const VisitPrediction& p);

/// Aggregates per-visit scores grouped by patient. Patient-mean averages
/// visits within each patient first, then patients; visit-mean pools visits.
EvalReport aggregate(const std::vector<std::string>& patient_ids,
                     const std::vector<std::vector<VisitScore>>& scores, Aggregation mode);

/// Runs predict() on every record and aggregates. `workers` > 1 fans out
/// across patients; the report is identical for any worker count.
EvalReport evaluate(const Model& model, std::span<const PatientRecord> records,
                    Aggregation mode = Aggregation::patient_mean, int workers = 1);

}  // namespace armr
