#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "armr/records.hpp"
#include "json.hpp"

namespace armr {

/// Parameters of the synthetic cohort. Visit counts and vocabulary sizes
/// default to those of a processed ICU cohort; about 30% of each follow-up
/// prescription is newly introduced.
struct GeneratorConfig {
  int num_patients = 1000;
  double mean_visits = 2.37;
  int max_visits = 29;
  Vocab vocab{1958, 1430, 131};
  double target_new_drug_ratio = 0.30;
  /// Per-day hazard with which an active condition resolves; drives how
  /// fast prescriptions drift apart as the gap between admissions grows.
  double similarity_decay_rate = 0.004;
  double mean_gap_days = 120.0;
  int num_clusters = 64;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
};

/// Deterministic cohort. Every patient carries a set of active condition
/// clusters that evolves between visits: clusters resolve with a hazard that
/// grows with the gap, resolved ones occasionally recur and fresh ones appear.
/// Each visit's diagnoses and procedures are drawn from the active clusters'
/// code pools. A cluster also owns a pool of interchangeable drugs, from which
/// the patient settles on a personal regimen of two or three when the cluster
/// first activates. Prescriptions keep regimen drugs of still-active clusters
/// and add the regimens of newly activated ones; the number of new drugs per
/// follow-up visit is set so the expected new-drug share matches
/// target_new_drug_ratio.
/// Patient p depends only on (seed, p), so output is byte-identical per seed.
std::vector<PatientRecord> generate_cohort(const GeneratorConfig& config);

struct DatasetSplit {
  std::vector<PatientRecord> train;
  std::vector<PatientRecord> validation;
  std::vector<PatientRecord> test;
};

/// Patient-level partition. Sizes are round(n * r0), round(n * r1) and the
/// remainder; assignment is a seeded shuffle. Throws if any part is empty.
DatasetSplit split_dataset(const std::vector<PatientRecord>& records,
                           const std::array<double, 3>& ratios, std::uint64_t seed);

}  // namespace armr
