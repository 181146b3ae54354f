#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "armr/autodiff.hpp"
#include "armr/model.hpp"
#include "json.hpp"

namespace armr {

/// Central-difference step and pass threshold used by the suite.
inline constexpr double kGradCheckStep = 1e-5;
inline constexpr double kGradCheckTolerance = 1e-4;
/// Denominator floor for the relative error: |a - n| / max(|a|, |n|, floor).
inline constexpr double kGradCheckFloor = 1e-3;

double relative_error(double analytic, double numeric);

struct GradCheckResult {
  std::string name;
  int trials = 0;
  std::int64_t entries = 0;
  double max_error = 0.0;
  bool passed = false;
};

struct GradCheckReport {
  std::vector<GradCheckResult> results;
  double seconds = 0.0;

  bool passed() const;
  double max_error() const;
  nlohmann::json to_json() const;
};

/// Builds a scalar loss from the given leaves.
using LossFn = std::function<Var(Graph&, const std::vector<Var>&)>;

/// Largest relative error between backward gradients and central differences
/// over every entry of every input.
double check_gradient(const LossFn& loss, std::vector<Matrix> inputs,
                      double step = kGradCheckStep);

/// Max relative error over every parameter entry of `model` for the summed
/// loss on `record`.
double check_model_gradient(Model& model, const PatientRecord& record,
                            double step = kGradCheckStep);

/// Every primitive on `trials` random draws in [-2, 2], then the end-to-end
/// loss of each variant on small synthetic patients.
GradCheckReport run_gradcheck(std::uint64_t seed, int trials = 100);

/// Tiny config used by the end-to-end checks.
ModelConfig gradcheck_model_config(Variant variant);
/// Model built from gradcheck_model_config with every parameter nudged off its
/// initial value. Fresh initialisation puts zero biases in front of relus fed by
/// empty code sets, which sits exactly on the kink.
Model gradcheck_model(Variant variant, std::uint64_t seed);
/// Synthetic patient with `visits` visits over gradcheck_model_config's vocabulary.
PatientRecord gradcheck_patient(std::uint64_t seed, int visits);

}  // namespace armr
