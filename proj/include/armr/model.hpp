#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "armr/arm.hpp"
#include "armr/autodiff.hpp"
#include "armr/encoder.hpp"
#include "armr/layers.hpp"
#include "armr/records.hpp"
#include "json.hpp"

namespace armr {

/// Full model and its ablations.
enum class Variant { full, no_ptl, no_ptl_l, no_ptl_n, no_arm };

inline constexpr Variant kAllVariants[] = {Variant::full, Variant::no_ptl, Variant::no_ptl_l,
                                           Variant::no_ptl_n, Variant::no_arm};

std::string_view to_string(Variant v);
/// Accepts "full", "no-ptl", "no-ptl-l", "no-ptl-n", "no-arm".
Variant parse_variant(std::string_view name);
TemporalMode temporal_mode(Variant v);

struct ModelConfig {
  Vocab vocab;
  int dim = 64;
  int split_n = 2;
  int state_size = 16;
  double alpha_loss = 0.7;
  double delta = 0.5;
  Variant variant = Variant::full;

  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

/// Recommender: patient encoder, medication encoder and the two output heads.
///   o1 = FF_o1(flatten(h_patient))                         (1 x |M|)
///   o2 = cosine(FF_o2(flatten(h_patient)), rows of E'_m)    (1 x |M|)
///   p  = sigmoid(w1 * o1 + w2 * o2)
class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t seed);

  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  /// Probabilities (1 x |M|) for visit t (1-based). Uses diagnoses and
  /// procedures of visits 1..t and medications of visits 1..t-1.
  Var forward_visit(Graph& g, const PatientRecord& record, int t) const;

  /// Sum of the combined loss over visits 1..T. When `probs` is non-null the
  /// per-visit probabilities are appended to it.
  Var patient_loss(Graph& g, const PatientRecord& record,
                   std::vector<Eigen::RowVectorXd>* probs = nullptr) const;

  const ModelConfig& config() const { return config_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }

  const PatientEncoder& encoder() const { return encoder_; }
  const MedicationEncoder& medications() const { return medications_; }
  const FeedForward& head_direct() const { return ff_o1_; }
  const FeedForward& head_similarity() const { return ff_o2_; }
  const Parameter& w1() const { return *w1_; }
  const Parameter& w2() const { return *w2_; }

 private:
  ModelConfig config_;
  ParameterStore params_;
  PatientEncoder encoder_;
  MedicationEncoder medications_;
  FeedForward ff_o1_;
  FeedForward ff_o2_;
  Parameter* w1_ = nullptr;
  Parameter* w2_ = nullptr;
};

/// Thresholded output for one visit.
struct VisitPrediction {
  Eigen::RowVectorXd probs;
  CodeSet predicted;  // {j : probs_j > delta}
  CodeSet target;
};

/// Strict threshold: j is recommended iff probs_j > delta.
CodeSet threshold_predictions(const Eigen::RowVectorXd& probs, double delta);

std::vector<VisitPrediction> predict(const Model& model, const PatientRecord& record);

}  // namespace armr
