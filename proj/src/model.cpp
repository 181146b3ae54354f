#include "armr/model.hpp"

#include <cmath>
#include <stdexcept>

#include "armr/loss.hpp"

namespace armr {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::no_ptl: return "no-ptl";
    case Variant::no_ptl_l: return "no-ptl-l";
    case Variant::no_ptl_n: return "no-ptl-n";
    case Variant::no_arm: return "no-arm";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : kAllVariants)
    if (to_string(v) == name) return v;
  throw std::invalid_argument("unknown variant '" + std::string(name) +
                              "' (expected full, no-ptl, no-ptl-l, no-ptl-n or no-arm)");
}

TemporalMode temporal_mode(Variant v) {
  switch (v) {
    case Variant::no_ptl: return TemporalMode::recurrent;
    case Variant::no_ptl_l: return TemporalMode::near_only;
    case Variant::no_ptl_n: return TemporalMode::far_only;
    case Variant::full:
    case Variant::no_arm: return TemporalMode::piecewise;
  }
  return TemporalMode::piecewise;
}

void ModelConfig::validate() const {
  if (dim < 1 || split_n < 1 || state_size < 1)
    throw std::invalid_argument("dim, split-n and state-size must be >= 1");
  if (vocab.num_diagnoses < 1 || vocab.num_procedures < 1 || vocab.num_medications < 1)
    throw std::invalid_argument("vocabulary sizes must be >= 1");
  if (!(alpha_loss >= 0.0 && alpha_loss <= 1.0))
    throw std::invalid_argument("alpha-loss must lie in [0, 1]");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
}

nlohmann::json ModelConfig::to_json() const {
  return {{"vocab", vocab_to_json(vocab)},     {"dim", dim},
          {"split_n", split_n},               {"state_size", state_size},
          {"alpha_loss", alpha_loss},         {"delta", delta},
          {"variant", std::string(to_string(variant))}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  const auto& v = j.at("vocab");
  c.vocab = {v.at("num_diagnoses").get<int>(), v.at("num_procedures").get<int>(),
             v.at("num_medications").get<int>()};
  c.dim = j.at("dim").get<int>();
  c.split_n = j.at("split_n").get<int>();
  c.state_size = j.at("state_size").get<int>();
  c.alpha_loss = j.at("alpha_loss").get<double>();
  c.delta = j.at("delta").get<double>();
  c.variant = parse_variant(j.at("variant").get<std::string>());
  return c;
}

Model::Model(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng = Rng::stream(seed, "init");
  const TemporalMode mode = temporal_mode(config_.variant);
  const int dim = config_.dim;
  encoder_ = PatientEncoder::create(params_, config_.vocab, mode, dim, config_.split_n,
                                    config_.state_size, rng);
  Parameter& med_embedding = params_.add(
      "med.embedding",
      uniform_matrix(config_.vocab.num_medications, dim, 1.0 / std::sqrt(dim), rng));
  medications_ = MedicationEncoder::create(params_, med_embedding,
                                           config_.variant != Variant::no_arm, mode, dim,
                                           config_.split_n, config_.state_size, rng);
  const int flat = 4 * config_.split_n * dim;
  ff_o1_ = FeedForward::create(params_, "head.o1", flat, 2 * dim, config_.vocab.num_medications,
                               rng);
  ff_o2_ = FeedForward::create(params_, "head.o2", flat, 2 * dim, dim, rng);
  w1_ = &params_.add("head.w1", Matrix::Ones(1, 1));
  w2_ = &params_.add("head.w2", Matrix::Ones(1, 1));
}

Var Model::forward_visit(Graph& g, const PatientRecord& record, int t) const {
  if (t < 1 || t > record.num_visits())
    throw std::out_of_range("forward_visit: visit index " + std::to_string(t) + " not in [1, " +
                            std::to_string(record.num_visits()) + "] for patient " +
                            record.patient_id);
  std::vector<CodeSet> diags, procs, meds;
  for (int i = 0; i < t; ++i) {
    diags.push_back(record.visits[i].diagnoses);
    procs.push_back(record.visits[i].procedures);
    if (i < t - 1) meds.push_back(record.visits[i].medications);
  }
  Var h_patient = encoder_(g, diags, procs);
  Var med_repr = medications_(g, meds);
  Var flat = reshape(h_patient, 1, h_patient.rows() * h_patient.cols());
  Var o1 = ff_o1_(g, flat);
  Var o2 = cosine_rows(ff_o2_(g, flat), med_repr);
  return sigmoid(add(scale(o1, g.param(*w1_)), scale(o2, g.param(*w2_))));
}

Var Model::patient_loss(Graph& g, const PatientRecord& record,
                        std::vector<Eigen::RowVectorXd>* probs) const {
  std::vector<Var> terms;
  for (int t = 1; t <= record.num_visits(); ++t) {
    Var p = forward_visit(g, record, t);
    if (probs) probs->push_back(p.value().row(0));
    const Matrix target =
        multi_hot(record.visits[t - 1].medications, config_.vocab.num_medications);
    terms.push_back(combined_loss(p, target, config_.alpha_loss));
  }
  Var total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = add(total, terms[i]);
  return total;
}

CodeSet threshold_predictions(const Eigen::RowVectorXd& probs, double delta) {
  CodeSet out;
  for (Eigen::Index j = 0; j < probs.size(); ++j)
    if (probs(j) > delta) out.push_back(static_cast<int>(j));
  return out;
}

std::vector<VisitPrediction> predict(const Model& model, const PatientRecord& record) {
  std::vector<VisitPrediction> out;
  Graph g(false);
  for (int t = 1; t <= record.num_visits(); ++t) {
    VisitPrediction vp;
    vp.probs = model.forward_visit(g, record, t).value().row(0);
    vp.predicted = threshold_predictions(vp.probs, model.config().delta);
    vp.target = record.visits[t - 1].medications;
    out.push_back(std::move(vp));
  }
  return out;
}

}  // namespace armr
