#include "armr/train.hpp"

#include <cmath>
#include <numeric>

namespace armr {

nlohmann::json EpochLog::to_json() const {
  return {{"epoch", epoch}, {"split", split}, {"jaccard", jaccard},
          {"f1", f1},       {"prauc", prauc}, {"loss", loss}};
}

std::vector<Matrix> snapshot_parameters(const ParameterStore& params) {
  std::vector<Matrix> out;
  out.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) out.push_back(params[i].value);
  return out;
}

void restore_snapshot(ParameterStore& params, const std::vector<Matrix>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i].value = values[i];
}

Trainer::Trainer(Model& model, TrainConfig config)
    : model_(&model), config_(config), adam_(model.params(), AdamConfig{config.lr}) {}

double Trainer::step(const PatientRecord& record, std::vector<Eigen::RowVectorXd>* probs) {
  Graph g;
  Var loss = model_->patient_loss(g, record, probs);
  const double value = loss.value()(0, 0);
  if (!std::isfinite(value))
    throw NumericalError("non-finite loss (" + std::to_string(value) + ") for patient " +
                         record.patient_id);
  model_->params().zero_grad();
  g.backward(loss);
  adam_.step();
  return value;
}

TrainResult Trainer::run(std::span<const PatientRecord> train,
                         std::span<const PatientRecord> validation,
                         const std::function<void(const EpochLog&)>& on_epoch) {
  if (train.empty()) throw std::invalid_argument("training set is empty");
  TrainResult result;
  auto emit = [&](const EpochLog& e) {
    result.log.push_back(e);
    if (on_epoch) on_epoch(e);
  };
  const double delta = model_->config().delta;
  while (epochs_done_ < config_.epochs) {
    const int epoch = epochs_done_ + 1;
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng = Rng::stream(config_.seed, "shuffle", static_cast<std::uint64_t>(epoch));
    rng.shuffle(order);

    std::vector<std::vector<VisitScore>> scores(train.size());
    double loss_sum = 0.0;
    for (std::size_t idx : order) {
      const PatientRecord& r = train[idx];
      std::vector<Eigen::RowVectorXd> probs;
      loss_sum += step(r, &probs);
      for (int t = 0; t < r.num_visits(); ++t) {
        VisitPrediction vp{probs[t], threshold_predictions(probs[t], delta),
                           r.visits[t].medications};
        scores[idx].push_back(score_visit(vp));
      }
    }
    std::vector<std::string> ids;
    for (const auto& r : train) ids.push_back(r.patient_id);
    EvalReport tr = aggregate(ids, scores, config_.aggregation);
    emit({epoch, "train", tr.jaccard, tr.f1, tr.prauc, loss_sum / static_cast<double>(train.size())});

    if (!validation.empty()) {
      EvalReport va = evaluate(*model_, validation, config_.aggregation, config_.workers);
      double vloss = 0.0;
      for (const auto& r : validation) {
        Graph g(false);
        vloss += model_->patient_loss(g, r).value()(0, 0);
      }
      emit({epoch, "validation", va.jaccard, va.f1, va.prauc,
            vloss / static_cast<double>(validation.size())});
      if (result.best_epoch == 0 || va.jaccard > result.best_validation_jaccard) {
        result.best_epoch = epoch;
        result.best_validation_jaccard = va.jaccard;
        result.best_parameters = snapshot_parameters(model_->params());
      }
    }
    epochs_done_ = epoch;
  }
  return result;
}

Checkpoint Trainer::state_checkpoint() const {
  Checkpoint ckpt;
  ckpt.meta["model"] = model_->config().to_json();
  ckpt.meta["epochs_done"] = epochs_done_;
  store_parameters(model_->params(), ckpt);
  adam_.save_state(ckpt);
  return ckpt;
}

void Trainer::restore(const Checkpoint& ckpt) {
  restore_parameters(ckpt, model_->params());
  adam_.load_state(ckpt);
  epochs_done_ = ckpt.meta.value("epochs_done", 0);
}

}  // namespace armr
