#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "armr/metrics.hpp"
#include "armr/model.hpp"
#include "armr/optimizer.hpp"
#include "json.hpp"

namespace armr {

/// Raised when a loss turns non-finite; the message names the patient.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  int epochs = 10;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  int workers = 1;  // evaluation fan-out only
  Aggregation aggregation = Aggregation::patient_mean;
};

/// One line of the training log.
struct EpochLog {
  int epoch = 0;
  std::string split;  // "train" or "validation"
  double jaccard = 0.0;
  double f1 = 0.0;
  double prauc = 0.0;
  double loss = 0.0;  // mean per-patient summed loss

  nlohmann::json to_json() const;
};

struct TrainResult {
  std::vector<EpochLog> log;
  int best_epoch = 0;  // by validation Jaccard; 0 when no validation set
  double best_validation_jaccard = 0.0;
  std::vector<Matrix> best_parameters;  // store order; empty when no validation set
};

/// Patient-level training: per patient, the loss is summed over all visits and
/// one Adam step is taken. Patients are visited in an order reshuffled every
/// epoch from the (seed, "shuffle", epoch) stream.
///
/// Train-split metrics in the log come from the forward passes made during
/// the epoch (before each patient's update). Validation metrics use a full
/// evaluation pass after the epoch.
class Trainer {
 public:
  Trainer(Model& model, TrainConfig config);

  /// Runs epochs [start_epoch + 1, config.epochs]. `on_epoch` sees each log line as it is made.
  TrainResult run(std::span<const PatientRecord> train, std::span<const PatientRecord> validation,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

  /// One patient step; returns the patient's loss before the update.
  double step(const PatientRecord& record, std::vector<Eigen::RowVectorXd>* probs = nullptr);

  Adam& optimizer() { return adam_; }
  int epochs_done() const { return epochs_done_; }
  void set_epochs_done(int e) { epochs_done_ = e; }

  /// Parameters, optimizer moments and epoch counter, enough to resume exactly.
  Checkpoint state_checkpoint() const;
  void restore(const Checkpoint& ckpt);

 private:
  Model* model_;
  TrainConfig config_;
  Adam adam_;
  int epochs_done_ = 0;
};

/// Snapshots and restores parameter values in store order.
std::vector<Matrix> snapshot_parameters(const ParameterStore& params);
void restore_snapshot(ParameterStore& params, const std::vector<Matrix>& values);

}  // namespace armr
