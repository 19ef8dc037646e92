#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "mhls/adam.hpp"
#include "mhls/model.hpp"

namespace mhls {

struct LabeledSequence {
  std::vector<Tensor> steps;
  std::size_t label = 0;
};

struct TrainConfig {
  CellKind kind = CellKind::mhyper;
  SizeConfig size = SizeConfig::paper(CellKind::mhyper);
  double lr = 1e-4;
  std::size_t epochs = 50;
  double epsilon = 0.2;
  double l2 = 1e-4;
  std::uint64_t seed = 1;
  std::size_t batch = 32;
  /// Stop after this many optimizer steps; 0 means no limit.
  std::size_t max_steps = 0;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean data loss seen during the epoch
  double val_loss = 0.0;
  std::size_t steps = 0;  // optimizer steps taken so far
};

struct TrainResult {
  SequenceModel best;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  double initial_val_loss = 0.0;
  std::vector<EpochRecord> history;
};

/// Raised when the loss or a gradient stops being finite. Carries the model
/// as of the last completed epoch (or the initial model).
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, SequenceModel last_good, std::size_t epoch)
      : std::runtime_error(what), last_good_(std::move(last_good)), epoch_(epoch) {}

  const SequenceModel& last_good() const { return last_good_; }
  std::size_t epoch() const { return epoch_; }

 private:
  SequenceModel last_good_;
  std::size_t epoch_;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch Adam on the mean weighted sequence loss plus l2 * |weights|^2.
/// After every epoch the validation loss (data term only) is measured and the
/// epoch with the lowest one is returned; ties keep the earlier epoch. The
/// shuffling schedule depends only on cfg.seed.
TrainResult train(const SequenceModel& initial, std::span<const LabeledSequence> train_set,
                  std::span<const LabeledSequence> val_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});
/// Initializes the model from cfg.kind, cfg.size and cfg.seed first.
TrainResult train(std::span<const LabeledSequence> train_set,
                  std::span<const LabeledSequence> val_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// Mean of sequence_loss (no L2) over a set.
double mean_sequence_loss(const SequenceModel& model, std::span<const LabeledSequence> set,
                          double epsilon);

/// Positive-class probability at the last step, one score per sequence.
std::vector<double> final_step_scores(const SequenceModel& model,
                                      std::span<const LabeledSequence> set,
                                      std::size_t positive_class = 1);

/// Epoch with the lowest validation loss; the earliest one on ties. Returns 0
/// for an empty history.
std::size_t select_best_epoch(std::span<const EpochRecord> history);

/// Deterministic permutation of 0..n-1 for one epoch.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch);

}  // namespace mhls
