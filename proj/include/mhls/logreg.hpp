#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mhls/autograd.hpp"
#include "mhls/train.hpp"

namespace mhls {

struct LabeledVector {
  Tensor x;
  std::size_t label = 0;
};

/// p(high) = sigmoid(w . x + b) over a fixed-size feature vector.
struct LogisticRegression {
  Tensor w;  // [features]
  Tensor b;  // [1]

  static LogisticRegression zeros(std::size_t features);

  double probability(const Tensor& x) const;
  /// [1 - p, p].
  Tensor predict(const Tensor& x) const;
  Var forward(Tape& tape, Var x) const;
  std::size_t param_count() const { return w.size() + b.size(); }
};

struct LogRegConfig {
  double lr = 1e-4;
  std::size_t epochs = 50;
  double epsilon = 0.2;
  double l2 = 1e-4;
  std::uint64_t seed = 1;
  std::size_t batch = 32;
};

struct LogRegResult {
  LogisticRegression best;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  std::vector<EpochRecord> history;
};

/// Smoothed cross-entropy of one example.
Var logreg_loss(const LogisticRegression& model, Tape& tape, const LabeledVector& example,
                double epsilon);
double mean_logreg_loss(const LogisticRegression& model, std::span<const LabeledVector> set,
                        double epsilon);
std::vector<double> logreg_scores(const LogisticRegression& model,
                                  std::span<const LabeledVector> set,
                                  std::size_t positive_class = 1);

/// Same protocol as train(): mini-batch Adam from zero weights, L2 on w,
/// best epoch by validation loss.
LogRegResult train_logreg(std::span<const LabeledVector> train_set,
                          std::span<const LabeledVector> val_set, const LogRegConfig& cfg);

}  // namespace mhls
