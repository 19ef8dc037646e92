#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mhls/dataset.hpp"
#include "mhls/logreg.hpp"
#include "mhls/train.hpp"

namespace mhls {

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

struct Metrics {
  ConfusionCounts counts;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Positive iff score >= tau. Zero denominators give 0. Throws
/// std::invalid_argument for mismatched or empty inputs.
Metrics prf1(std::span<const double> scores, std::span<const std::size_t> labels, double tau);

/// 0.00, 0.01, ..., 1.00.
std::vector<double> default_threshold_grid();

/// Grid point with the highest F1; the smallest on ties.
double select_threshold(std::span<const double> scores, std::span<const std::size_t> labels,
                        std::span<const double> grid);

struct CurvePoint {
  double tau = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Throws std::invalid_argument unless the grid is strictly increasing in [0, 1].
std::vector<CurvePoint> threshold_curve(std::span<const double> scores,
                                        std::span<const std::size_t> labels,
                                        std::span<const double> grid);
void write_curve_csv(std::ostream& out, std::span<const CurvePoint> curve);

/// What a model produces on one fold.
struct FoldScores {
  std::vector<double> val;
  std::vector<double> test;
  std::size_t best_epoch = 0;
  double val_loss = 0.0;
};

using FoldTrainer = std::function<FoldScores(const PreparedSplit& split, std::size_t fold)>;

/// Trains from cfg.seed + fold on each fold.
FoldTrainer sequence_trainer(const TrainConfig& cfg);
FoldTrainer logreg_trainer(const LogRegConfig& cfg);

struct FoldResult {
  std::size_t fold = 0;
  bool ok = false;
  std::string error;
  double threshold = 0.0;
  std::size_t best_epoch = 0;
  double val_loss = 0.0;
  Metrics test;
};

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single fold
};

struct MetricsReport {
  std::string model;
  std::size_t t_w = 0;
  std::vector<FoldResult> folds;
  Summary precision, recall, f1;

  std::size_t succeeded() const;
};

/// Recomputes the summaries from the successful folds.
void summarize(MetricsReport& report);

/// Per fold: fit scalers on train, train, pick the F1-maximizing threshold on
/// validation, score the test fold. A failing fold is recorded and excluded
/// from the summaries with a warning.
MetricsReport evaluate_protocol(const std::string& model, const Dataset& data,
                                std::span<const Split> splits, const FoldTrainer& trainer,
                                std::span<const double> grid, const WarningSink& warn = {});

/// model,t_w,fold,precision,recall,f1,threshold
void write_report_csv(std::ostream& out, std::span<const MetricsReport> reports,
                      bool header = true);
/// One row per model, one F1 / precision / recall column group per t_w.
void write_report_table(std::ostream& out, std::span<const MetricsReport> reports);

}  // namespace mhls
