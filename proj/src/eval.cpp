#include "mhls/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <set>

namespace mhls {

namespace {

void require_pairs(std::span<const double> scores, std::span<const std::size_t> labels) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("scores (" + std::to_string(scores.size()) + ") and labels (" +
                                std::to_string(labels.size()) + ") differ in length");
  }
  if (scores.empty()) throw std::invalid_argument("no scores to evaluate");
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::vector<std::size_t> labels_of(const std::vector<LabeledSequence>& set) {
  std::vector<std::size_t> out;
  for (const auto& s : set) out.push_back(s.label);
  return out;
}

std::string fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

Metrics prf1(std::span<const double> scores, std::span<const std::size_t> labels, double tau) {
  require_pairs(scores, labels);
  Metrics m;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= tau;
    const bool actual = labels[i] == 1;
    if (predicted && actual) ++m.counts.tp;
    else if (predicted) ++m.counts.fp;
    else if (actual) ++m.counts.fn;
    else ++m.counts.tn;
  }
  m.precision = ratio(m.counts.tp, m.counts.tp + m.counts.fp);
  m.recall = ratio(m.counts.tp, m.counts.tp + m.counts.fn);
  const double pr = m.precision + m.recall;
  m.f1 = pr > 0.0 ? 2.0 * m.precision * m.recall / pr : 0.0;
  return m;
}

std::vector<double> default_threshold_grid() {
  std::vector<double> grid(101);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = static_cast<double>(i) / 100.0;
  return grid;
}

std::vector<CurvePoint> threshold_curve(std::span<const double> scores,
                                        std::span<const std::size_t> labels,
                                        std::span<const double> grid) {
  if (grid.empty()) throw std::invalid_argument("threshold grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] >= 0.0 && grid[i] <= 1.0) || (i > 0 && !(grid[i] > grid[i - 1]))) {
      throw std::invalid_argument("threshold grid must be strictly increasing within [0, 1]");
    }
  }
  std::vector<CurvePoint> curve;
  for (double tau : grid) {
    const Metrics m = prf1(scores, labels, tau);
    curve.push_back({tau, m.precision, m.recall, m.f1});
  }
  return curve;
}

double select_threshold(std::span<const double> scores, std::span<const std::size_t> labels,
                        std::span<const double> grid) {
  const std::vector<CurvePoint> curve = threshold_curve(scores, labels, grid);
  const CurvePoint* best = &curve.front();
  for (const CurvePoint& p : curve) {
    if (p.f1 > best->f1) best = &p;
  }
  return best->tau;
}

void write_curve_csv(std::ostream& out, std::span<const CurvePoint> curve) {
  out << "tau,precision,recall,f1\n";
  for (const CurvePoint& p : curve) {
    out << fixed(p.tau, 2) << ',' << p.precision << ',' << p.recall << ',' << p.f1 << '\n';
  }
}

FoldTrainer sequence_trainer(const TrainConfig& cfg) {
  return [cfg](const PreparedSplit& split, std::size_t fold) {
    TrainConfig fold_cfg = cfg;
    fold_cfg.seed = cfg.seed + fold;
    const TrainResult result = train(split.train, split.val, fold_cfg);
    return FoldScores{final_step_scores(result.best, split.val),
                      final_step_scores(result.best, split.test), result.best_epoch,
                      result.best_val_loss};
  };
}

FoldTrainer logreg_trainer(const LogRegConfig& cfg) {
  return [cfg](const PreparedSplit& split, std::size_t fold) {
    LogRegConfig fold_cfg = cfg;
    fold_cfg.seed = cfg.seed + fold;
    const LogRegResult result = train_logreg(split.flat_train, split.flat_val, fold_cfg);
    return FoldScores{logreg_scores(result.best, split.flat_val),
                      logreg_scores(result.best, split.flat_test), result.best_epoch,
                      result.best_val_loss};
  };
}

std::size_t MetricsReport::succeeded() const {
  return static_cast<std::size_t>(
      std::count_if(folds.begin(), folds.end(), [](const FoldResult& f) { return f.ok; }));
}

void summarize(MetricsReport& report) {
  auto summary = [&report](double Metrics::*field) {
    std::vector<double> xs;
    for (const FoldResult& f : report.folds) {
      if (f.ok) xs.push_back(f.test.*field);
    }
    Summary s;
    if (xs.empty()) return s;
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(xs.size());
    if (xs.size() > 1) {
      double ss = 0.0;
      for (double x : xs) ss += (x - s.mean) * (x - s.mean);
      s.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    return s;
  };
  report.precision = summary(&Metrics::precision);
  report.recall = summary(&Metrics::recall);
  report.f1 = summary(&Metrics::f1);
}

MetricsReport evaluate_protocol(const std::string& model, const Dataset& data,
                                std::span<const Split> splits, const FoldTrainer& trainer,
                                std::span<const double> grid, const WarningSink& warn) {
  MetricsReport report;
  report.model = model;
  report.t_w = data.t_w;
  for (std::size_t k = 0; k < splits.size(); ++k) {
    FoldResult fold;
    fold.fold = k;
    try {
      const PreparedSplit prepared = prepare_split(data, splits[k]);
      const FoldScores scores = trainer(prepared, k);
      const std::vector<std::size_t> val_labels = labels_of(prepared.val);
      const std::vector<std::size_t> test_labels = labels_of(prepared.test);
      fold.threshold = select_threshold(scores.val, val_labels, grid);
      fold.test = prf1(scores.test, test_labels, fold.threshold);
      fold.best_epoch = scores.best_epoch;
      fold.val_loss = scores.val_loss;
      fold.ok = true;
    } catch (const std::exception& e) {
      fold.error = e.what();
      if (warn) warn(model + " fold " + std::to_string(k) + " failed and is excluded: " + e.what());
    }
    report.folds.push_back(std::move(fold));
  }
  summarize(report);
  return report;
}

void write_report_csv(std::ostream& out, std::span<const MetricsReport> reports, bool header) {
  if (header) out << "model,t_w,fold,precision,recall,f1,threshold\n";
  for (const MetricsReport& r : reports) {
    for (const FoldResult& f : r.folds) {
      out << r.model << ',' << r.t_w << ',' << f.fold << ',';
      if (f.ok) {
        out << f.test.precision << ',' << f.test.recall << ',' << f.test.f1 << ','
            << fixed(f.threshold, 2) << '\n';
      } else {
        out << "nan,nan,nan,nan\n";
      }
    }
  }
}

void write_report_table(std::ostream& out, std::span<const MetricsReport> reports) {
  std::vector<std::string> models;
  std::set<std::size_t> windows;
  std::map<std::pair<std::string, std::size_t>, const MetricsReport*> cell;
  for (const MetricsReport& r : reports) {
    if (std::find(models.begin(), models.end(), r.model) == models.end()) models.push_back(r.model);
    windows.insert(r.t_w);
    cell[{r.model, r.t_w}] = &r;
  }
  auto pm = [](const Summary& s) { return fixed(s.mean, 3) + " +/- " + fixed(s.std, 3); };
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-12s", "model");
  out << buf;
  for (std::size_t t : windows) {
    const std::string head = "t_w=" + std::to_string(t);
    std::snprintf(buf, sizeof buf, " | %-17s %-17s %-17s", (head + " F1").c_str(), "precision",
                  "recall");
    out << buf;
  }
  out << '\n';
  for (const std::string& m : models) {
    std::snprintf(buf, sizeof buf, "%-12s", m.c_str());
    out << buf;
    for (std::size_t t : windows) {
      const auto it = cell.find({m, t});
      if (it == cell.end()) {
        std::snprintf(buf, sizeof buf, " | %-17s %-17s %-17s", "-", "-", "-");
      } else {
        const MetricsReport& r = *it->second;
        std::snprintf(buf, sizeof buf, " | %-17s %-17s %-17s", pm(r.f1).c_str(),
                      pm(r.precision).c_str(), pm(r.recall).c_str());
      }
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace mhls
