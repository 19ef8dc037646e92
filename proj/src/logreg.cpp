#include "mhls/logreg.hpp"

#include <algorithm>
#include <cmath>

#include "mhls/adam.hpp"

namespace mhls {

LogisticRegression LogisticRegression::zeros(std::size_t features) {
  if (features == 0) throw DimensionError("logistic regression needs at least one feature");
  return {Tensor(Shape{features}), Tensor(Shape{1})};
}

double LogisticRegression::probability(const Tensor& x) const {
  require_same_shape("logistic regression", w.shape(), x.shape());
  double s = b[0];
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * x[i];
  return sigmoid(s);
}

Tensor LogisticRegression::predict(const Tensor& x) const {
  const double p = probability(x);
  return Tensor(Shape{2}, {1.0 - p, p});
}

Var LogisticRegression::forward(Tape& tape, Var x) const {
  const Var p = sigmoid(add(dot(tape.param(w), x), tape.param(b)));
  return concat(affine(p, -1.0, 1.0), p);
}

Var logreg_loss(const LogisticRegression& model, Tape& tape, const LabeledVector& example,
                double epsilon) {
  const Var probs = model.forward(tape, tape.constant(example.x));
  return cross_entropy(smoothed_targets(example.label, 2, epsilon), probs,
                       kLogClamp);
}

double mean_logreg_loss(const LogisticRegression& model, std::span<const LabeledVector> set,
                        double epsilon) {
  if (set.empty()) throw std::invalid_argument("mean_logreg_loss: empty set");
  double total = 0.0;
  for (const LabeledVector& e : set) {
    const Tensor p = model.predict(e.x);
    const Tensor target = smoothed_targets(e.label, p.size(), epsilon);
    for (std::size_t k = 0; k < p.size(); ++k) {
      total -= target[k] * std::log(std::max(p[k], kLogClamp));
    }
  }
  return total / static_cast<double>(set.size());
}

std::vector<double> logreg_scores(const LogisticRegression& model,
                                  std::span<const LabeledVector> set,
                                  std::size_t positive_class) {
  std::vector<double> scores;
  scores.reserve(set.size());
  for (const LabeledVector& e : set) {
    const double p = model.probability(e.x);
    scores.push_back(positive_class == 1 ? p : 1.0 - p);
  }
  return scores;
}

LogRegResult train_logreg(std::span<const LabeledVector> train_set,
                          std::span<const LabeledVector> val_set, const LogRegConfig& cfg) {
  if (train_set.empty() || val_set.empty()) {
    throw std::invalid_argument("train_logreg: training and validation sets must be nonempty");
  }
  if (cfg.batch == 0 || cfg.epochs == 0 || !(cfg.lr > 0.0)) {
    throw std::invalid_argument("train_logreg: batch, epochs and lr must be positive");
  }
  LogisticRegression model = LogisticRegression::zeros(train_set[0].x.size());
  const std::vector<Tensor*> params = {&model.w, &model.b};
  const std::vector<std::string> names = {"logreg.w", "logreg.b"};
  std::vector<Tensor> grads = {Tensor(model.w.shape()), Tensor(model.b.shape())};
  Adam adam(AdamConfig{cfg.lr});
  LogRegResult result{model, 0, INFINITY, {}};
  Tape tape;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const std::vector<std::size_t> order = epoch_order(train_set.size(), cfg.seed, epoch);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t end = std::min(order.size(), start + cfg.batch);
      for (Tensor& g : grads) g.fill(0.0);
      for (std::size_t k = start; k < end; ++k) {
        tape.clear();
        const Var loss = logreg_loss(model, tape, train_set[order[k]], cfg.epsilon);
        epoch_loss += loss.value()[0];
        tape.backward(loss);
        tape.for_each_param_grad([&](const Tensor& param, const Tensor& grad) {
          Tensor& acc = &param == &model.w ? grads[0] : grads[1];
          for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += grad[i];
        });
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      for (std::size_t i = 0; i < grads[0].size(); ++i) {
        grads[0][i] = grads[0][i] * scale + 2.0 * cfg.l2 * model.w[i];
      }
      for (std::size_t i = 0; i < grads[1].size(); ++i) grads[1][i] *= scale;
      adam.step(params, grads, names);
    }
    EpochRecord record{epoch, epoch_loss / static_cast<double>(train_set.size()),
                       mean_logreg_loss(model, val_set, cfg.epsilon), adam.steps_taken()};
    result.history.push_back(record);
    if (record.val_loss < result.best_val_loss) {
      result.best_val_loss = record.val_loss;
      result.best_epoch = epoch;
      result.best = model;
    }
  }
  return result;
}

}  // namespace mhls
