#include "mhls/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>

namespace mhls {

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("train config: lr must be positive");
  if (epochs < 1) throw std::invalid_argument("train config: epochs must be at least 1");
  if (!(epsilon >= 0.0 && epsilon < 1.0)) {
    throw std::invalid_argument("train config: epsilon must lie in [0, 1)");
  }
  if (!(l2 >= 0.0)) throw std::invalid_argument("train config: l2 must be non-negative");
  if (batch < 1) throw std::invalid_argument("train config: batch must be at least 1");
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch)};
  std::mt19937_64 rng(seq);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

std::size_t select_best_epoch(std::span<const EpochRecord> history) {
  std::size_t best = 0;
  double best_loss = INFINITY;
  for (const EpochRecord& r : history) {
    if (r.val_loss < best_loss) {
      best_loss = r.val_loss;
      best = r.epoch;
    }
  }
  return best;
}

double mean_sequence_loss(const SequenceModel& model, std::span<const LabeledSequence> set,
                          double epsilon) {
  if (set.empty()) throw std::invalid_argument("mean_sequence_loss: empty set");
  double total = 0.0;
  for (const LabeledSequence& s : set) {
    total += sequence_loss(model.forward_sequence(s.steps), s.label, epsilon);
  }
  return total / static_cast<double>(set.size());
}

std::vector<double> final_step_scores(const SequenceModel& model,
                                      std::span<const LabeledSequence> set,
                                      std::size_t positive_class) {
  std::vector<double> scores;
  scores.reserve(set.size());
  for (const LabeledSequence& s : set) {
    scores.push_back(model.forward_sequence(s.steps).back()[positive_class]);
  }
  return scores;
}

namespace {

struct ParamSlot {
  std::string name;
  Tensor* value;
  ParamRole role;
};

}  // namespace

TrainResult train(const SequenceModel& initial, std::span<const LabeledSequence> train_set,
                  std::span<const LabeledSequence> val_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.empty() || val_set.empty()) {
    throw std::invalid_argument("train: training and validation sets must be nonempty");
  }

  SequenceModel model = initial;
  std::vector<ParamSlot> slots;
  model.for_each([&slots](const std::string& name, Tensor& t, ParamRole role) {
    slots.push_back({name, &t, role});
  });
  std::unordered_map<const Tensor*, std::size_t> slot_of;
  for (std::size_t i = 0; i < slots.size(); ++i) slot_of[slots[i].value] = i;

  std::vector<Tensor*> param_ptrs;
  std::vector<std::string> names;
  std::vector<Tensor> grads;
  for (const ParamSlot& s : slots) {
    param_ptrs.push_back(s.value);
    names.push_back(s.name);
    grads.emplace_back(s.value->shape());
  }

  Adam adam(AdamConfig{cfg.lr});
  TrainResult result{model, 0, 0.0, 0.0, {}};
  result.initial_val_loss = mean_sequence_loss(model, val_set, cfg.epsilon);
  result.best_val_loss = INFINITY;
  SequenceModel last_good = model;

  Tape tape;
  bool step_limit_hit = false;
  for (std::size_t epoch = 1; epoch <= cfg.epochs && !step_limit_hit; ++epoch) {
    const std::vector<std::size_t> order = epoch_order(train_set.size(), cfg.seed, epoch);
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t end = std::min(order.size(), start + cfg.batch);
      for (Tensor& g : grads) g.fill(0.0);
      double batch_loss = 0.0;
      try {
        for (std::size_t k = start; k < end; ++k) {
          const LabeledSequence& seq = train_set[order[k]];
          tape.clear();
          const std::vector<Var> probs = model.forward(tape, seq.steps);
          const Var loss = sequence_loss(probs, seq.label, cfg.epsilon);
          const double value = loss.value()[0];
          if (!std::isfinite(value)) throw NonFiniteGradient("non-finite sequence loss");
          batch_loss += value;
          tape.backward(loss);
          tape.for_each_param_grad([&](const Tensor& param, const Tensor& grad) {
            Tensor& acc = grads[slot_of.at(&param)];
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += grad[i];
          });
        }
        const double scale = 1.0 / static_cast<double>(end - start);
        for (std::size_t p = 0; p < slots.size(); ++p) {
          Tensor& g = grads[p];
          const Tensor& value = *slots[p].value;
          const bool decay = cfg.l2 > 0.0 && slots[p].role == ParamRole::weight;
          for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] *= scale;
            if (decay) g[i] += 2.0 * cfg.l2 * value[i];
          }
        }
        adam.step(param_ptrs, grads, names);
      } catch (const NonFiniteGradient& e) {
        throw TrainingDiverged(std::string("training diverged: ") + e.what(), last_good, epoch);
      } catch (const NonFiniteUpdate& e) {
        throw TrainingDiverged(std::string("training diverged: ") + e.what(), last_good, epoch);
      }
      epoch_loss += batch_loss;
      seen += end - start;
      if (cfg.max_steps && adam.steps_taken() >= cfg.max_steps) {
        step_limit_hit = true;
        break;
      }
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = epoch_loss / static_cast<double>(seen);
    record.val_loss = mean_sequence_loss(model, val_set, cfg.epsilon);
    record.steps = adam.steps_taken();
    if (!std::isfinite(record.val_loss)) {
      throw TrainingDiverged("training diverged: non-finite validation loss", last_good, epoch);
    }
    result.history.push_back(record);
    if (record.val_loss < result.best_val_loss) {
      result.best_val_loss = record.val_loss;
      result.best_epoch = epoch;
      result.best = model;
    }
    last_good = model;
    if (on_epoch) on_epoch(record);
  }
  return result;
}

TrainResult train(std::span<const LabeledSequence> train_set,
                  std::span<const LabeledSequence> val_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  return train(SequenceModel(cfg.kind, cfg.size, cfg.seed), train_set, val_set, cfg, on_epoch);
}

}  // namespace mhls
