#include "mhls/model.hpp"

#include <cmath>

namespace mhls {

namespace {

Tensor uniform(Shape shape, double fan_in, std::mt19937_64& rng) {
  const double limit = 1.0 / std::sqrt(fan_in);
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor t(shape);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

}  // namespace

std::string_view variant_tag(CellKind kind) {
  switch (kind) {
    case CellKind::lstm: return "lstm";
    case CellKind::hyper: return "hyperlstm";
    case CellKind::mhyper: return "mhyperlstm";
  }
  return "unknown";
}

CellKind parse_variant(std::string_view tag) {
  if (tag == "lstm") return CellKind::lstm;
  if (tag == "hyperlstm") return CellKind::hyper;
  if (tag == "mhyperlstm") return CellKind::mhyper;
  throw std::invalid_argument("unknown model variant '" + std::string(tag) +
                              "' (expected lstm, hyperlstm or mhyperlstm)");
}

SizeConfig SizeConfig::paper(CellKind kind, std::size_t input) {
  SizeConfig s;
  s.input = input;
  switch (kind) {
    case CellKind::lstm:
      s.hidden = 100;
      break;
    case CellKind::hyper:
      s.hidden = 75;
      s.aux_hidden = 16;
      s.n_z = 4;
      break;
    case CellKind::mhyper:
      s.hidden = 32;
      s.aux_hidden = 16;
      s.n_z = 4;
      break;
  }
  return s;
}

ClassifierHead ClassifierHead::zeros(std::size_t hidden, std::size_t fc, std::size_t classes) {
  return {Tensor(Shape{fc, hidden}), Tensor(Shape{fc}), Tensor(Shape{classes, fc}),
          Tensor(Shape{classes})};
}

ClassifierHead ClassifierHead::init(std::size_t hidden, std::size_t fc, std::size_t classes,
                                    std::mt19937_64& rng) {
  ClassifierHead head = zeros(hidden, fc, classes);
  head.W1 = uniform(Shape{fc, hidden}, static_cast<double>(hidden), rng);
  head.W2 = uniform(Shape{classes, fc}, static_cast<double>(fc), rng);
  return head;
}

// ---------------------------------------------------------------------------

SequenceModel::SequenceModel(CellKind kind, SizeConfig size, std::size_t classes,
                             CellParams cell, ClassifierHead head)
    : kind_(kind), size_(size), classes_(classes), cell_(std::move(cell)),
      head_(std::move(head)) {}

namespace {

void validate(CellKind kind, const SizeConfig& size, std::size_t classes) {
  if (size.input == 0 || size.hidden == 0) {
    throw std::invalid_argument("model: input and hidden sizes must be positive");
  }
  if (kind != CellKind::lstm && (size.aux_hidden == 0 || size.n_z == 0)) {
    throw std::invalid_argument("model: hyper variants need aux_hidden and n_z");
  }
  if (size.layer_norm && (size.hidden < 2 || (kind != CellKind::lstm && size.aux_hidden < 2))) {
    throw std::invalid_argument("model: layer norm needs state sizes of at least 2");
  }
  if (classes < 2) throw std::invalid_argument("model: need at least two classes");
}

}  // namespace

SequenceModel::SequenceModel(CellKind kind, SizeConfig size, std::uint64_t seed,
                             std::size_t classes)
    : kind_(kind), size_(size), classes_(classes) {
  validate(kind, size, classes);
  std::mt19937_64 rng(seed);
  switch (kind) {
    case CellKind::lstm:
      cell_ = LstmParams::init(size.hidden, size.input, size.layer_norm, rng);
      break;
    case CellKind::hyper:
      cell_ = HyperLstmParams::init(size.hidden, size.input, size.aux_hidden, size.n_z,
                                    size.layer_norm, rng);
      break;
    case CellKind::mhyper:
      cell_ = MixtureHyperParams::init(size.hidden, size.input, size.aux_hidden, size.n_z,
                                       size.layer_norm, rng);
      break;
  }
  head_ = ClassifierHead::init(size.hidden, size.head_width(), classes, rng);
}

SequenceModel SequenceModel::zeros(CellKind kind, SizeConfig size, std::size_t classes) {
  validate(kind, size, classes);
  CellParams cell;
  switch (kind) {
    case CellKind::lstm:
      cell = LstmParams::zeros(size.hidden, size.input, size.layer_norm);
      break;
    case CellKind::hyper:
      cell = HyperLstmParams::zeros(size.hidden, size.input, size.aux_hidden, size.n_z,
                                    size.layer_norm);
      break;
    case CellKind::mhyper:
      cell = MixtureHyperParams::zeros(size.hidden, size.input, size.aux_hidden, size.n_z,
                                       size.layer_norm);
      break;
  }
  return SequenceModel(kind, size, classes, std::move(cell),
                       ClassifierHead::zeros(size.hidden, size.head_width(), classes));
}

std::vector<Var> SequenceModel::forward(Tape& tape, std::span<const Tensor> xs) const {
  if (xs.empty()) throw std::invalid_argument("forward_sequence: empty sequence");
  for (const Tensor& x : xs) {
    if (!(x.shape() == Shape{size_.input})) {
      throw DimensionError("forward_sequence: step has shape " + x.shape().str() +
                           ", expected [" + std::to_string(size_.input) + "]");
    }
  }
  const Var W1 = tape.param(head_.W1);
  const Var b1 = tape.param(head_.b1);
  const Var W2 = tape.param(head_.W2);
  const Var b2 = tape.param(head_.b2);
  auto classify = [&](Var h) { return softmax(matmul(W2, relu(matmul(W1, h) + b1)) + b2); };

  std::vector<Var> probs;
  probs.reserve(xs.size());
  std::visit(
      [&](const auto& cell) {
        using P = std::decay_t<decltype(cell)>;
        const auto vars = bind(tape, cell);
        StateVars main = zero_state(tape, size_.hidden);
        if constexpr (std::is_same_v<P, LstmParams>) {
          for (const Tensor& x : xs) {
            main = lstm_step(vars, main, tape.constant(x));
            probs.push_back(classify(main.h));
          }
        } else {
          StateVars aux = zero_state(tape, size_.aux_hidden);
          for (const Tensor& x : xs) {
            if constexpr (std::is_same_v<P, HyperLstmParams>) {
              const HyperStepVars next = hyper_lstm_step(vars, main, aux, tape.constant(x));
              main = next.main;
              aux = next.aux;
            } else {
              const MixtureStepVars next = m_hyper_step(vars, main, aux, tape.constant(x));
              main = next.main;
              aux = next.aux;
            }
            probs.push_back(classify(main.h));
          }
        }
      },
      cell_);
  return probs;
}

std::vector<Tensor> SequenceModel::forward_sequence(std::span<const Tensor> xs) const {
  Tape tape;
  const std::vector<Var> probs = forward(tape, xs);
  std::vector<Tensor> out;
  out.reserve(probs.size());
  for (Var p : probs) out.push_back(p.value());
  return out;
}

std::size_t SequenceModel::cell_param_count() const {
  return std::visit([](const auto& cell) { return mhls::param_count(cell); }, cell_);
}

std::size_t SequenceModel::param_count() const {
  std::size_t n = 0;
  for_each([&n](const std::string&, const Tensor& t, ParamRole) { n += t.size(); });
  return n;
}

// ---------------------------------------------------------------------------
// Loss

Tensor smoothed_targets(std::size_t label, std::size_t classes, double epsilon) {
  if (label >= classes) {
    throw std::out_of_range("smoothed_targets: label " + std::to_string(label) +
                            " out of range for " + std::to_string(classes) + " classes");
  }
  if (!(epsilon >= 0.0 && epsilon < 1.0)) {
    throw std::invalid_argument("smoothed_targets: epsilon must lie in [0, 1)");
  }
  const double off = epsilon / static_cast<double>(classes);
  Tensor t = Tensor::filled(Shape{classes}, off);
  t[label] = 1.0 - epsilon + off;
  return t;
}

std::vector<double> step_weights(std::size_t steps) {
  std::vector<double> w(steps);
  for (std::size_t t = 1; t <= steps; ++t) {
    w[t - 1] = std::exp(static_cast<double>(t) - static_cast<double>(steps));
  }
  return w;
}

Var sequence_loss(std::span<const Var> probs, std::size_t label, double epsilon) {
  if (probs.empty()) throw std::invalid_argument("sequence_loss: empty sequence");
  const Tensor target = smoothed_targets(label, probs.front().value().size(), epsilon);
  const std::vector<double> weights = step_weights(probs.size());
  Var total;
  for (std::size_t t = 0; t < probs.size(); ++t) {
    Var term = cross_entropy(target, probs[t], kLogClamp);
    if (weights[t] != 1.0) term = affine(term, weights[t], 0.0);
    total = total.valid() ? total + term : term;
  }
  return total;
}

double sequence_loss(std::span<const Tensor> probs, std::size_t label, double epsilon) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(probs.size());
  for (const Tensor& p : probs) vars.push_back(tape.constant(p));
  return sequence_loss(vars, label, epsilon).value()[0];
}

double sequence_loss(std::span<const Tensor> probs, std::size_t label, double epsilon,
                     double l2, const SequenceModel& model) {
  return sequence_loss(probs, label, epsilon) + l2 * l2_penalty(model);
}

double l2_penalty(const SequenceModel& model) {
  double total = 0.0;
  model.for_each([&total](const std::string&, const Tensor& t, ParamRole role) {
    if (role != ParamRole::weight) return;
    for (double v : t.data()) total += v * v;
  });
  return total;
}

double mean_step_cross_entropy(std::span<const Tensor> probs, std::size_t label,
                               double epsilon) {
  if (probs.empty()) throw std::invalid_argument("mean_step_cross_entropy: empty sequence");
  const Tensor target = smoothed_targets(label, probs.front().size(), epsilon);
  double total = 0.0;
  for (const Tensor& p : probs) {
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (target[k] != 0.0) total -= target[k] * std::log(std::max(p[k], kLogClamp));
    }
  }
  return total / static_cast<double>(probs.size());
}

}  // namespace mhls
