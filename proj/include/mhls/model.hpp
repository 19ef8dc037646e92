#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mhls/autograd.hpp"
#include "mhls/cells.hpp"

namespace mhls {

enum class CellKind { lstm, hyper, mhyper };

/// Tags used on disk and on the command line: "lstm", "hyperlstm", "mhyperlstm".
std::string_view variant_tag(CellKind kind);
/// Throws std::invalid_argument for an unknown tag.
CellKind parse_variant(std::string_view tag);

struct SizeConfig {
  std::size_t input = 64;
  std::size_t hidden = 0;
  std::size_t aux_hidden = 0;  // hyper variants only
  std::size_t n_z = 0;         // hyper variants only
  std::size_t fc = 0;          // head width; 0 means "same as hidden"
  bool layer_norm = true;

  std::size_t head_width() const { return fc ? fc : hidden; }

  /// Capacity-matched sizes: LSTM 100; HyperLSTM 75 main, 16 aux, n_z 4;
  /// m-HyperLSTM 32 main, 16 aux, n_z 4.
  static SizeConfig paper(CellKind kind, std::size_t input = 64);
  bool operator==(const SizeConfig&) const = default;
};

/// softmax(W2 relu(W1 h + b1) + b2).
struct ClassifierHead {
  Tensor W1;  // [fc x hidden]
  Tensor b1;  // [fc]
  Tensor W2;  // [classes x fc]
  Tensor b2;  // [classes]

  static ClassifierHead zeros(std::size_t hidden, std::size_t fc, std::size_t classes);
  static ClassifierHead init(std::size_t hidden, std::size_t fc, std::size_t classes,
                             std::mt19937_64& rng);

  template <class F>
  void for_each(F&& f) { visit(*this, f); }
  template <class F>
  void for_each(F&& f) const { visit(*this, f); }

  template <class Self, class F>
  static void visit(Self& self, F& f) {
    f("head.W1", self.W1, ParamRole::weight);
    f("head.b1", self.b1, ParamRole::bias);
    f("head.W2", self.W2, ParamRole::weight);
    f("head.b2", self.b2, ParamRole::bias);
  }
};

using CellParams = std::variant<LstmParams, HyperLstmParams, MixtureHyperParams>;

/// A recurrent cell followed by a per-step classifier head. States start at
/// zero for every sequence.
class SequenceModel {
 public:
  /// Freshly initialized model; the seed fixes every initial weight.
  SequenceModel(CellKind kind, SizeConfig size, std::uint64_t seed, std::size_t classes = 2);
  /// Every parameter zero, including layer-norm gains.
  static SequenceModel zeros(CellKind kind, SizeConfig size, std::size_t classes = 2);

  CellKind kind() const { return kind_; }
  const SizeConfig& size() const { return size_; }
  std::size_t classes() const { return classes_; }
  const CellParams& cell() const { return cell_; }
  CellParams& cell() { return cell_; }
  const ClassifierHead& head() const { return head_; }
  ClassifierHead& head() { return head_; }

  /// One probability vector per input step.
  std::vector<Tensor> forward_sequence(std::span<const Tensor> xs) const;
  /// Records the forward pass on `tape`, binding parameters as param leaves.
  std::vector<Var> forward(Tape& tape, std::span<const Tensor> xs) const;

  /// Visits "cell.*" then "head.*" parameters.
  template <class F>
  void for_each(F&& f) { visit(*this, f); }
  template <class F>
  void for_each(F&& f) const { visit(*this, f); }

  std::size_t cell_param_count() const;
  std::size_t param_count() const;

 private:
  SequenceModel(CellKind kind, SizeConfig size, std::size_t classes, CellParams cell,
                ClassifierHead head);

  template <class Self, class F>
  static void visit(Self& self, F& f) {
    auto prefixed = [&f](const std::string& name, auto& t, ParamRole role) {
      f("cell." + name, t, role);
    };
    std::visit([&prefixed](auto& cell) { cell.for_each(prefixed); }, self.cell_);
    self.head_.for_each(f);
  }

  CellKind kind_;
  SizeConfig size_;
  std::size_t classes_;
  CellParams cell_;
  ClassifierHead head_;
};

/// (1 - eps + eps/K) on the label, eps/K elsewhere. Throws std::out_of_range
/// for a label >= K and std::invalid_argument for eps outside [0, 1).
Tensor smoothed_targets(std::size_t label, std::size_t classes, double epsilon);

/// Per-step weights exp(t - T) for t = 1..T; the last is exactly 1.
std::vector<double> step_weights(std::size_t steps);

/// Probabilities below this are clamped before the log.
inline constexpr double kLogClamp = 1e-12;

/// Sum over steps of exp(t - T) * H(smoothed target, p_t). The L2 term is
/// not included.
Var sequence_loss(std::span<const Var> probs, std::size_t label, double epsilon);
double sequence_loss(std::span<const Tensor> probs, std::size_t label, double epsilon);
/// As above plus l2 * (sum of squared weights of `model`).
double sequence_loss(std::span<const Tensor> probs, std::size_t label, double epsilon,
                     double l2, const SequenceModel& model);

/// Sum of squares of every ParamRole::weight tensor; biases and layer-norm
/// parameters are excluded.
double l2_penalty(const SequenceModel& model);

/// Unweighted mean over steps of H(smoothed target, p_t).
double mean_step_cross_entropy(std::span<const Tensor> probs, std::size_t label,
                               double epsilon);

}  // namespace mhls
