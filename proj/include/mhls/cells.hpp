#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <random>
#include <string>

#include "mhls/autograd.hpp"
#include "mhls/tensor.hpp"

namespace mhls {

/// Gate order used by every parameter array: input, forget, output, candidate.
inline constexpr std::size_t kGates = 4;
inline constexpr std::array<const char*, kGates> kGateNames = {"i", "f", "o", "c"};
inline constexpr std::size_t kForgetGate = 1;
/// Layer norms: one per gate pre-activation plus one on the memory cell.
inline constexpr std::size_t kNorms = kGates + 1;
inline constexpr std::size_t kCellNorm = kGates;
inline constexpr std::array<const char*, kNorms> kNormNames = {"i", "f", "o", "c", "cell"};

inline constexpr double kLayerNormEps = 1e-5;

/// How a parameter participates in regularization.
enum class ParamRole { weight, bias, norm };

struct LayerNormParams {
  Tensor gain;
  Tensor shift;
};

/// Plain LSTM without peepholes. With layer_norm set, every gate
/// pre-activation and the memory cell (before the output tanh) are normalized.
struct LstmParams {
  std::size_t hidden = 0;
  std::size_t input = 0;
  bool layer_norm = true;
  std::array<Tensor, kGates> W;  // [hidden x hidden]
  std::array<Tensor, kGates> I;  // [hidden x input]
  std::array<Tensor, kGates> b;  // [hidden]
  std::array<LayerNormParams, kNorms> norm;

  static LstmParams zeros(std::size_t hidden, std::size_t input, bool layer_norm);
  static LstmParams init(std::size_t hidden, std::size_t input, bool layer_norm,
                           std::mt19937_64& rng);

  template <class F>
  void for_each(F&& f) { visit(*this, f, ""); }
  template <class F>
  void for_each(F&& f) const { visit(*this, f, ""); }

  template <class Self, class F>
  static void visit(Self& self, F& f, const std::string& prefix) {
    for (std::size_t g = 0; g < kGates; ++g) {
      const std::string gate = kGateNames[g];
      f(prefix + "W_" + gate, self.W[g], ParamRole::weight);
      f(prefix + "I_" + gate, self.I[g], ParamRole::weight);
      f(prefix + "b_" + gate, self.b[g], ParamRole::bias);
    }
    if (!self.layer_norm) return;
    for (std::size_t k = 0; k < kNorms; ++k) {
      const std::string name = prefix + "ln_" + kNormNames[k];
      f(name + ".gain", self.norm[k].gain, ParamRole::norm);
      f(name + ".shift", self.norm[k].shift, ParamRole::norm);
    }
  }
};

/// z = W_hz * h_aux + b_h; d = W_hd * z scales the rows of a base matrix.
struct RowScaleHead {
  Tensor W_hz;  // [n_z x aux_hidden]
  Tensor b_h;   // [n_z]
  Tensor W_hd;  // [hidden x n_z]
};

/// Generated bias: W_bd * (W_bz * h_aux) added to the static base bias.
struct BiasHead {
  Tensor W_bz;  // [n_z x aux_hidden]
  Tensor W_bd;  // [hidden x n_z]
};

/// HyperLSTM: an auxiliary LSTM over concat(x_t, h_{t-1}) rescales the rows of
/// the main LSTM's recurrent and input weights and generates its bias, with
/// separate heads per gate and per weight family.
struct HyperLstmParams {
  std::size_t hidden = 0;
  std::size_t input = 0;
  std::size_t aux_hidden = 0;
  std::size_t n_z = 0;
  bool layer_norm = true;
  LstmParams main;  // base W*, I*, static bias b*_0 and the main layer norms
  LstmParams aux;
  std::array<RowScaleHead, kGates> w_head;
  std::array<RowScaleHead, kGates> i_head;
  std::array<BiasHead, kGates> b_head;

  static HyperLstmParams zeros(std::size_t hidden, std::size_t input, std::size_t aux_hidden,
                               std::size_t n_z, bool layer_norm);
  static HyperLstmParams init(std::size_t hidden, std::size_t input, std::size_t aux_hidden,
                                std::size_t n_z, bool layer_norm, std::mt19937_64& rng);

  template <class F>
  void for_each(F&& f) { visit(*this, f); }
  template <class F>
  void for_each(F&& f) const { visit(*this, f); }

  template <class Self, class F>
  static void visit(Self& self, F& f) {
    LstmParams::visit(self.main, f, "main.");
    LstmParams::visit(self.aux, f, "aux.");
    for (std::size_t g = 0; g < kGates; ++g) {
      const std::string gate = kGateNames[g];
      f("hyper_W_" + gate + ".W_hz", self.w_head[g].W_hz, ParamRole::weight);
      f("hyper_W_" + gate + ".b_h", self.w_head[g].b_h, ParamRole::bias);
      f("hyper_W_" + gate + ".W_hd", self.w_head[g].W_hd, ParamRole::weight);
      f("hyper_I_" + gate + ".W_hz", self.i_head[g].W_hz, ParamRole::weight);
      f("hyper_I_" + gate + ".b_h", self.i_head[g].b_h, ParamRole::bias);
      f("hyper_I_" + gate + ".W_hd", self.i_head[g].W_hd, ParamRole::weight);
      f("hyper_b_" + gate + ".W_bz", self.b_head[g].W_bz, ParamRole::weight);
      f("hyper_b_" + gate + ".W_bd", self.b_head[g].W_bd, ParamRole::weight);
    }
  }
};

/// m-HyperLSTM: one shared context vector z = sigmoid(W^z h_aux + b^z) mixes
/// n_z banks of main-cell recurrent weights, input weights and biases.
struct MixtureHyperParams {
  std::size_t hidden = 0;
  std::size_t input = 0;
  std::size_t aux_hidden = 0;
  std::size_t n_z = 0;
  bool layer_norm = true;
  LstmParams aux;
  Tensor W_z;                         // [n_z x aux_hidden]
  Tensor b_z;                         // [n_z]
  std::array<Tensor, kGates> W_bank;  // [hidden x hidden x n_z]
  std::array<Tensor, kGates> I_bank;  // [hidden x input x n_z]
  std::array<Tensor, kGates> b_bank;  // [hidden x n_z]
  std::array<LayerNormParams, kNorms> norm;

  static MixtureHyperParams zeros(std::size_t hidden, std::size_t input,
                                  std::size_t aux_hidden, std::size_t n_z, bool layer_norm);
  static MixtureHyperParams init(std::size_t hidden, std::size_t input,
                                   std::size_t aux_hidden, std::size_t n_z, bool layer_norm,
                                   std::mt19937_64& rng);

  template <class F>
  void for_each(F&& f) { visit(*this, f); }
  template <class F>
  void for_each(F&& f) const { visit(*this, f); }

  template <class Self, class F>
  static void visit(Self& self, F& f) {
    LstmParams::visit(self.aux, f, "aux.");
    f("mix.W_z", self.W_z, ParamRole::weight);
    f("mix.b_z", self.b_z, ParamRole::bias);
    for (std::size_t g = 0; g < kGates; ++g) {
      const std::string gate = kGateNames[g];
      f("main.W_" + gate + "_bank", self.W_bank[g], ParamRole::weight);
      f("main.I_" + gate + "_bank", self.I_bank[g], ParamRole::weight);
      f("main.b_" + gate + "_bank", self.b_bank[g], ParamRole::bias);
    }
    if (!self.layer_norm) return;
    for (std::size_t k = 0; k < kNorms; ++k) {
      const std::string name = std::string("main.ln_") + kNormNames[k];
      f(name + ".gain", self.norm[k].gain, ParamRole::norm);
      f(name + ".shift", self.norm[k].shift, ParamRole::norm);
    }
  }
};

/// Number of learnable scalars, including layer-norm and generation heads.
template <class Params>
std::size_t param_count(const Params& p) {
  std::size_t n = 0;
  p.for_each([&n](const std::string&, const Tensor& t, ParamRole) { n += t.size(); });
  return n;
}

/// The LSTM obtained by selecting bank slice k of every weight family, which is
/// what an m-HyperLSTM computes when z is held at the one-hot vector e_k.
LstmParams mixture_component(const MixtureHyperParams& p, std::size_t k);

// ---------------------------------------------------------------------------
// Value-level state and steps.

struct CellState {
  Tensor h;
  Tensor c;

  static CellState zeros(std::size_t hidden);
};

/// When set, replaces the computed mixture vector z.
struct ZInjection {
  std::optional<Tensor> z;
};

/// Generated main-cell weights for a given z.
struct MixtureWeights {
  std::array<Tensor, kGates> W;
  std::array<Tensor, kGates> I;
  std::array<Tensor, kGates> b;
};

CellState lstm_step(const LstmParams& p, const CellState& s, const Tensor& x);

Tensor hyper_rowscale(const Tensor& base, const Tensor& W_hz, const Tensor& b_h,
                      const Tensor& W_hd, const Tensor& h_aux);

struct HyperStep {
  CellState main;
  CellState aux;
};
HyperStep hyper_lstm_step(const HyperLstmParams& p, const CellState& main,
                          const CellState& aux, const Tensor& x);

Tensor mixture_z(const MixtureHyperParams& p, const Tensor& h_aux);
MixtureWeights generated_weights(const MixtureHyperParams& p, const Tensor& z);

struct MixtureStep {
  CellState main;
  CellState aux;
  Tensor z;
};
MixtureStep m_hyper_step(const MixtureHyperParams& p, const CellState& main,
                         const CellState& aux, const Tensor& x, const ZInjection& inject = {});

// ---------------------------------------------------------------------------
// Tape-level steps. Parameters are bound once per tape, then stepped.

struct StateVars {
  Var h;
  Var c;
};

StateVars zero_state(Tape& tape, std::size_t hidden);

struct LstmVars {
  bool layer_norm = true;
  std::array<Var, kGates> W, I, b;
  std::array<Var, kNorms> gain, shift;
};

struct HyperLstmVars {
  LstmVars main;
  LstmVars aux;
  std::array<Var, kGates> w_hz, w_bh, w_hd, i_hz, i_bh, i_hd, b_bz, b_bd;
};

struct MixtureHyperVars {
  bool layer_norm = true;
  LstmVars aux;
  Var W_z, b_z;
  std::array<Var, kGates> W_bank, I_bank, b_bank;
  std::array<Var, kNorms> gain, shift;
};

LstmVars bind(Tape& tape, const LstmParams& p);
HyperLstmVars bind(Tape& tape, const HyperLstmParams& p);
MixtureHyperVars bind(Tape& tape, const MixtureHyperParams& p);

StateVars lstm_step(const LstmVars& p, const StateVars& s, Var x);
Var hyper_rowscale(Var base, Var W_hz, Var b_h, Var W_hd, Var h_aux);

struct HyperStepVars {
  StateVars main;
  StateVars aux;
};
HyperStepVars hyper_lstm_step(const HyperLstmVars& p, const StateVars& main,
                              const StateVars& aux, Var x);

Var mixture_z(const MixtureHyperVars& p, Var h_aux);

struct MixtureStepVars {
  StateVars main;
  StateVars aux;
  Var z;
};
/// When `inject` is valid it is used as z in place of the computed mixture.
MixtureStepVars m_hyper_step(const MixtureHyperVars& p, const StateVars& main,
                             const StateVars& aux, Var x, Var inject = {});

}  // namespace mhls
