#include "mhls/cells.hpp"

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

void check_shape(const char* what, const Tensor& t, Shape expected) {
  if (!(t.shape() == expected)) {
    throw DimensionError(std::string(what) + ": expected " + expected.str() + ", got " +
                         t.shape().str());
  }
}

std::array<LayerNormParams, kNorms> unit_norms(std::size_t hidden) {
  std::array<LayerNormParams, kNorms> norms;
  for (auto& n : norms) {
    n.gain = Tensor::filled(Shape{hidden}, 1.0);
    n.shift = Tensor(Shape{hidden});
  }
  return norms;
}

std::array<LayerNormParams, kNorms> zero_norms(std::size_t hidden) {
  std::array<LayerNormParams, kNorms> norms;
  for (auto& n : norms) {
    n.gain = Tensor(Shape{hidden});
    n.shift = Tensor(Shape{hidden});
  }
  return norms;
}

// Gate pre-activations, gating and the memory update shared by every cell
// once its effective weights for this step are known.
StateVars lstm_core(const std::array<Var, kGates>& W, const std::array<Var, kGates>& I,
                    const std::array<Var, kGates>& b, bool layer_norm,
                    const std::array<Var, kNorms>& gain, const std::array<Var, kNorms>& shift,
                    const StateVars& s, Var x) {
  std::array<Var, kGates> pre;
  for (std::size_t g = 0; g < kGates; ++g) {
    pre[g] = matmul(W[g], s.h) + matmul(I[g], x) + b[g];
    if (layer_norm) pre[g] = mhls::layer_norm(pre[g], gain[g], shift[g], kLayerNormEps);
  }
  const Var in_gate = sigmoid(pre[0]);
  const Var forget_gate = sigmoid(pre[1]);
  const Var out_gate = sigmoid(pre[2]);
  const Var candidate = tanh(pre[3]);
  const Var c = forget_gate * s.c + in_gate * candidate;
  const Var c_out = layer_norm
                        ? mhls::layer_norm(c, gain[kCellNorm], shift[kCellNorm], kLayerNormEps)
                        : c;
  return {out_gate * tanh(c_out), c};
}

void check_state(const char* what, const CellState& s, std::size_t hidden) {
  check_shape(what, s.h, Shape{hidden});
  check_shape(what, s.c, Shape{hidden});
}

CellState values(const StateVars& s) { return {s.h.value(), s.c.value()}; }

}  // namespace

// ---------------------------------------------------------------------------
// Construction

LstmParams LstmParams::zeros(std::size_t hidden, std::size_t input, bool layer_norm) {
  LstmParams p;
  p.hidden = hidden;
  p.input = input;
  p.layer_norm = layer_norm;
  for (std::size_t g = 0; g < kGates; ++g) {
    p.W[g] = Tensor(Shape{hidden, hidden});
    p.I[g] = Tensor(Shape{hidden, input});
    p.b[g] = Tensor(Shape{hidden});
  }
  if (layer_norm) p.norm = zero_norms(hidden);
  return p;
}

// Weights uniform in +-1/sqrt(fan-in), biases zero, forget gate biased to 1.
// Under layer norm the forget bias sits on the normalized shift, since a
// constant added before normalization cancels.
LstmParams LstmParams::init(std::size_t hidden, std::size_t input, bool layer_norm,
                            std::mt19937_64& rng) {
  LstmParams p = zeros(hidden, input, layer_norm);
  for (std::size_t g = 0; g < kGates; ++g) {
    p.W[g] = uniform(Shape{hidden, hidden}, static_cast<double>(hidden), rng);
    p.I[g] = uniform(Shape{hidden, input}, static_cast<double>(input), rng);
  }
  if (layer_norm) {
    p.norm = unit_norms(hidden);
    p.norm[kForgetGate].shift.fill(1.0);
  } else {
    p.b[kForgetGate].fill(1.0);
  }
  return p;
}

HyperLstmParams HyperLstmParams::zeros(std::size_t hidden, std::size_t input,
                                       std::size_t aux_hidden, std::size_t n_z,
                                       bool layer_norm) {
  HyperLstmParams p;
  p.hidden = hidden;
  p.input = input;
  p.aux_hidden = aux_hidden;
  p.n_z = n_z;
  p.layer_norm = layer_norm;
  p.main = LstmParams::zeros(hidden, input, layer_norm);
  p.aux = LstmParams::zeros(aux_hidden, input + hidden, layer_norm);
  for (std::size_t g = 0; g < kGates; ++g) {
    for (RowScaleHead* head : {&p.w_head[g], &p.i_head[g]}) {
      head->W_hz = Tensor(Shape{n_z, aux_hidden});
      head->b_h = Tensor(Shape{n_z});
      head->W_hd = Tensor(Shape{hidden, n_z});
    }
    p.b_head[g].W_bz = Tensor(Shape{n_z, aux_hidden});
    p.b_head[g].W_bd = Tensor(Shape{hidden, n_z});
  }
  return p;
}

// The row-scale heads start with b_h = 1 and W_hd = 1/n_z so every scale
// factor begins near 1; the bias heads start with W_bd = 0 so the generated
// bias begins at the static one.
HyperLstmParams HyperLstmParams::init(std::size_t hidden, std::size_t input,
                                      std::size_t aux_hidden, std::size_t n_z,
                                      bool layer_norm, std::mt19937_64& rng) {
  HyperLstmParams p = zeros(hidden, input, aux_hidden, n_z, layer_norm);
  p.main = LstmParams::init(hidden, input, layer_norm, rng);
  p.aux = LstmParams::init(aux_hidden, input + hidden, layer_norm, rng);
  const double fan_in = static_cast<double>(aux_hidden);
  for (std::size_t g = 0; g < kGates; ++g) {
    for (RowScaleHead* head : {&p.w_head[g], &p.i_head[g]}) {
      head->W_hz = uniform(Shape{n_z, aux_hidden}, fan_in, rng);
      head->b_h.fill(1.0);
      head->W_hd.fill(1.0 / static_cast<double>(n_z));
    }
    p.b_head[g].W_bz = uniform(Shape{n_z, aux_hidden}, fan_in, rng);
  }
  return p;
}

MixtureHyperParams MixtureHyperParams::zeros(std::size_t hidden, std::size_t input,
                                             std::size_t aux_hidden, std::size_t n_z,
                                             bool layer_norm) {
  MixtureHyperParams p;
  p.hidden = hidden;
  p.input = input;
  p.aux_hidden = aux_hidden;
  p.n_z = n_z;
  p.layer_norm = layer_norm;
  p.aux = LstmParams::zeros(aux_hidden, input + hidden, layer_norm);
  p.W_z = Tensor(Shape{n_z, aux_hidden});
  p.b_z = Tensor(Shape{n_z});
  for (std::size_t g = 0; g < kGates; ++g) {
    p.W_bank[g] = Tensor(Shape{hidden, hidden, n_z});
    p.I_bank[g] = Tensor(Shape{hidden, input, n_z});
    p.b_bank[g] = Tensor(Shape{hidden, n_z});
  }
  if (layer_norm) p.norm = zero_norms(hidden);
  return p;
}

// Each bank slice is initialized as an independent LSTM (fan-in hidden or
// input, not hidden * n_z).
MixtureHyperParams MixtureHyperParams::init(std::size_t hidden, std::size_t input,
                                            std::size_t aux_hidden, std::size_t n_z,
                                            bool layer_norm, std::mt19937_64& rng) {
  MixtureHyperParams p = zeros(hidden, input, aux_hidden, n_z, layer_norm);
  p.aux = LstmParams::init(aux_hidden, input + hidden, layer_norm, rng);
  p.W_z = uniform(Shape{n_z, aux_hidden}, static_cast<double>(aux_hidden), rng);
  for (std::size_t g = 0; g < kGates; ++g) {
    p.W_bank[g] = uniform(Shape{hidden, hidden, n_z}, static_cast<double>(hidden), rng);
    p.I_bank[g] = uniform(Shape{hidden, input, n_z}, static_cast<double>(input), rng);
  }
  if (layer_norm) {
    p.norm = unit_norms(hidden);
    p.norm[kForgetGate].shift.fill(1.0);
  } else {
    p.b_bank[kForgetGate].fill(1.0);
  }
  return p;
}

LstmParams mixture_component(const MixtureHyperParams& p, std::size_t k) {
  if (k >= p.n_z) {
    throw std::out_of_range("mixture_component: slice " + std::to_string(k) +
                            " out of range for n_z=" + std::to_string(p.n_z));
  }
  LstmParams out = LstmParams::zeros(p.hidden, p.input, p.layer_norm);
  for (std::size_t g = 0; g < kGates; ++g) {
    for (std::size_t i = 0; i < p.hidden; ++i) {
      for (std::size_t j = 0; j < p.hidden; ++j) out.W[g].at(i, j) = p.W_bank[g].at(i, j, k);
      for (std::size_t j = 0; j < p.input; ++j) out.I[g].at(i, j) = p.I_bank[g].at(i, j, k);
      out.b[g][i] = p.b_bank[g].at(i, k);
    }
  }
  if (p.layer_norm) out.norm = p.norm;
  return out;
}

CellState CellState::zeros(std::size_t hidden) {
  return {Tensor(Shape{hidden}), Tensor(Shape{hidden})};
}

// ---------------------------------------------------------------------------
// Binding

StateVars zero_state(Tape& tape, std::size_t hidden) {
  return {tape.constant(Tensor(Shape{hidden})), tape.constant(Tensor(Shape{hidden}))};
}

LstmVars bind(Tape& tape, const LstmParams& p) {
  LstmVars v;
  v.layer_norm = p.layer_norm;
  for (std::size_t g = 0; g < kGates; ++g) {
    v.W[g] = tape.param(p.W[g]);
    v.I[g] = tape.param(p.I[g]);
    v.b[g] = tape.param(p.b[g]);
  }
  if (p.layer_norm) {
    for (std::size_t k = 0; k < kNorms; ++k) {
      v.gain[k] = tape.param(p.norm[k].gain);
      v.shift[k] = tape.param(p.norm[k].shift);
    }
  }
  return v;
}

HyperLstmVars bind(Tape& tape, const HyperLstmParams& p) {
  HyperLstmVars v;
  v.main = bind(tape, p.main);
  v.aux = bind(tape, p.aux);
  for (std::size_t g = 0; g < kGates; ++g) {
    v.w_hz[g] = tape.param(p.w_head[g].W_hz);
    v.w_bh[g] = tape.param(p.w_head[g].b_h);
    v.w_hd[g] = tape.param(p.w_head[g].W_hd);
    v.i_hz[g] = tape.param(p.i_head[g].W_hz);
    v.i_bh[g] = tape.param(p.i_head[g].b_h);
    v.i_hd[g] = tape.param(p.i_head[g].W_hd);
    v.b_bz[g] = tape.param(p.b_head[g].W_bz);
    v.b_bd[g] = tape.param(p.b_head[g].W_bd);
  }
  return v;
}

MixtureHyperVars bind(Tape& tape, const MixtureHyperParams& p) {
  MixtureHyperVars v;
  v.layer_norm = p.layer_norm;
  v.aux = bind(tape, p.aux);
  v.W_z = tape.param(p.W_z);
  v.b_z = tape.param(p.b_z);
  for (std::size_t g = 0; g < kGates; ++g) {
    v.W_bank[g] = tape.param(p.W_bank[g]);
    v.I_bank[g] = tape.param(p.I_bank[g]);
    v.b_bank[g] = tape.param(p.b_bank[g]);
  }
  if (p.layer_norm) {
    for (std::size_t k = 0; k < kNorms; ++k) {
      v.gain[k] = tape.param(p.norm[k].gain);
      v.shift[k] = tape.param(p.norm[k].shift);
    }
  }
  return v;
}

// ---------------------------------------------------------------------------
// Tape-level steps

StateVars lstm_step(const LstmVars& p, const StateVars& s, Var x) {
  return lstm_core(p.W, p.I, p.b, p.layer_norm, p.gain, p.shift, s, x);
}

Var hyper_rowscale(Var base, Var W_hz, Var b_h, Var W_hd, Var h_aux) {
  const Var z = matmul(W_hz, h_aux) + b_h;
  const Var d = matmul(W_hd, z);
  return row_scale(base, d);
}

HyperStepVars hyper_lstm_step(const HyperLstmVars& p, const StateVars& main,
                              const StateVars& aux, Var x) {
  const StateVars next_aux = lstm_step(p.aux, aux, concat(x, main.h));
  const Var h_aux = next_aux.h;
  std::array<Var, kGates> W, I, b;
  for (std::size_t g = 0; g < kGates; ++g) {
    W[g] = hyper_rowscale(p.main.W[g], p.w_hz[g], p.w_bh[g], p.w_hd[g], h_aux);
    I[g] = hyper_rowscale(p.main.I[g], p.i_hz[g], p.i_bh[g], p.i_hd[g], h_aux);
    b[g] = matmul(p.b_bd[g], matmul(p.b_bz[g], h_aux)) + p.main.b[g];
  }
  const StateVars next_main =
      lstm_core(W, I, b, p.main.layer_norm, p.main.gain, p.main.shift, main, x);
  return {next_main, next_aux};
}

Var mixture_z(const MixtureHyperVars& p, Var h_aux) {
  return sigmoid(matmul(p.W_z, h_aux) + p.b_z);
}

MixtureStepVars m_hyper_step(const MixtureHyperVars& p, const StateVars& main,
                             const StateVars& aux, Var x, Var inject) {
  const StateVars next_aux = lstm_step(p.aux, aux, concat(x, main.h));
  Var z = inject;
  if (!z.valid()) {
    z = mixture_z(p, next_aux.h);
  } else if (!(z.shape() == p.b_z.shape())) {
    throw DimensionError("m_hyper_step: injected z has shape " + z.shape().str() +
                         ", expected " + p.b_z.shape().str());
  }
  std::array<Var, kGates> W, I, b;
  for (std::size_t g = 0; g < kGates; ++g) {
    W[g] = mode3_contract(p.W_bank[g], z);
    I[g] = mode3_contract(p.I_bank[g], z);
    b[g] = matmul(p.b_bank[g], z);
  }
  const StateVars next_main = lstm_core(W, I, b, p.layer_norm, p.gain, p.shift, main, x);
  return {next_main, next_aux, z};
}

// ---------------------------------------------------------------------------
// Value-level steps

CellState lstm_step(const LstmParams& p, const CellState& s, const Tensor& x) {
  check_state("lstm_step state", s, p.hidden);
  check_shape("lstm_step input", x, Shape{p.input});
  Tape tape;
  const StateVars out =
      lstm_step(bind(tape, p), {tape.constant(s.h), tape.constant(s.c)}, tape.constant(x));
  return values(out);
}

Tensor hyper_rowscale(const Tensor& base, const Tensor& W_hz, const Tensor& b_h,
                      const Tensor& W_hd, const Tensor& h_aux) {
  Tape tape;
  return hyper_rowscale(tape.constant(base), tape.constant(W_hz), tape.constant(b_h),
                        tape.constant(W_hd), tape.constant(h_aux))
      .value();
}

HyperStep hyper_lstm_step(const HyperLstmParams& p, const CellState& main,
                          const CellState& aux, const Tensor& x) {
  check_state("hyper_lstm_step main state", main, p.hidden);
  check_state("hyper_lstm_step aux state", aux, p.aux_hidden);
  check_shape("hyper_lstm_step input", x, Shape{p.input});
  Tape tape;
  const HyperStepVars out =
      hyper_lstm_step(bind(tape, p), {tape.constant(main.h), tape.constant(main.c)},
                      {tape.constant(aux.h), tape.constant(aux.c)}, tape.constant(x));
  return {values(out.main), values(out.aux)};
}

Tensor mixture_z(const MixtureHyperParams& p, const Tensor& h_aux) {
  check_shape("mixture_z input", h_aux, Shape{p.aux_hidden});
  Tape tape;
  return mixture_z(bind(tape, p), tape.constant(h_aux)).value();
}

MixtureWeights generated_weights(const MixtureHyperParams& p, const Tensor& z) {
  check_shape("generated_weights z", z, Shape{p.n_z});
  MixtureWeights out;
  for (std::size_t g = 0; g < kGates; ++g) {
    out.W[g] = mode3_contract(p.W_bank[g], z);
    out.I[g] = mode3_contract(p.I_bank[g], z);
    out.b[g] = matmul(p.b_bank[g], z);
  }
  return out;
}

MixtureStep m_hyper_step(const MixtureHyperParams& p, const CellState& main,
                         const CellState& aux, const Tensor& x, const ZInjection& inject) {
  check_state("m_hyper_step main state", main, p.hidden);
  check_state("m_hyper_step aux state", aux, p.aux_hidden);
  check_shape("m_hyper_step input", x, Shape{p.input});
  Tape tape;
  const Var z = inject.z ? tape.constant(*inject.z) : Var{};
  const MixtureStepVars out =
      m_hyper_step(bind(tape, p), {tape.constant(main.h), tape.constant(main.c)},
                   {tape.constant(aux.h), tape.constant(aux.c)}, tape.constant(x), z);
  return {values(out.main), values(out.aux), out.z.value()};
}

}  // namespace mhls
