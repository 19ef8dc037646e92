#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mhls/cells.hpp"
#include "mhls/model.hpp"
#include "oracle.hpp"

using namespace mhls;

namespace {

void expect_near(const Tensor& got, const oracle::Vec& want, double tol) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(got[i], want[i], tol) << "at " << i;
}

CellState random_state(std::size_t n, std::mt19937_64& rng) {
  return {oracle::random_tensor(Shape{n}, rng, 0.9), oracle::random_tensor(Shape{n}, rng, 2.0)};
}

template <class P>
void randomize(P& p, std::mt19937_64& rng) {
  p.for_each([&rng](const std::string&, Tensor& t, ParamRole) {
    t = oracle::random_tensor(t.shape(), rng, 0.8);
  });
}

}  // namespace

TEST(LstmStep, ZeroParamsGiveHalfGatesAndZeroState) {
  for (bool ln : {false, true}) {
    const LstmParams p = LstmParams::zeros(3, 2, ln);
    const CellState s = lstm_step(p, CellState::zeros(3), Tensor::vector({0.7, -0.2}));
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_EQ(s.c[i], 0.0);
      EXPECT_EQ(s.h[i], 0.0);
    }
  }
}

TEST(LstmStep, SaturatedForgetGateKeepsMemory) {
  LstmParams p = LstmParams::zeros(3, 2, false);
  p.b[kForgetGate] = Tensor::filled(Shape{3}, 50.0);
  const CellState prev{Tensor::vector({0.1, -0.2, 0.3}), Tensor::vector({1.5, -0.7, 0.2})};
  const CellState s = lstm_step(p, prev, Tensor::vector({0.0, 0.0}));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(s.c[i], prev.c[i], 1e-10);
}

TEST(LstmStep, MatchesStraightLineOracle) {
  std::mt19937_64 rng(11);
  for (bool ln : {false, true}) {
    for (int trial = 0; trial < 25; ++trial) {
      LstmParams p = LstmParams::zeros(5, 3, ln);
      randomize(p, rng);
      const CellState s = random_state(5, rng);
      const Tensor x = oracle::random_tensor(Shape{3}, rng);
      const CellState got = lstm_step(p, s, x);
      const oracle::State want = oracle::lstm(p, {oracle::vec(s.h), oracle::vec(s.c)}, oracle::vec(x));
      expect_near(got.h, want.h, 1e-12);
      expect_near(got.c, want.c, 1e-12);
    }
  }
}

TEST(LstmStep, HiddenStateBoundedByOne) {
  std::mt19937_64 rng(13);
  LstmParams p = LstmParams::zeros(6, 4, true);
  randomize(p, rng);
  CellState s = CellState::zeros(6);
  for (int t = 0; t < 50; ++t) {
    s = lstm_step(p, s, oracle::random_tensor(Shape{4}, rng, 5.0));
    for (double v : s.h.data()) EXPECT_LT(std::abs(v), 1.0);
  }
}

TEST(LstmStep, ShapeMismatchThrows) {
  const LstmParams p = LstmParams::zeros(3, 2, true);
  EXPECT_THROW(lstm_step(p, CellState::zeros(3), Tensor::vector({1.0})), DimensionError);
  EXPECT_THROW(lstm_step(p, CellState::zeros(2), Tensor::vector({1.0, 2.0})), DimensionError);
}

TEST(HyperRowscale, IdentityZeroAndHomogeneity) {
  std::mt19937_64 rng(17);
  const Tensor base = oracle::random_tensor(Shape{3, 4}, rng);
  const Tensor h_aux = oracle::random_tensor(Shape{2}, rng);
  Tensor W_hd(Shape{3, 2});
  for (std::size_t i = 0; i < 3; ++i) W_hd.at(i, 0) = 1.0;
  EXPECT_EQ(hyper_rowscale(base, Tensor(Shape{2, 2}), Tensor::vector({1.0, 0.0}), W_hd, h_aux), base);

  const Tensor W_hz = oracle::random_tensor(Shape{2, 2}, rng);
  const Tensor zero = hyper_rowscale(base, W_hz, Tensor(Shape{2}), oracle::random_tensor(Shape{3, 2}, rng),
                                     Tensor(Shape{2}));
  EXPECT_EQ(zero, Tensor(Shape{3, 4}));

  const Tensor b_h = oracle::random_tensor(Shape{2}, rng);
  const Tensor W_hd2 = oracle::random_tensor(Shape{3, 2}, rng);
  Tensor doubled = W_hd2;
  for (double& v : doubled.data()) v *= 2.0;
  const Tensor once = hyper_rowscale(base, W_hz, b_h, W_hd2, h_aux);
  const Tensor twice = hyper_rowscale(base, W_hz, b_h, doubled, h_aux);
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_NEAR(twice[i], 2.0 * once[i], 1e-12);
}

TEST(HyperLstmStep, IdentityGenerationEqualsBaseLstm) {
  std::mt19937_64 rng(19);
  HyperLstmParams p = HyperLstmParams::zeros(4, 3, 2, 3, true);
  randomize(p, rng);
  for (std::size_t g = 0; g < kGates; ++g) {
    for (RowScaleHead* head : {&p.w_head[g], &p.i_head[g]}) {
      head->W_hz.fill(0.0);
      head->b_h = Tensor::vector({1.0, 0.0, 0.0});
      head->W_hd.fill(0.0);
      for (std::size_t i = 0; i < 4; ++i) head->W_hd.at(i, 0) = 1.0;
    }
    p.b_head[g].W_bd.fill(0.0);
  }
  const CellState main = random_state(4, rng), aux = random_state(2, rng);
  const Tensor x = oracle::random_tensor(Shape{3}, rng);
  const HyperStep got = hyper_lstm_step(p, main, aux, x);
  const CellState want = lstm_step(p.main, main, x);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(got.main.h[i], want.h[i], 1e-14);
    EXPECT_NEAR(got.main.c[i], want.c[i], 1e-14);
  }
}

TEST(HyperLstmStep, ZeroGenerationGivesHalfGates) {
  std::mt19937_64 rng(23);
  HyperLstmParams p = HyperLstmParams::zeros(4, 3, 2, 3, true);
  randomize(p, rng);
  for (std::size_t g = 0; g < kGates; ++g) {
    for (RowScaleHead* head : {&p.w_head[g], &p.i_head[g]}) {
      head->W_hz.fill(0.0);
      head->b_h.fill(0.0);
    }
    p.b_head[g].W_bd.fill(0.0);
    p.main.b[g].fill(0.0);
  }
  for (auto& n : p.main.norm) n.shift.fill(0.0);
  const HyperStep got =
      hyper_lstm_step(p, CellState::zeros(4), random_state(2, rng), oracle::random_tensor(Shape{3}, rng));
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(got.main.c[i], 0.0, 1e-15);
    EXPECT_NEAR(got.main.h[i], 0.0, 1e-15);
  }
}

TEST(HyperLstmStep, MatchesStraightLineOracle) {
  std::mt19937_64 rng(29);
  for (bool ln : {false, true}) {
    for (int trial = 0; trial < 20; ++trial) {
      HyperLstmParams p = HyperLstmParams::zeros(5, 3, 4, 2, ln);
      randomize(p, rng);
      const CellState main = random_state(5, rng), aux = random_state(4, rng);
      const Tensor x = oracle::random_tensor(Shape{3}, rng);
      const HyperStep got = hyper_lstm_step(p, main, aux, x);
      const oracle::Pair want = oracle::hyper(p, {oracle::vec(main.h), oracle::vec(main.c)},
                                              {oracle::vec(aux.h), oracle::vec(aux.c)}, oracle::vec(x));
      expect_near(got.main.h, want.main.h, 1e-12);
      expect_near(got.main.c, want.main.c, 1e-12);
      expect_near(got.aux.h, want.aux.h, 1e-12);
    }
  }
}

TEST(MixtureZ, ZeroSaturationAndOracle) {
  std::mt19937_64 rng(31);
  MixtureHyperParams p = MixtureHyperParams::zeros(3, 2, 4, 3, true);
  const Tensor half = mixture_z(p, oracle::random_tensor(Shape{4}, rng));
  for (double v : half.data()) EXPECT_EQ(v, 0.5);
  p.b_z[1] = 50.0;
  EXPECT_GE(mixture_z(p, oracle::random_tensor(Shape{4}, rng))[1], 1.0 - 1e-10);
  randomize(p, rng);
  const Tensor h = oracle::random_tensor(Shape{4}, rng);
  const Tensor z = mixture_z(p, h);
  const oracle::Vec pre = oracle::plus(oracle::mv(p.W_z, oracle::vec(h)), oracle::vec(p.b_z));
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_NEAR(z[k], oracle::logistic(pre[k]), 1e-15);
    EXPECT_GT(z[k], 0.0);
    EXPECT_LT(z[k], 1.0);
  }
}

TEST(MHyperStep, OneHotInjectionReducesToSlicedLstm) {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 10; ++trial) {
    MixtureHyperParams p = MixtureHyperParams::zeros(4, 3, 2, 3, trial % 2 == 0);
    randomize(p, rng);
    const std::size_t k = static_cast<std::size_t>(trial) % 3;
    Tensor z(Shape{3});
    z[k] = 1.0;
    const CellState main = random_state(4, rng), aux = random_state(2, rng);
    const Tensor x = oracle::random_tensor(Shape{3}, rng);
    const MixtureStep got = m_hyper_step(p, main, aux, x, {z});
    const CellState want = lstm_step(mixture_component(p, k), main, x);
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_NEAR(got.main.h[i], want.h[i], 1e-12);
      EXPECT_NEAR(got.main.c[i], want.c[i], 1e-12);
    }
    EXPECT_EQ(got.z, z);
  }
}

TEST(MHyperStep, ZeroInjectionGivesHalfGates) {
  std::mt19937_64 rng(41);
  MixtureHyperParams p = MixtureHyperParams::zeros(4, 3, 2, 3, true);
  randomize(p, rng);
  for (auto& n : p.norm) n.shift.fill(0.0);
  const MixtureStep got = m_hyper_step(p, CellState::zeros(4), random_state(2, rng),
                                       oracle::random_tensor(Shape{3}, rng), {Tensor(Shape{3})});
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(got.main.c[i], 0.0);
    EXPECT_EQ(got.main.h[i], 0.0);
  }
}

TEST(MHyperStep, GeneratedWeightsAreLinearInZ) {
  std::mt19937_64 rng(43);
  MixtureHyperParams p = MixtureHyperParams::zeros(3, 2, 2, 2, true);
  randomize(p, rng);
  const MixtureWeights a = generated_weights(p, Tensor::vector({1.0, 0.0}));
  const MixtureWeights b = generated_weights(p, Tensor::vector({0.0, 1.0}));
  const MixtureWeights mid = generated_weights(p, Tensor::vector({0.5, 0.5}));
  for (std::size_t g = 0; g < kGates; ++g) {
    for (std::size_t i = 0; i < mid.W[g].size(); ++i) {
      EXPECT_NEAR(mid.W[g][i], 0.5 * (a.W[g][i] + b.W[g][i]), 1e-15);
    }
    for (std::size_t i = 0; i < mid.I[g].size(); ++i) {
      EXPECT_NEAR(mid.I[g][i], 0.5 * (a.I[g][i] + b.I[g][i]), 1e-15);
    }
    for (std::size_t i = 0; i < mid.b[g].size(); ++i) {
      EXPECT_NEAR(mid.b[g][i], 0.5 * (a.b[g][i] + b.b[g][i]), 1e-15);
    }
  }
}

TEST(MHyperStep, MatchesStraightLineOracle) {
  std::mt19937_64 rng(47);
  for (bool ln : {false, true}) {
    for (int trial = 0; trial < 20; ++trial) {
      MixtureHyperParams p = MixtureHyperParams::zeros(4, 3, 3, 2, ln);
      randomize(p, rng);
      const CellState main = random_state(4, rng), aux = random_state(3, rng);
      const Tensor x = oracle::random_tensor(Shape{3}, rng);
      const MixtureStep got = m_hyper_step(p, main, aux, x);
      const oracle::MixPair want = oracle::mixture(
          p, {oracle::vec(main.h), oracle::vec(main.c)}, {oracle::vec(aux.h), oracle::vec(aux.c)},
          oracle::vec(x));
      expect_near(got.main.h, want.main.h, 1e-12);
      expect_near(got.main.c, want.main.c, 1e-12);
      expect_near(got.z, want.z, 1e-14);
    }
  }
}

TEST(MHyperStep, WrongInjectionLengthThrows) {
  const MixtureHyperParams p = MixtureHyperParams::zeros(3, 2, 2, 3, true);
  EXPECT_THROW(m_hyper_step(p, CellState::zeros(3), CellState::zeros(2), Tensor::vector({1.0, 2.0}),
                            {Tensor(Shape{2})}),
               DimensionError);
}

TEST(ParamCount, SmallLstmWithoutLayerNorm) {
  EXPECT_EQ(param_count(LstmParams::zeros(2, 3, false)), 48u);
}

TEST(ParamCount, MatchesEnumerationOracle) {
  for (bool ln : {false, true}) {
    EXPECT_EQ(param_count(LstmParams::zeros(7, 5, ln)), oracle::lstm_count(7, 5, ln));
    EXPECT_EQ(param_count(HyperLstmParams::zeros(7, 5, 3, 2, ln)), oracle::hyper_count(7, 5, 3, 2, ln));
    EXPECT_EQ(param_count(MixtureHyperParams::zeros(7, 5, 3, 2, ln)),
              oracle::mixture_count(7, 5, 3, 2, ln));
  }
}

TEST(ParamCount, PaperConfigurationsAreCapacityMatched) {
  const std::size_t lstm = param_count(LstmParams::zeros(100, 64, true));
  const std::size_t hyper = param_count(HyperLstmParams::zeros(75, 64, 16, 4, true));
  const std::size_t mix = param_count(MixtureHyperParams::zeros(32, 64, 16, 4, true));
  EXPECT_EQ(lstm, oracle::lstm_count(100, 64, true));
  EXPECT_EQ(hyper, oracle::hyper_count(75, 64, 16, 4, true));
  EXPECT_EQ(mix, oracle::mixture_count(32, 64, 16, 4, true));
  const double counts[] = {double(lstm), double(hyper), double(mix)};
  for (double a : counts) {
    for (double b : counts) EXPECT_LE(std::abs(a - b) / std::max(a, b), 0.2);
  }
}

TEST(ParamCount, MonotoneInHiddenSize) {
  EXPECT_LT(param_count(LstmParams::zeros(10, 4, true)), param_count(LstmParams::zeros(11, 4, true)));
  EXPECT_LT(param_count(HyperLstmParams::zeros(10, 4, 3, 2, true)),
            param_count(HyperLstmParams::zeros(11, 4, 3, 2, true)));
  EXPECT_LT(param_count(MixtureHyperParams::zeros(10, 4, 3, 2, true)),
            param_count(MixtureHyperParams::zeros(11, 4, 3, 2, true)));
}

TEST(Init, ForgetBiasAndBankSlicesAreIndependent) {
  std::mt19937_64 rng(53);
  const LstmParams plain = LstmParams::init(4, 3, false, rng);
  for (double v : plain.b[kForgetGate].data()) EXPECT_EQ(v, 1.0);
  for (double v : plain.b[0].data()) EXPECT_EQ(v, 0.0);
  const LstmParams normed = LstmParams::init(4, 3, true, rng);
  for (double v : normed.norm[kForgetGate].shift.data()) EXPECT_EQ(v, 1.0);
  const MixtureHyperParams m = MixtureHyperParams::init(8, 3, 2, 4, true, rng);
  const LstmParams a = mixture_component(m, 0), b = mixture_component(m, 1);
  EXPECT_NE(a.W[0], b.W[0]);
  const double bound = 1.0 / std::sqrt(8.0);
  for (double v : m.W_bank[0].data()) EXPECT_LE(std::abs(v), bound);
}
