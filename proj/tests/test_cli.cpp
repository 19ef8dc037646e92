#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "mhls/config.hpp"
#include "mhls/dataset.hpp"
#include "mhls/stream.hpp"
#include "mhls/train.hpp"

using namespace mhls;

namespace {

Trial sweep_trial(double seconds, double start = 0.0) {
  Trial tr{1, 0, {}};
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 20.0);
  const auto count = static_cast<std::size_t>(seconds * 60.0);
  for (std::size_t k = 0; k < count; ++k) {
    tr.samples.push_back({start + static_cast<double>(k) / 60.0, 900.0 + n(rng), 400.0 + n(rng), 1, 0});
  }
  return tr;
}

SizeConfig small_size() {
  SizeConfig s;
  s.hidden = 6;
  s.aux_hidden = 4;
  s.n_z = 2;
  s.fc = 4;
  return s;
}

FeatureScaler scaler_for(const Trial& tr) {
  const auto w = slide_windows(tr, 0, 1);
  std::vector<FeatureVector> rows;
  for (const auto& s : w) rows.push_back(s.steps[0]);
  return FeatureScaler::fit(rows);
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(MHLS_CLI_PATH) + " " + args + " 2>/dev/null").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, Defaults) {
  const RunConfig c;
  EXPECT_EQ(c.count("t_w"), 10u);
  EXPECT_EQ(c.real("lr"), 1e-4);
  EXPECT_EQ(c.count("epochs"), 50u);
  EXPECT_EQ(c.real("epsilon"), 0.2);
  EXPECT_EQ(c.count("folds"), 5u);
  EXPECT_EQ(c.text("model"), "mhyperlstm");
  const TrainConfig tc = c.train_config(CellKind::mhyper);
  EXPECT_EQ(tc.size, SizeConfig::paper(CellKind::mhyper));
  EXPECT_EQ(tc.size.hidden, 32u);
  EXPECT_EQ(c.size_for(CellKind::lstm).hidden, 100u);
  EXPECT_EQ(c.size_for(CellKind::hyper).hidden, 75u);
}

TEST(Config, OverridesWinOverFile) {
  const std::vector<std::string> over = {"t_w=5", "lr=0.001"};
  const RunConfig c = RunConfig::parse("# comment\nt_w = 20\nepochs=3\n\nhidden=8\n", over);
  EXPECT_EQ(c.count("t_w"), 5u);
  EXPECT_EQ(c.count("epochs"), 3u);
  EXPECT_EQ(c.real("lr"), 0.001);
  EXPECT_EQ(c.train_config(CellKind::lstm).size.hidden, 8u);
  EXPECT_TRUE(c.given("epochs"));
  EXPECT_FALSE(c.given("seed"));
  std::ostringstream echo;
  c.echo(echo);
  EXPECT_NE(echo.str().find("t_w=5"), std::string::npos);
}

TEST(Config, RejectsBadValuesNamingTheKey) {
  auto key_of = [](const std::vector<std::string>& over) {
    try {
      RunConfig::parse("", over);
    } catch (const ConfigError& e) {
      return e.key();
    }
    return std::string("<none>");
  };
  EXPECT_EQ(key_of({"t_w=0"}), "t_w");
  EXPECT_EQ(key_of({"lr=-1"}), "lr");
  EXPECT_EQ(key_of({"epochs=abc"}), "epochs");
  EXPECT_EQ(key_of({"model=gru"}), "model");
  EXPECT_EQ(key_of({"models=lstm,gru"}), "models");
  EXPECT_EQ(key_of({"colour=red"}), "colour");
  EXPECT_EQ(key_of({"layer_norm=maybe"}), "layer_norm");
  EXPECT_THROW(RunConfig::parse("no equals sign", {}), ConfigError);
  EXPECT_THROW(RunConfig().required("checkpoint"), ConfigError);
}

TEST(Config, ListsAndSplitMode) {
  const std::vector<std::string> over = {"models=lstm,logreg", "split=participant"};
  const RunConfig c = RunConfig::parse("", over);
  EXPECT_EQ(c.list("models"), (std::vector<std::string>{"lstm", "logreg"}));
  EXPECT_EQ(c.split_mode(), SplitMode::participant);
}

TEST(Streaming, TwelveSecondsEmitThreePredictions) {
  const Trial tr = sweep_trial(12.0);
  const SequenceModel m(CellKind::mhyper, small_size(), 1);
  StreamingClassifier sc(m, scaler_for(tr), 10, 0.5);
  std::vector<StreamEmission> out;
  for (const auto& s : tr.samples) {
    for (const auto& e : sc.push(s.t, s.x, s.y)) out.push_back(e);
  }
  for (const auto& e : sc.finish()) out.push_back(e);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_DOUBLE_EQ(out[0].timestamp, 10.0);
  EXPECT_DOUBLE_EQ(out[2].timestamp, 12.0);
  for (const auto& e : out) EXPECT_EQ(e.label, e.probability >= 0.5 ? 1 : 0);
}

TEST(Streaming, EmptySecondResetsTheBuffer) {
  Trial tr = sweep_trial(6.0);
  const Trial tail = sweep_trial(6.0, 7.0);
  tr.samples.insert(tr.samples.end(), tail.samples.begin(), tail.samples.end());
  const SequenceModel m(CellKind::lstm, small_size(), 1);
  std::vector<std::string> warnings;
  StreamingClassifier sc(m, scaler_for(tr), 5, 0.5,
                         [&warnings](const std::string& w) { warnings.push_back(w); });
  std::vector<StreamEmission> out;
  for (const auto& s : tr.samples) {
    for (const auto& e : sc.push(s.t, s.x, s.y)) out.push_back(e);
  }
  for (const auto& e : sc.finish()) out.push_back(e);
  ASSERT_EQ(out.size(), 4u);
  EXPECT_DOUBLE_EQ(out[0].timestamp, 5.0);
  EXPECT_DOUBLE_EQ(out[2].timestamp, 12.0);
  EXPECT_EQ(warnings.size(), 1u);
  sc.push(1.0, 0.0, 0.0);
  EXPECT_EQ(warnings.size(), 2u);
}

TEST(Streaming, MatchesBatchBitForBit) {
  const Trial tr = sweep_trial(15.0);
  const FeatureScaler scaler = scaler_for(tr);
  for (CellKind kind : {CellKind::lstm, CellKind::hyper, CellKind::mhyper}) {
    const SequenceModel m(kind, small_size(), 2);
    StreamingClassifier sc(m, scaler, 10, 0.5);
    std::vector<double> streamed;
    for (const auto& s : tr.samples) {
      for (const auto& e : sc.push(s.t, s.x, s.y)) streamed.push_back(e.probability);
    }
    for (const auto& e : sc.finish()) streamed.push_back(e.probability);
    std::vector<LabeledSequence> batch;
    for (const auto& w : slide_windows(tr, 0, 10)) batch.push_back(to_sequence(w, scaler));
    EXPECT_EQ(streamed, final_step_scores(m, batch));
  }
}

TEST(Streaming, RunStreamParsesLinesAndSkipsGarbage) {
  const Trial tr = sweep_trial(11.0);
  const SequenceModel m(CellKind::lstm, small_size(), 1);
  StreamingClassifier sc(m, scaler_for(tr), 10, 0.5);
  std::ostringstream in_text;
  in_text << "timestamp,x,y\n";
  for (std::size_t k = 0; k < tr.samples.size(); ++k) {
    const auto& s = tr.samples[k];
    in_text << format_double(s.t) << ',' << format_double(s.x) << ',' << format_double(s.y) << '\n';
    if (k == 30) in_text << "garbage line\n";
  }
  std::istringstream in(in_text.str());
  std::ostringstream out;
  std::size_t warnings = 0;
  EXPECT_EQ(run_stream(in, out, sc, [&warnings](const std::string&) { ++warnings; }), 2u);
  EXPECT_EQ(warnings, 1u);
  const std::string text = out.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run_cli("featurize t_w=0 data=/nonexistent out=/tmp/x"), 2);
  EXPECT_EQ(run_cli("train colour=red"), 2);
  EXPECT_EQ(run_cli("infer checkpoint=/nonexistent/model.ckpt"), 1);
  EXPECT_NE(run_cli("bogus"), 0);
}

TEST(Cli, GenerateFeaturizeTrainSweepInfer) {
  const auto dir = std::filesystem::temp_directory_path() / "mhls_test_cli";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const std::string d = dir.string();
  ASSERT_EQ(run_cli("gen participants=10 duration=12 gen_seed=3 out=" + d + "/raw"), 0);
  ASSERT_EQ(run_cli("featurize data=" + d + "/raw t_w=2 out=" + d + "/ds.mhls"), 0);
  ASSERT_EQ(run_cli("train dataset=" + d + "/ds.mhls model=lstm hidden=4 fc=3 epochs=1 out=" + d +
                    "/m.ckpt > /dev/null"),
            0);
  ASSERT_EQ(run_cli("sweep checkpoint=" + d + "/m.ckpt dataset=" + d + "/ds.mhls out=" + d +
                    "/curve.csv"),
            0);
  std::ifstream curve(dir / "curve.csv");
  std::size_t lines = 0;
  for (std::string line; std::getline(curve, line);) ++lines;
  EXPECT_EQ(lines, 102u);
  {
    std::ofstream events(dir / "events.csv");
    events << "timestamp,x,y\n";
    for (int k = 0; k < 60 * 4; ++k) events << k / 60.0 << ',' << 900 + k % 7 << ',' << 400 << '\n';
  }
  ASSERT_EQ(run_cli("infer checkpoint=" + d + "/m.ckpt input=" + d + "/events.csv out=" + d +
                    "/pred.csv"),
            0);
  std::ifstream pred(dir / "pred.csv");
  std::size_t preds = 0;
  for (std::string line; std::getline(pred, line);) ++preds;
  EXPECT_EQ(preds, 3u);
  std::filesystem::remove_all(dir);
}
