#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mhls/checkpoint.hpp"
#include "mhls/config.hpp"
#include "mhls/dataset.hpp"
#include "mhls/eval.hpp"
#include "mhls/stream.hpp"
#include "mhls/synthgaze.hpp"
#include "mhls/train.hpp"

namespace {

using namespace mhls;

void warn(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

struct Invocation {
  std::string config_file;
  std::vector<std::string> overrides;
};

RunConfig resolve(const Invocation& inv) {
  std::optional<std::filesystem::path> file;
  if (!inv.config_file.empty()) file = inv.config_file;
  RunConfig cfg = RunConfig::load(file, inv.overrides);
  std::cerr << "# resolved configuration\n";
  cfg.echo(std::cerr);
  return cfg;
}

/// Writes to the file named by `out`, or standard output when it is empty.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::trunc);
      if (!*file_) throw std::runtime_error("cannot write " + path);
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

std::vector<LabeledSequence> scaled(const Dataset& data, std::span<const std::size_t> idx,
                                    const FeatureScaler& scaler) {
  std::vector<LabeledSequence> out;
  for (std::size_t i : idx) out.push_back(to_sequence(data.windows.at(i), scaler));
  return out;
}

std::vector<std::size_t> labels_of(std::span<const LabeledSequence> set) {
  std::vector<std::size_t> out;
  for (const auto& s : set) out.push_back(s.label);
  return out;
}

int cmd_gen(const RunConfig& cfg) {
  const GeneratorKnobs knobs = cfg.generator_knobs();
  const auto seed = static_cast<std::uint64_t>(cfg.integer("gen_seed"));
  const auto trials = generate_trials(knobs, cfg.count("participants"), cfg.count("trials"), seed);
  const auto paths = write_generated(cfg.required("out"), knobs, trials, seed);
  std::cerr << "wrote " << paths.size() << " trials to " << cfg.text("out") << '\n';
  return 0;
}

int cmd_featurize(const RunConfig& cfg) {
  const auto trials = read_gaze_dir(cfg.required("data"));
  const Dataset data = build_dataset(trials, cfg.count("t_w"), warn);
  save_dataset(cfg.required("out"), data);
  std::cerr << "wrote " << data.size() << " windows of " << data.t_w << " s from "
            << trials.size() << " trials to " << cfg.text("out") << '\n';
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  const std::string model_tag = cfg.text("model");
  if (model_tag == "logreg") {
    throw ConfigError("model", "train writes sequence-model checkpoints; use eval for logreg");
  }
  const CellKind kind = parse_variant(model_tag);
  const Dataset data = load_dataset(cfg.list("dataset").at(0));
  const Split split = split_dataset(data, 1, static_cast<std::uint64_t>(cfg.integer("seed")),
                                    cfg.split_mode())[0];
  const PreparedSplit prepared = prepare_split(data, split);
  const TrainConfig tc = cfg.train_config(kind);
  const TrainResult result = train(prepared.train, prepared.val, tc, [](const EpochRecord& r) {
    std::cerr << "epoch " << r.epoch << " train_loss=" << r.train_loss
              << " val_loss=" << r.val_loss << '\n';
  });
  const auto grid = default_threshold_grid();
  const double tau = select_threshold(final_step_scores(result.best, prepared.val),
                                      labels_of(prepared.val), grid);
  const Metrics test = prf1(final_step_scores(result.best, prepared.test),
                            labels_of(prepared.test), tau);
  Checkpoint ckpt{result.best, prepared.scaler, {result.best_epoch, result.best_val_loss, tau, data.t_w}};
  save_checkpoint(cfg.required("out"), ckpt);
  std::cout << "best_epoch=" << result.best_epoch << " val_loss=" << result.best_val_loss
            << " threshold=" << tau << " test_precision=" << test.precision
            << " test_recall=" << test.recall << " test_f1=" << test.f1 << '\n';
  return 0;
}

int cmd_eval(const RunConfig& cfg) {
  const auto grid = default_threshold_grid();
  const auto seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  std::vector<MetricsReport> reports;
  const auto datasets = cfg.list("dataset");
  if (datasets.empty()) throw ConfigError("dataset", "required but not given");
  for (const std::string& path : datasets) {
    const Dataset data = load_dataset(path);
    const auto splits = split_dataset(data, cfg.count("folds"), seed, cfg.split_mode());
    for (const std::string& model : cfg.list("models")) {
      std::cerr << "evaluating " << model << " at t_w=" << data.t_w << '\n';
      const FoldTrainer trainer = model == "logreg"
                                      ? logreg_trainer(cfg.logreg_config())
                                      : sequence_trainer(cfg.train_config(parse_variant(model)));
      reports.push_back(evaluate_protocol(model, data, splits, trainer, grid, warn));
    }
  }
  write_report_table(std::cout, reports);
  if (!cfg.text("out").empty()) {
    Output out(cfg.text("out"));
    write_report_csv(out.stream(), reports);
  }
  for (const MetricsReport& r : reports) {
    if (r.succeeded() == 0) return 1;
  }
  return 0;
}

int cmd_sweep(const RunConfig& cfg) {
  const Checkpoint ckpt = load_checkpoint(cfg.required("checkpoint"));
  if (!ckpt.scaler) throw FormatError(FormatError::Kind::missing, "checkpoint has no feature scaler");
  const Dataset data = load_dataset(cfg.list("dataset").at(0));
  const Split split = split_dataset(data, 1, static_cast<std::uint64_t>(cfg.integer("seed")),
                                    cfg.split_mode())[0];
  const auto test = scaled(data, split.test, *ckpt.scaler);
  const auto curve = threshold_curve(final_step_scores(ckpt.model, test), labels_of(test),
                                     default_threshold_grid());
  Output out(cfg.text("out"));
  write_curve_csv(out.stream(), curve);
  return 0;
}

int cmd_infer(const RunConfig& cfg) {
  const Checkpoint ckpt = load_checkpoint(cfg.required("checkpoint"));
  if (!ckpt.scaler) throw FormatError(FormatError::Kind::missing, "checkpoint has no feature scaler");
  const double tau = cfg.real("threshold") >= 0.0 ? cfg.real("threshold") : ckpt.meta.threshold;
  const std::size_t t_w = cfg.given("t_w") || ckpt.meta.t_w == 0 ? cfg.count("t_w") : ckpt.meta.t_w;
  StreamingClassifier classifier(ckpt.model, *ckpt.scaler, t_w, tau, warn);
  Output out(cfg.text("out"));
  const std::string& input = cfg.text("input");
  std::size_t emitted = 0;
  if (input == "-") {
    emitted = run_stream(std::cin, out.stream(), classifier, warn);
  } else {
    std::ifstream in(input);
    if (!in) throw std::runtime_error("cannot read " + input);
    emitted = run_stream(in, out.stream(), classifier, warn);
  }
  std::cerr << "emitted " << emitted << " predictions\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Workload classification from gaze sequences"};
  app.require_subcommand(1);
  struct Command {
    const char* name;
    const char* help;
    int (*run)(const RunConfig&);
  };
  const std::vector<Command> commands = {
      {"gen", "generate a synthetic raw gaze dataset (out=DIR)", cmd_gen},
      {"featurize", "raw gaze files to a windowed dataset (data=DIR out=FILE t_w=N)", cmd_featurize},
      {"train", "train one model on fold 0 and write a checkpoint (dataset=FILE out=FILE)", cmd_train},
      {"eval", "k-fold protocol over models and datasets (dataset=A,B models=...)", cmd_eval},
      {"sweep", "threshold curve of a checkpoint on the test split (checkpoint= dataset=)", cmd_sweep},
      {"infer", "streaming inference over timestamp,x,y lines (checkpoint= input=)", cmd_infer},
  };
  std::string keys = "Keys (default):\n";
  for (const ConfigKey& k : config_schema()) {
    keys += "  " + k.name + " (" + k.default_value + ")  " + k.help + "\n";
  }
  std::vector<Invocation> invocations(commands.size());
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < commands.size(); ++i) {
    CLI::App* sub = app.add_subcommand(commands[i].name, commands[i].help);
    sub->add_option("--config", invocations[i].config_file, "key=value configuration file");
    sub->add_option("overrides", invocations[i].overrides, "key=value settings");
    sub->footer(keys);
    subs.push_back(sub);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  for (std::size_t i = 0; i < commands.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    try {
      return commands[i].run(resolve(invocations[i]));
    } catch (const ConfigError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 1;
    }
  }
  return 1;
}
