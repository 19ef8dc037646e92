#include "mhls/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

namespace mhls {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ConfigKey key(std::string name, ValueKind kind, std::string def, std::string help,
              double min = -kInf, bool exclusive = false, double max = kInf,
              std::vector<std::string> choices = {}) {
  return {std::move(name), kind, std::move(def), std::move(help), min, exclusive, max,
          std::move(choices)};
}

const std::vector<std::string> kModels = {"lstm", "hyperlstm", "mhyperlstm", "logreg"};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t comma = s.find(',', start);
    const std::string_view item = trim(s.substr(start, comma - start));
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_number(const ConfigKey& k, std::string_view text, bool integral) {
  double v = 0.0;
  if (integral) {
    std::int64_t i = 0;
    const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), i);
    if (ec != std::errc() || p != text.data() + text.size()) {
      throw ConfigError(k.name, "expected an integer, got '" + std::string(text) + "'");
    }
    v = static_cast<double>(i);
  } else {
    const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || p != text.data() + text.size() || !std::isfinite(v)) {
      throw ConfigError(k.name, "expected a number, got '" + std::string(text) + "'");
    }
  }
  const bool low = k.min_exclusive ? !(v > k.min) : !(v >= k.min);
  if (low || v > k.max) {
    std::ostringstream range;
    range << "value " << text << " out of range (" << (k.min_exclusive ? "> " : ">= ") << k.min;
    if (std::isfinite(k.max)) range << ", <= " << k.max;
    range << ")";
    throw ConfigError(k.name, range.str());
  }
  return v;
}

void validate(const ConfigKey& k, const std::string& value) {
  switch (k.kind) {
    case ValueKind::text:
      return;
    case ValueKind::integer:
      parse_number(k, value, true);
      return;
    case ValueKind::real:
      parse_number(k, value, false);
      return;
    case ValueKind::flag:
      if (value != "true" && value != "false") {
        throw ConfigError(k.name, "expected true or false, got '" + value + "'");
      }
      return;
    case ValueKind::choice:
      if (std::find(k.choices.begin(), k.choices.end(), value) == k.choices.end()) {
        throw ConfigError(k.name, "unknown value '" + value + "'");
      }
      return;
    case ValueKind::list: {
      const auto items = split_list(value);
      if (items.empty()) throw ConfigError(k.name, "expected a comma-separated list");
      for (const std::string& item : items) {
        if (!k.choices.empty() &&
            std::find(k.choices.begin(), k.choices.end(), item) == k.choices.end()) {
          throw ConfigError(k.name, "unknown list item '" + item + "'");
        }
      }
      return;
    }
  }
}

}  // namespace

const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> schema = {
      key("data", ValueKind::text, "", "directory of raw gaze files"),
      key("dataset", ValueKind::list, "", "processed dataset file(s), comma-separated"),
      key("checkpoint", ValueKind::text, "", "model checkpoint file"),
      key("out", ValueKind::text, "", "output file or directory"),
      key("input", ValueKind::text, "-", "streaming input file, - for standard input"),
      key("t_w", ValueKind::integer, "10", "window length in seconds", 1),
      key("model", ValueKind::choice, "mhyperlstm", "model variant", -kInf, false, kInf, kModels),
      key("models", ValueKind::list, "lstm,hyperlstm,mhyperlstm,logreg", "models to evaluate",
          -kInf, false, kInf, kModels),
      key("hidden", ValueKind::integer, "0", "main hidden size; 0 uses the capacity-matched size", 0),
      key("aux_hidden", ValueKind::integer, "0", "auxiliary hidden size; 0 uses the default", 0),
      key("n_z", ValueKind::integer, "0", "embedding / mixture size; 0 uses the default", 0),
      key("fc", ValueKind::integer, "0", "classifier head width; 0 means hidden", 0),
      key("layer_norm", ValueKind::flag, "true", "layer normalization in the cells"),
      key("lr", ValueKind::real, "0.0001", "Adam learning rate", 0.0, true),
      key("epochs", ValueKind::integer, "50", "training epochs", 1),
      key("epsilon", ValueKind::real, "0.2", "label smoothing", 0.0, false, 0.999999),
      key("l2", ValueKind::real, "0.0001", "L2 coefficient on weights", 0.0),
      key("batch", ValueKind::integer, "32", "mini-batch size", 1),
      key("seed", ValueKind::integer, "1", "training and split seed", 0),
      key("folds", ValueKind::integer, "5", "number of disjoint test folds", 1),
      key("split", ValueKind::choice, "window", "split unit", -kInf, false, kInf,
          {"window", "participant"}),
      key("threshold", ValueKind::real, "-1", "decision threshold; -1 uses the checkpoint's", -1.0,
          false, 1.0),
      key("participants", ValueKind::integer, "20", "synthetic participants", 1),
      key("trials", ValueKind::integer, "1", "synthetic trials per condition", 1),
      key("gen_seed", ValueKind::integer, "1", "generator master seed", 0),
      key("duration", ValueKind::real, "60", "synthetic trial duration in seconds", 0.0, true),
      key("dwell_low", ValueKind::real, "0.3", "mean fixation duration, low workload", 0.0, true),
      key("dwell_high", ValueKind::real, "0.5", "mean fixation duration, high workload", 0.0, true),
      key("dwell_shape", ValueKind::real, "4", "gamma shape of fixation durations", 0.0, true),
      key("dispersion_ratio", ValueKind::real, "1.5", "low/high spatial spread ratio", 0.0, true),
      key("separation", ValueKind::real, "1", "workload separation factor", 0.0),
      key("fixation_scatter", ValueKind::real, "60", "landing scatter around targets, px", 0.0, true),
      key("jitter", ValueKind::real, "5", "within-fixation drift, px", 0.0, true),
      key("interval_size", ValueKind::real, "50", "obstacle interval, m", 0.0, true),
      key("effect_size", ValueKind::real, "0.25", "expected relative dispersion difference", 0.0),
  };
  return schema;
}

const ConfigKey& RunConfig::schema_entry(const std::string& name) {
  for (const ConfigKey& k : config_schema()) {
    if (k.name == name) return k;
  }
  throw ConfigError(name, "unknown key");
}

RunConfig::RunConfig() {
  for (const ConfigKey& k : config_schema()) values_[k.name] = k.default_value;
}

void RunConfig::set(const std::string& name, const std::string& value) {
  const ConfigKey& k = schema_entry(name);
  validate(k, value);
  values_[name] = value;
  given_[name] = true;
}

void RunConfig::set_assignment(const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError(std::string(trim(assignment)), "expected key=value");
  }
  set(std::string(trim(std::string_view(assignment).substr(0, eq))),
      std::string(trim(std::string_view(assignment).substr(eq + 1))));
}

RunConfig RunConfig::parse(std::string_view file_text, std::span<const std::string> overrides) {
  RunConfig cfg;
  std::size_t start = 0;
  while (start < file_text.size()) {
    std::size_t end = file_text.find('\n', start);
    if (end == std::string_view::npos) end = file_text.size();
    const std::string_view line = trim(file_text.substr(start, end - start));
    if (!line.empty() && line.front() != '#') cfg.set_assignment(std::string(line));
    start = end + 1;
  }
  for (const std::string& o : overrides) cfg.set_assignment(o);
  return cfg;
}

RunConfig RunConfig::load(const std::optional<std::filesystem::path>& file,
                          std::span<const std::string> overrides) {
  std::string text;
  if (file) {
    std::ifstream in(*file);
    if (!in) throw ConfigError("--config", "cannot read " + file->string());
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  return parse(text, overrides);
}

const std::string& RunConfig::text(const std::string& name) const {
  schema_entry(name);
  return values_.at(name);
}

std::int64_t RunConfig::integer(const std::string& name) const {
  return static_cast<std::int64_t>(parse_number(schema_entry(name), text(name), true));
}

std::size_t RunConfig::count(const std::string& name) const {
  const std::int64_t v = integer(name);
  if (v < 0) throw ConfigError(name, "must be non-negative");
  return static_cast<std::size_t>(v);
}

double RunConfig::real(const std::string& name) const {
  return parse_number(schema_entry(name), text(name), false);
}

bool RunConfig::flag(const std::string& name) const { return text(name) == "true"; }

std::vector<std::string> RunConfig::list(const std::string& name) const {
  return split_list(text(name));
}

const std::string& RunConfig::required(const std::string& name) const {
  const std::string& v = text(name);
  if (v.empty()) throw ConfigError(name, "required but not given");
  return v;
}

void RunConfig::echo(std::ostream& out) const {
  for (const ConfigKey& k : config_schema()) out << k.name << '=' << values_.at(k.name) << '\n';
}

SizeConfig RunConfig::size_for(CellKind kind) const {
  SizeConfig s = SizeConfig::paper(kind);
  if (count("hidden")) s.hidden = count("hidden");
  if (kind != CellKind::lstm) {
    if (count("aux_hidden")) s.aux_hidden = count("aux_hidden");
    if (count("n_z")) s.n_z = count("n_z");
  }
  s.fc = count("fc");
  s.layer_norm = flag("layer_norm");
  return s;
}

TrainConfig RunConfig::train_config(CellKind kind) const {
  TrainConfig cfg;
  cfg.kind = kind;
  cfg.size = size_for(kind);
  cfg.lr = real("lr");
  cfg.epochs = count("epochs");
  cfg.epsilon = real("epsilon");
  cfg.l2 = real("l2");
  cfg.batch = count("batch");
  cfg.seed = static_cast<std::uint64_t>(integer("seed"));
  return cfg;
}

LogRegConfig RunConfig::logreg_config() const {
  LogRegConfig cfg;
  cfg.lr = real("lr");
  cfg.epochs = count("epochs");
  cfg.epsilon = real("epsilon");
  cfg.l2 = real("l2");
  cfg.batch = count("batch");
  cfg.seed = static_cast<std::uint64_t>(integer("seed"));
  return cfg;
}

GeneratorKnobs RunConfig::generator_knobs() const {
  GeneratorKnobs k;
  k.dwell_low = real("dwell_low");
  k.dwell_high = real("dwell_high");
  k.dwell_shape = real("dwell_shape");
  k.dispersion_ratio = real("dispersion_ratio");
  k.separation = real("separation");
  k.fixation_scatter = real("fixation_scatter");
  k.jitter = real("jitter");
  k.effect_size = real("effect_size");
  k.trial_duration = real("duration");
  k.interval_size = real("interval_size");
  return k;
}

SplitMode RunConfig::split_mode() const {
  return text("split") == "participant" ? SplitMode::participant : SplitMode::window;
}

}  // namespace mhls
