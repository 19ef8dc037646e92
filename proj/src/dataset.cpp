#include "mhls/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "mhls/checkpoint.hpp"

namespace mhls {

namespace {

template <class T>
T parse_field(std::string_view text, const std::string& where, const char* field) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw GazeError(where + ": invalid " + field + " '" + std::string(text) + "'");
  }
  return value;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string_view strip(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

Tensor scalar_tensor(double v) { return Tensor(Shape{1}, {v}); }

}  // namespace

std::string format_double(double v) {
  std::array<char, 32> buf;
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw std::runtime_error("cannot format number");
  return std::string(buf.data(), ptr);
}

std::vector<Trial> read_gaze_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw GazeError("cannot open gaze file " + path.string());
  std::string line;
  if (!std::getline(in, line) || strip(line) != kGazeHeader) {
    throw GazeError(path.string() + ": expected header '" + kGazeHeader + "'");
  }
  std::vector<Trial> trials;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = strip(line);
    if (row.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const auto fields = split_commas(row);
    if (fields.size() != 5) throw GazeError(where + ": expected 5 fields");
    GazeSample s;
    s.participant = parse_field<int>(strip(fields[0]), where, "participant");
    s.scenario = parse_field<int>(strip(fields[1]), where, "scenario");
    s.t = parse_field<double>(strip(fields[2]), where, "timestamp");
    s.x = parse_field<double>(strip(fields[3]), where, "x");
    s.y = parse_field<double>(strip(fields[4]), where, "y");
    if (s.scenario != 0 && s.scenario != 1) throw GazeError(where + ": scenario must be 0 or 1");
    if (trials.empty() || trials.back().participant != s.participant ||
        trials.back().scenario != s.scenario) {
      trials.push_back({s.participant, s.scenario, {}});
    }
    Trial& trial = trials.back();
    if (!trial.samples.empty() && !(s.t > trial.samples.back().t)) {
      throw GazeError(where + ": timestamps must be strictly increasing within a trial");
    }
    trial.samples.push_back(s);
  }
  return trials;
}

std::vector<Trial> read_gaze_dir(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Trial> trials;
  for (const auto& f : files) {
    for (Trial& t : read_gaze_csv(f)) trials.push_back(std::move(t));
  }
  return trials;
}

void write_gaze_csv(const std::filesystem::path& path, std::span<const Trial> trials) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kGazeHeader << '\n';
  for (const Trial& trial : trials) {
    for (const GazeSample& s : trial.samples) {
      out << trial.participant << ',' << trial.scenario << ',' << format_double(s.t) << ','
          << format_double(s.x) << ',' << format_double(s.y) << '\n';
    }
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<SequenceSample> slide_windows(const Trial& trial, std::size_t trial_index,
                                          std::size_t t_w, const WarningSink& warn) {
  const std::vector<AttributeVector> attrs = augment(trial.samples);
  std::vector<SequenceSample> out;
  for (const SecondSegment& seg : second_segments(trial.samples, attrs)) {
    for (std::size_t off : window_offsets(seg.seconds.size(), t_w)) {
      SequenceSample w;
      w.steps.assign(seg.seconds.begin() + static_cast<std::ptrdiff_t>(off),
                     seg.seconds.begin() + static_cast<std::ptrdiff_t>(off + t_w));
      const std::size_t first = seg.bounds[off];
      const std::size_t last = seg.bounds[off + t_w];
      w.flat = flat_features(std::span<const AttributeVector>(attrs).subspan(first, last - first));
      w.label = trial.scenario;
      w.participant = trial.participant;
      w.trial = trial_index;
      w.offset = seg.first_second + off;
      out.push_back(std::move(w));
    }
  }
  if (out.empty() && warn) {
    warn("trial " + std::to_string(trial_index) + " (participant " +
         std::to_string(trial.participant) + ") is shorter than " + std::to_string(t_w) +
         " s of contiguous data; no windows");
  }
  return out;
}

Dataset build_dataset(std::span<const Trial> trials, std::size_t t_w, const WarningSink& warn) {
  if (t_w == 0) throw std::invalid_argument("t_w must be at least 1");
  Dataset data;
  data.t_w = t_w;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    for (SequenceSample& w : slide_windows(trials[i], i, t_w, warn)) {
      data.windows.push_back(std::move(w));
    }
  }
  return data;
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
  const std::size_t n = data.size();
  if (n == 0) throw std::invalid_argument("cannot save an empty dataset");
  Tensor steps(Shape{n, data.t_w, kFeatures});
  Tensor flat(Shape{n, kFeatures});
  Tensor labels(Shape{n}), participants(Shape{n}), trials(Shape{n}), offsets(Shape{n});
  for (std::size_t i = 0; i < n; ++i) {
    const SequenceSample& w = data.windows[i];
    for (std::size_t t = 0; t < data.t_w; ++t) {
      for (std::size_t j = 0; j < kFeatures; ++j) steps.at(i, t, j) = w.steps[t][j];
    }
    for (std::size_t j = 0; j < kFeatures; ++j) flat.at(i, j) = w.flat[j];
    labels[i] = w.label;
    participants[i] = w.participant;
    trials[i] = static_cast<double>(w.trial);
    offsets[i] = static_cast<double>(w.offset);
  }
  Archive archive;
  archive.tag = "dataset";
  archive.arrays = {{"features", std::move(steps)}, {"flat", std::move(flat)},
                    {"labels", std::move(labels)},  {"participant", std::move(participants)},
                    {"trial", std::move(trials)},   {"offset", std::move(offsets)}};
  archive.extras = {{"meta.t_w", scalar_tensor(static_cast<double>(data.t_w))}};
  save_archive(path, archive);
}

Dataset load_dataset(const std::filesystem::path& path) {
  const Archive archive = load_archive(path);
  if (archive.tag != "dataset") {
    throw FormatError(FormatError::Kind::bad_variant,
                      path.string() + " holds '" + archive.tag + "', not a dataset");
  }
  auto need = [&](const char* name) -> const Tensor& {
    const Tensor* t = archive.find_array(name);
    if (!t) throw FormatError(FormatError::Kind::missing, std::string("dataset lacks ") + name);
    return *t;
  };
  const Tensor& steps = need("features");
  const Tensor& flat = need("flat");
  const Tensor& labels = need("labels");
  const Tensor& participants = need("participant");
  const Tensor& trials = need("trial");
  const Tensor& offsets = need("offset");
  Dataset data;
  data.t_w = static_cast<std::size_t>(archive.extra("meta.t_w")[0]);
  const std::size_t n = labels.size();
  if (steps.rank() != 3 || steps.dim(0) != n || steps.dim(1) != data.t_w ||
      steps.dim(2) != kFeatures || flat.rank() != 2 || flat.dim(0) != n ||
      participants.size() != n || trials.size() != n || offsets.size() != n) {
    throw FormatError(FormatError::Kind::shape, "dataset arrays disagree in size");
  }
  data.windows.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    SequenceSample& w = data.windows[i];
    w.steps.resize(data.t_w);
    for (std::size_t t = 0; t < data.t_w; ++t) {
      for (std::size_t j = 0; j < kFeatures; ++j) w.steps[t][j] = steps.at(i, t, j);
    }
    for (std::size_t j = 0; j < kFeatures; ++j) w.flat[j] = flat.at(i, j);
    w.label = static_cast<int>(labels[i]);
    w.participant = static_cast<int>(participants[i]);
    w.trial = static_cast<std::size_t>(trials[i]);
    w.offset = static_cast<std::size_t>(offsets[i]);
  }
  return data;
}

std::vector<Split> split_dataset(const Dataset& data, std::size_t folds, std::uint64_t seed,
                                 SplitMode mode) {
  if (folds == 0) throw std::invalid_argument("split_dataset: at least one test fold required");
  std::vector<std::vector<std::size_t>> units;
  if (mode == SplitMode::window) {
    units.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) units[i] = {i};
  } else {
    std::map<int, std::vector<std::size_t>> by_participant;
    for (std::size_t i = 0; i < data.size(); ++i) {
      by_participant[data.windows[i].participant].push_back(i);
    }
    for (auto& [id, idx] : by_participant) units.push_back(std::move(idx));
  }
  const std::size_t n = units.size();
  const std::size_t fold_size = n / 10;
  if (fold_size == 0 || (folds + 1) * fold_size >= n) {
    throw std::invalid_argument("split_dataset: " + std::to_string(n) + " " +
                                (mode == SplitMode::window ? "windows" : "participants") +
                                " cannot hold " + std::to_string(folds) +
                                " disjoint 10% test folds plus validation and training data");
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    0x5e1177u};
  std::mt19937_64 rng(seq);
  std::shuffle(perm.begin(), perm.end(), rng);

  auto expand = [&units](std::span<const std::size_t> chosen) {
    std::vector<std::size_t> out;
    for (std::size_t u : chosen) out.insert(out.end(), units[u].begin(), units[u].end());
    std::sort(out.begin(), out.end());
    return out;
  };

  std::vector<Split> splits;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> rest;
    for (std::size_t k = 0; k < n - fold_size; ++k) {
      rest.push_back(perm[((f + 1) * fold_size + k) % n]);
    }
    const std::span<const std::size_t> test(perm.data() + f * fold_size, fold_size);
    Split s;
    s.test = expand(test);
    s.val = expand(std::span<const std::size_t>(rest).first(fold_size));
    s.train = expand(std::span<const std::size_t>(rest).subspan(fold_size));
    splits.push_back(std::move(s));
  }
  return splits;
}

Tensor to_tensor(const FeatureVector& v) {
  return Tensor(Shape{kFeatures}, std::vector<double>(v.begin(), v.end()));
}

FeatureScaler fit_step_scaler(const Dataset& data, std::span<const std::size_t> train) {
  std::vector<FeatureVector> rows;
  rows.reserve(train.size() * data.t_w);
  for (std::size_t i : train) {
    const auto& steps = data.windows.at(i).steps;
    rows.insert(rows.end(), steps.begin(), steps.end());
  }
  return FeatureScaler::fit(rows, std::vector<std::size_t>(train.begin(), train.end()));
}

LabeledSequence to_sequence(const SequenceSample& sample, const FeatureScaler& scaler) {
  LabeledSequence seq;
  seq.label = static_cast<std::size_t>(sample.label);
  seq.steps.reserve(sample.steps.size());
  for (const FeatureVector& v : sample.steps) seq.steps.push_back(to_tensor(scaler.apply(v)));
  return seq;
}

PreparedSplit prepare_split(const Dataset& data, const Split& split) {
  PreparedSplit out;
  out.scaler = fit_step_scaler(data, split.train);
  std::vector<FeatureVector> flat_rows;
  for (std::size_t i : split.train) flat_rows.push_back(data.windows.at(i).flat);
  out.flat_scaler = FeatureScaler::fit(flat_rows, split.train);
  out.scaler.require_unseen(split.val, "validation");
  out.scaler.require_unseen(split.test, "test");

  auto fill = [&](const std::vector<std::size_t>& idx, std::vector<LabeledSequence>& seqs,
                  std::vector<LabeledVector>& flats) {
    for (std::size_t i : idx) {
      const SequenceSample& w = data.windows.at(i);
      seqs.push_back(to_sequence(w, out.scaler));
      flats.push_back({to_tensor(out.flat_scaler.apply(w.flat)), static_cast<std::size_t>(w.label)});
    }
  };
  fill(split.train, out.train, out.flat_train);
  fill(split.val, out.val, out.flat_val);
  fill(split.test, out.test, out.flat_test);
  return out;
}

}  // namespace mhls
