#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mhls/features.hpp"
#include "mhls/logreg.hpp"
#include "mhls/train.hpp"

namespace mhls {

using WarningSink = std::function<void(const std::string&)>;

/// One (participant, scenario) recording.
struct Trial {
  int participant = 0;
  int scenario = 0;
  std::vector<GazeSample> samples;
};

inline constexpr const char* kGazeHeader = "participant,scenario,timestamp,x,y";

/// Reads a raw gaze file. Consecutive rows with the same (participant,
/// scenario) form one trial. Throws GazeError with the line number on
/// malformed rows.
std::vector<Trial> read_gaze_csv(const std::filesystem::path& path);
/// Every *.csv file of a directory in file-name order.
std::vector<Trial> read_gaze_dir(const std::filesystem::path& dir);
void write_gaze_csv(const std::filesystem::path& path, std::span<const Trial> trials);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

struct SequenceSample {
  std::vector<FeatureVector> steps;  // one per second, unscaled
  FeatureVector flat{};              // statistics over the whole window, unscaled
  int label = 0;
  int participant = 0;
  std::size_t trial = 0;
  std::size_t offset = 0;  // first second of the window within its trial
};

struct Dataset {
  std::size_t t_w = 0;
  std::vector<SequenceSample> windows;

  std::size_t size() const { return windows.size(); }
};

/// All full windows of one trial; segments broken by empty seconds or long
/// gaps are windowed separately. A trial yielding no window triggers a
/// warning.
std::vector<SequenceSample> slide_windows(const Trial& trial, std::size_t trial_index,
                                          std::size_t t_w, const WarningSink& warn = {});
Dataset build_dataset(std::span<const Trial> trials, std::size_t t_w,
                      const WarningSink& warn = {});

/// Named-array file tagged "dataset".
void save_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& path);

/// window: every window is assigned independently (may leak near-duplicate
/// overlapping windows across splits). participant: whole participants are
/// assigned, so no participant appears in two splits of a fold.
enum class SplitMode { window, participant };

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// k pairwise-disjoint test folds, each floor(10%) of the units; per fold the
/// validation set is another 10% of the units taken from the rest and the
/// remainder trains. Deterministic given seed. Throws std::invalid_argument
/// when the data cannot hold k folds.
std::vector<Split> split_dataset(const Dataset& data, std::size_t folds, std::uint64_t seed,
                                 SplitMode mode = SplitMode::window);

/// Scaled model inputs of one fold, with scalers fitted on its training
/// windows only.
struct PreparedSplit {
  FeatureScaler scaler;
  FeatureScaler flat_scaler;
  std::vector<LabeledSequence> train, val, test;
  std::vector<LabeledVector> flat_train, flat_val, flat_test;
};

/// Throws LeakageError if validation or test windows overlap the training
/// windows the scalers were fitted on.
PreparedSplit prepare_split(const Dataset& data, const Split& split);

FeatureScaler fit_step_scaler(const Dataset& data, std::span<const std::size_t> train);
LabeledSequence to_sequence(const SequenceSample& sample, const FeatureScaler& scaler);
Tensor to_tensor(const FeatureVector& v);

}  // namespace mhls
