#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mhls/tensor.hpp"

namespace mhls {

inline constexpr std::size_t kAttributes = 8;
inline constexpr std::size_t kStatistics = 8;
inline constexpr std::size_t kFeatures = kAttributes * kStatistics;

inline constexpr std::array<const char*, kAttributes> kAttributeNames = {
    "x", "y", "dx", "dy", "dist", "vx", "vy", "speed"};
inline constexpr std::array<const char*, kStatistics> kStatisticNames = {
    "mean", "std", "median", "p25", "p75", "max", "min", "range"};

/// x, y, dx, dy, dist, vx, vy, speed.
using AttributeVector = std::array<double, kAttributes>;
/// Attribute-major, statistic-minor: feature a * 8 + s is statistic s of
/// attribute a.
using FeatureVector = std::array<double, kFeatures>;

/// One raw gaze record. scenario: 0 = low workload, 1 = high workload.
struct GazeSample {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  int participant = 0;
  int scenario = 0;
};

/// Raised for malformed gaze input (non-increasing timestamps, empty windows).
class GazeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Derives per-sample attributes from the previous sample using the actual
/// timestamp difference. The first sample's derived attributes are zero.
std::vector<AttributeVector> augment(std::span<const GazeSample> samples);

/// Attributes of the sample at `t`, given the previous sample.
AttributeVector derive(const GazeSample& previous, const GazeSample& current);
AttributeVector derive_first(const GazeSample& first);

/// mean, population std, median, p25, p75, max, min, range, with percentiles
/// linearly interpolated between closest ranks. Throws GazeError when empty.
std::array<double, kStatistics> describe(std::span<const double> values);

/// The 8 statistics of each attribute over one 1-second group of samples.
FeatureVector second_features(std::span<const AttributeVector> attrs);
/// The same statistics over the raw attributes of a whole window, the
/// fixed-size input of the logistic-regression baseline.
FeatureVector flat_features(std::span<const AttributeVector> attrs);

/// Index of the 1-second bin holding timestamp t, anchored at t0.
std::size_t second_index(double t, double t0);

/// A run of consecutive nonempty seconds. Samples of second k of the run are
/// attrs[bounds[k] .. bounds[k+1]).
struct SecondSegment {
  std::size_t first_second = 0;
  std::vector<FeatureVector> seconds;
  std::vector<std::size_t> bounds;
};

/// Groups a trial into 1-second bins anchored at its first timestamp. A bin
/// without samples, or a gap over 2 s between samples, ends a segment.
std::vector<SecondSegment> second_segments(std::span<const GazeSample> samples,
                                           std::span<const AttributeVector> attrs);

/// Gaps longer than this between consecutive samples break a segment.
inline constexpr double kMaxGapSeconds = 2.0;

/// Sliding-window stride for 90% overlap: max(1, floor(0.1 * t_w)).
std::size_t window_stride(std::size_t t_w);
/// Start offsets of every full window of length t_w over n seconds.
std::vector<std::size_t> window_offsets(std::size_t n_seconds, std::size_t t_w);

/// Per-feature min-max scaling to [0, 1] learned from a training split.
class FeatureScaler {
 public:
  FeatureScaler() = default;
  FeatureScaler(std::vector<double> min, std::vector<double> max);

  /// Fits on the given vectors; `fitted_on` records which dataset windows
  /// they came from so that leakage into other splits can be detected.
  static FeatureScaler fit(std::span<const FeatureVector> rows,
                           std::vector<std::size_t> fitted_on = {});

  /// (v - min) / (max - min) clamped to [0, 1]; zero-range features map to 0.
  FeatureVector apply(const FeatureVector& v) const;

  const std::vector<double>& min() const { return min_; }
  const std::vector<double>& max() const { return max_; }
  const std::vector<std::size_t>& fitted_on() const { return fitted_on_; }
  bool fitted() const { return !min_.empty(); }

  /// Throws LeakageError if any of `window_ids` was used for fitting.
  void require_unseen(std::span<const std::size_t> window_ids, const char* split) const;

 private:
  std::vector<double> min_;
  std::vector<double> max_;
  std::vector<std::size_t> fitted_on_;  // sorted
};

class LeakageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace mhls
