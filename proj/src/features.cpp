#include "mhls/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mhls {

AttributeVector derive_first(const GazeSample& first) {
  return {first.x, first.y, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
}

AttributeVector derive(const GazeSample& previous, const GazeSample& current) {
  const double dt = current.t - previous.t;
  if (!(dt > 0.0)) {
    throw GazeError("gaze timestamps must be strictly increasing (t=" +
                    std::to_string(current.t) + " after t=" + std::to_string(previous.t) + ")");
  }
  const double dx = current.x - previous.x;
  const double dy = current.y - previous.y;
  const double dist = std::hypot(dx, dy);
  return {current.x, current.y, dx, dy, dist, dx / dt, dy / dt, dist / dt};
}

std::vector<AttributeVector> augment(std::span<const GazeSample> samples) {
  std::vector<AttributeVector> out;
  out.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out.push_back(i == 0 ? derive_first(samples[0]) : derive(samples[i - 1], samples[i]));
  }
  return out;
}

namespace {

double interpolated(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

FeatureVector attribute_statistics(std::span<const AttributeVector> attrs) {
  if (attrs.empty()) throw GazeError("cannot compute features of an empty sample group");
  FeatureVector out{};
  std::vector<double> column(attrs.size());
  for (std::size_t a = 0; a < kAttributes; ++a) {
    for (std::size_t i = 0; i < attrs.size(); ++i) column[i] = attrs[i][a];
    const auto stats = describe(column);
    std::copy(stats.begin(), stats.end(), out.begin() + static_cast<std::ptrdiff_t>(a * kStatistics));
  }
  return out;
}

}  // namespace

std::array<double, kStatistics> describe(std::span<const double> values) {
  if (values.empty()) throw GazeError("describe: no values");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : sorted) ss += (v - mean) * (v - mean);
  const double lo = sorted.front();
  const double hi = sorted.back();
  return {mean,
          std::sqrt(ss / n),
          interpolated(sorted, 0.5),
          interpolated(sorted, 0.25),
          interpolated(sorted, 0.75),
          hi,
          lo,
          hi - lo};
}

FeatureVector second_features(std::span<const AttributeVector> attrs) {
  return attribute_statistics(attrs);
}

FeatureVector flat_features(std::span<const AttributeVector> attrs) {
  return attribute_statistics(attrs);
}

std::size_t second_index(double t, double t0) {
  if (t < t0) throw GazeError("timestamp precedes the trial start");
  return static_cast<std::size_t>(std::floor(t - t0));
}

std::vector<SecondSegment> second_segments(std::span<const GazeSample> samples,
                                           std::span<const AttributeVector> attrs) {
  if (samples.size() != attrs.size()) {
    throw GazeError("second_segments: samples and attributes differ in length");
  }
  std::vector<SecondSegment> segments;
  if (samples.empty()) return segments;
  const double t0 = samples.front().t;

  auto close_segment = [&](SecondSegment& seg, std::size_t end) {
    seg.bounds.push_back(end);
    for (std::size_t k = 0; k + 1 < seg.bounds.size(); ++k) {
      seg.seconds.push_back(second_features(
          attrs.subspan(seg.bounds[k], seg.bounds[k + 1] - seg.bounds[k])));
    }
    segments.push_back(std::move(seg));
  };

  SecondSegment current;
  std::size_t current_bin = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::size_t bin = second_index(samples[i].t, t0);
    if (i == 0) {
      current.first_second = bin;
      current.bounds.push_back(0);
      current_bin = bin;
      continue;
    }
    if (bin == current_bin) continue;
    const bool gap = samples[i].t - samples[i - 1].t > kMaxGapSeconds;
    if (bin != current_bin + 1 || gap) {
      close_segment(current, i);
      current = SecondSegment{};
      current.first_second = bin;
    }
    current.bounds.push_back(i);
    current_bin = bin;
  }
  close_segment(current, samples.size());
  return segments;
}

std::size_t window_stride(std::size_t t_w) {
  return std::max<std::size_t>(1, t_w / 10);
}

std::vector<std::size_t> window_offsets(std::size_t n_seconds, std::size_t t_w) {
  if (t_w == 0) throw std::invalid_argument("window length must be at least 1 second");
  std::vector<std::size_t> offsets;
  const std::size_t stride = window_stride(t_w);
  for (std::size_t off = 0; off + t_w <= n_seconds; off += stride) offsets.push_back(off);
  return offsets;
}

FeatureScaler::FeatureScaler(std::vector<double> min, std::vector<double> max)
    : min_(std::move(min)), max_(std::move(max)) {
  if (min_.size() != kFeatures || max_.size() != kFeatures) {
    throw DimensionError("feature scaler needs " + std::to_string(kFeatures) +
                         " minima and maxima");
  }
}

FeatureScaler FeatureScaler::fit(std::span<const FeatureVector> rows,
                                 std::vector<std::size_t> fitted_on) {
  if (rows.empty()) throw std::invalid_argument("cannot fit a scaler on no rows");
  std::vector<double> lo(rows[0].begin(), rows[0].end());
  std::vector<double> hi = lo;
  for (const FeatureVector& r : rows) {
    for (std::size_t j = 0; j < kFeatures; ++j) {
      lo[j] = std::min(lo[j], r[j]);
      hi[j] = std::max(hi[j], r[j]);
    }
  }
  FeatureScaler s(std::move(lo), std::move(hi));
  std::sort(fitted_on.begin(), fitted_on.end());
  s.fitted_on_ = std::move(fitted_on);
  return s;
}

FeatureVector FeatureScaler::apply(const FeatureVector& v) const {
  if (!fitted()) throw std::logic_error("feature scaler used before fitting");
  FeatureVector out{};
  for (std::size_t j = 0; j < kFeatures; ++j) {
    const double range = max_[j] - min_[j];
    out[j] = range > 0.0 ? std::clamp((v[j] - min_[j]) / range, 0.0, 1.0) : 0.0;
  }
  return out;
}

void FeatureScaler::require_unseen(std::span<const std::size_t> window_ids,
                                   const char* split) const {
  for (std::size_t id : window_ids) {
    if (std::binary_search(fitted_on_.begin(), fitted_on_.end(), id)) {
      throw LeakageError(std::string("normalization statistics include window ") +
                         std::to_string(id) + " of the " + split + " split");
    }
  }
}

}  // namespace mhls
