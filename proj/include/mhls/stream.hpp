#pragma once

#include <deque>
#include <iosfwd>
#include <optional>
#include <vector>

#include "mhls/dataset.hpp"
#include "mhls/model.hpp"

namespace mhls {

struct StreamEmission {
  double timestamp = 0.0;  // end of the second that completed the window
  double probability = 0.0;
  int label = 0;
};

/// Real-time loop: gaze events are binned into seconds anchored at the first
/// event; each completed second becomes a feature vector in a rolling t_w
/// buffer, and once the buffer is full every completed second emits the
/// final-step probability. An empty second or a gap over 2 s clears the
/// buffer. Matches the batch path on the same data bit-for-bit.
class StreamingClassifier {
 public:
  StreamingClassifier(const SequenceModel& model, FeatureScaler scaler, std::size_t t_w,
                      double threshold, WarningSink warn = {});

  /// Out-of-order events are dropped with a warning.
  std::vector<StreamEmission> push(double t, double x, double y);
  /// Closes the second in progress.
  std::vector<StreamEmission> finish();

  std::size_t buffered() const { return buffer_.size(); }
  /// Wall-clock milliseconds spent on each completed second (featurize, scale,
  /// forward).
  const std::vector<double>& latencies_ms() const { return latencies_; }

 private:
  std::optional<StreamEmission> close_bin();

  const SequenceModel& model_;
  FeatureScaler scaler_;
  std::size_t t_w_;
  double threshold_;
  WarningSink warn_;

  bool started_ = false;
  double t0_ = 0.0;
  std::size_t bin_ = 0;
  GazeSample last_{};
  std::vector<AttributeVector> pending_;
  std::deque<Tensor> buffer_;
  std::vector<double> latencies_;
};

/// Reads `timestamp,x,y` lines and writes `timestamp,probability,label_at_tau`
/// lines. Malformed lines are skipped with a warning. Returns the number of
/// emissions.
std::size_t run_stream(std::istream& in, std::ostream& out, StreamingClassifier& classifier,
                       const WarningSink& warn = {});

}  // namespace mhls
