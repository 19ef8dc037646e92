#include "mhls/stream.hpp"

#include <charconv>
#include <chrono>
#include <istream>
#include <ostream>
#include <string>

namespace mhls {

StreamingClassifier::StreamingClassifier(const SequenceModel& model, FeatureScaler scaler,
                                         std::size_t t_w, double threshold, WarningSink warn)
    : model_(model), scaler_(std::move(scaler)), t_w_(t_w), threshold_(threshold),
      warn_(std::move(warn)) {
  if (t_w_ == 0) throw std::invalid_argument("t_w must be at least 1");
  if (!scaler_.fitted()) throw std::invalid_argument("streaming needs a fitted feature scaler");
}

std::optional<StreamEmission> StreamingClassifier::close_bin() {
  const auto start = std::chrono::steady_clock::now();
  buffer_.push_back(to_tensor(scaler_.apply(second_features(pending_))));
  pending_.clear();
  if (buffer_.size() > t_w_) buffer_.pop_front();
  std::optional<StreamEmission> out;
  if (buffer_.size() == t_w_) {
    const std::vector<Tensor> steps(buffer_.begin(), buffer_.end());
    const double p = model_.forward_sequence(steps).back()[1];
    out = StreamEmission{t0_ + static_cast<double>(bin_ + 1), p, p >= threshold_ ? 1 : 0};
  }
  const std::chrono::duration<double, std::milli> took = std::chrono::steady_clock::now() - start;
  latencies_.push_back(took.count());
  return out;
}

std::vector<StreamEmission> StreamingClassifier::push(double t, double x, double y) {
  std::vector<StreamEmission> out;
  const GazeSample sample{t, x, y, 0, 0};
  if (!started_) {
    started_ = true;
    t0_ = t;
    bin_ = 0;
    pending_.push_back(derive_first(sample));
    last_ = sample;
    return out;
  }
  if (!(t > last_.t)) {
    if (warn_) warn_("dropping out-of-order event at t=" + std::to_string(t));
    return out;
  }
  const AttributeVector attrs = derive(last_, sample);
  const std::size_t bin = second_index(t, t0_);
  if (bin != bin_) {
    if (auto e = close_bin()) out.push_back(*e);
    if (bin != bin_ + 1 || t - last_.t > kMaxGapSeconds) {
      if (warn_) {
        warn_("no data between t=" + std::to_string(last_.t) + " and t=" + std::to_string(t) +
              "; context buffer reset");
      }
      buffer_.clear();
    }
    bin_ = bin;
  }
  pending_.push_back(attrs);
  last_ = sample;
  return out;
}

std::vector<StreamEmission> StreamingClassifier::finish() {
  std::vector<StreamEmission> out;
  if (!pending_.empty()) {
    if (auto e = close_bin()) out.push_back(*e);
  }
  return out;
}

std::size_t run_stream(std::istream& in, std::ostream& out, StreamingClassifier& classifier,
                       const WarningSink& warn) {
  std::size_t emitted = 0;
  auto write = [&](const std::vector<StreamEmission>& es) {
    for (const StreamEmission& e : es) {
      out << format_double(e.timestamp) << ',' << format_double(e.probability) << ',' << e.label
          << '\n';
      ++emitted;
    }
    if (!es.empty()) out.flush();
  };
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.rfind("timestamp", 0) == 0) continue;
    double v[3];
    const char* p = line.data();
    const char* end = line.data() + line.size();
    bool ok = true;
    for (int k = 0; k < 3 && ok; ++k) {
      const auto r = std::from_chars(p, end, v[k]);
      ok = r.ec == std::errc();
      p = r.ptr;
      if (ok && k < 2) {
        ok = p != end && *p == ',';
        ++p;
      }
    }
    if (!ok || p != end) {
      if (warn) warn("skipping malformed line " + std::to_string(line_no) + ": " + line);
      continue;
    }
    write(classifier.push(v[0], v[1], v[2]));
  }
  write(classifier.finish());
  return emitted;
}

}  // namespace mhls
