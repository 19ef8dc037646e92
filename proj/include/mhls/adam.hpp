#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mhls/tensor.hpp"

namespace mhls {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamMoments {
  Tensor m;
  Tensor v;
};

/// Raised when a gradient handed to the optimizer is NaN or infinite.
class NonFiniteUpdate : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One bias-corrected Adam update of `param` in place. `step` counts from 1.
/// Empty moments are initialized to zero.
void adam_step(Tensor& param, const Tensor& grad, AdamMoments& moments, std::size_t step,
               const AdamConfig& cfg, std::string_view name = "parameter");

/// Adam over a fixed list of named parameters.
class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  /// Every gradient is validated before any parameter moves, so a non-finite
  /// gradient leaves all parameters untouched.
  void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
            const std::vector<std::string>& names);

  std::size_t steps_taken() const { return step_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::size_t step_ = 0;
  std::vector<AdamMoments> moments_;
};

}  // namespace mhls
