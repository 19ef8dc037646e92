#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mhls/autograd.hpp"

namespace mhls {

/// A scalar-valued graph over the given inputs, rebuilt on every evaluation.
using GraphFn = std::function<Var(Tape&, std::span<const Var>)>;

inline constexpr double kGradFloor = 1e-8;

/// |a - n| / (|a| + |n| + floor).
double relative_error(double analytic, double numeric, double floor = kGradFloor);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_element = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t elements_checked = 0;

  bool passed(double tol) const { return max_rel_error <= tol; }
};

/// Compares reverse-mode gradients against central finite differences
/// (f(x+s) - f(x-s)) / 2s for every element of every input, scored with
/// relative_error with the given floor.
///
/// Throws std::invalid_argument for a step outside [1e-6, 1e-4] or non-finite
/// inputs, and NonFiniteGradient when the analytic gradient is not finite.
GradCheckReport grad_check(const GraphFn& graph, const std::vector<Tensor>& inputs,
                           double step = 1e-5, double floor = kGradFloor);

}  // namespace mhls
