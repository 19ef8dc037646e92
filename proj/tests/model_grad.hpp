#pragma once

// Central-difference check of the full sequence loss against the tape
// gradient of every model parameter.

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mhls/grad_check.hpp"
#include "mhls/model.hpp"

namespace oracle {

struct ModelGradReport {
  double max_rel_error = 0.0;
  std::size_t elements = 0;
  std::string worst_param;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Floor for multi-operation graphs, where central-difference rounding noise is
/// about 1e-11 and some gradients are near 1e-9.
inline constexpr double kCompositeGradFloor = 1e-6;

inline ModelGradReport model_grad_check(mhls::SequenceModel model,
                                        std::span<const mhls::Tensor> xs, std::size_t label,
                                        double epsilon, double step = 1e-5) {
  mhls::Tape tape;
  const auto probs = model.forward(tape, xs);
  tape.backward(mhls::sequence_loss(probs, label, epsilon));
  std::map<const mhls::Tensor*, mhls::Tensor> analytic;
  tape.for_each_param_grad(
      [&analytic](const mhls::Tensor& p, const mhls::Tensor& g) { analytic.emplace(&p, g); });

  auto loss = [&] { return mhls::sequence_loss(model.forward_sequence(xs), label, epsilon); };
  ModelGradReport report;
  model.for_each([&](const std::string& name, mhls::Tensor& t, mhls::ParamRole) {
    const auto it = analytic.find(&t);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double saved = t[i];
      t[i] = saved + step;
      const double up = loss();
      t[i] = saved - step;
      const double down = loss();
      t[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = it == analytic.end() ? 0.0 : it->second[i];
      const double err = mhls::relative_error(a, numeric, kCompositeGradFloor);
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_param = name;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
      ++report.elements;
    }
  });
  return report;
}

}  // namespace oracle
