#include "mhls/grad_check.hpp"

#include <cmath>

namespace mhls {

namespace {

double evaluate(const GraphFn& graph, const std::vector<Tensor>& inputs) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const Tensor& t : inputs) vars.push_back(tape.input(t));
  const Var out = graph(tape, vars);
  if (out.value().size() != 1) {
    throw DimensionError("grad_check: graph output must be a single element, got " +
                         out.value().shape().str());
  }
  return out.value()[0];
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / (std::abs(analytic) + std::abs(numeric) + floor);
}

GradCheckReport grad_check(const GraphFn& graph, const std::vector<Tensor>& inputs,
                           double step, double floor) {
  if (!(step >= 1e-6 && step <= 1e-4)) {
    throw std::invalid_argument("grad_check: step must lie in [1e-6, 1e-4]");
  }
  for (const Tensor& t : inputs) {
    if (!t.all_finite()) throw std::invalid_argument("grad_check: non-finite input");
  }

  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& t : inputs) vars.push_back(tape.input(t));
    const Var out = graph(tape, vars);
    tape.backward(out);
    for (Var v : vars) analytic.push_back(tape.grad(v));
  }

  GradCheckReport report;
  std::vector<Tensor> probe = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double original = inputs[k][i];
      probe[k][i] = original + step;
      const double up = evaluate(graph, probe);
      probe[k][i] = original - step;
      const double down = evaluate(graph, probe);
      probe[k][i] = original;

      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[k][i];
      const double rel = relative_error(a, numeric, floor);
      ++report.elements_checked;
      if (rel > report.max_rel_error || !std::isfinite(rel)) {
        report.max_rel_error = std::isfinite(rel) ? rel : INFINITY;
        report.worst_input = k;
        report.worst_element = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace mhls
