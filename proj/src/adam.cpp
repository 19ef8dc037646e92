#include "mhls/adam.hpp"

#include <cmath>

namespace mhls {

namespace {

void require_finite(const Tensor& grad, std::string_view name) {
  if (!grad.all_finite()) {
    throw NonFiniteUpdate("non-finite gradient for " + std::string(name));
  }
}

}  // namespace

void adam_step(Tensor& param, const Tensor& grad, AdamMoments& moments, std::size_t step,
               const AdamConfig& cfg, std::string_view name) {
  require_same_shape("adam_step", param.shape(), grad.shape());
  if (step == 0) throw std::invalid_argument("adam_step: step index starts at 1");
  require_finite(grad, name);
  if (moments.m.empty()) moments.m = Tensor(param.shape());
  if (moments.v.empty()) moments.v = Tensor(param.shape());

  const double t = static_cast<double>(step);
  const double m_correction = 1.0 - std::pow(cfg.beta1, t);
  const double v_correction = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    moments.m[i] = cfg.beta1 * moments.m[i] + (1.0 - cfg.beta1) * g;
    moments.v[i] = cfg.beta2 * moments.v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = moments.m[i] / m_correction;
    const double v_hat = moments.v[i] / v_correction;
    param[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

void Adam::step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
                const std::vector<std::string>& names) {
  if (params.size() != grads.size() || params.size() != names.size()) {
    throw std::invalid_argument("Adam::step: parameter, gradient and name counts differ");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) require_finite(grads[i], names[i]);
  if (moments_.empty()) moments_.resize(params.size());
  ++step_;
  for (std::size_t i = 0; i < params.size(); ++i) {
    adam_step(*params[i], grads[i], moments_[i], step_, cfg_, names[i]);
  }
}

}  // namespace mhls
