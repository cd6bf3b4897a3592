#include "dhsense/optim.hpp"

#include <cmath>

#include "dhsense/error.hpp"

namespace dhsense {

void nadam_update(double* param, const double* grad, std::size_t n, NadamSlot& slot, const NadamOptions& o,
                  const std::string& name) {
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(grad[i])) {
      throw NumericalError("non-finite gradient in parameter '" + name + "' at index " + std::to_string(i));
    }
  }
  if (slot.m.size() != n) {
    slot.m.assign(n, 0.0);
    slot.v.assign(n, 0.0);
  }
  const double t = static_cast<double>(++slot.step);
  const double mu = o.beta1 * (1.0 - 0.5 * std::pow(0.96, t * o.momentum_decay));
  const double mu_next = o.beta1 * (1.0 - 0.5 * std::pow(0.96, (t + 1.0) * o.momentum_decay));
  slot.mu_product *= mu;
  const double bias2 = 1.0 - std::pow(o.beta2, t);
  const double c_grad = o.learning_rate * (1.0 - mu) / (1.0 - slot.mu_product);
  const double c_mom = o.learning_rate * mu_next / (1.0 - slot.mu_product * mu_next);
  for (std::size_t i = 0; i < n; ++i) {
    slot.m[i] = o.beta1 * slot.m[i] + (1.0 - o.beta1) * grad[i];
    slot.v[i] = o.beta2 * slot.v[i] + (1.0 - o.beta2) * grad[i] * grad[i];
    const double denom = std::sqrt(slot.v[i] / bias2) + o.eps;
    param[i] -= c_grad * grad[i] / denom + c_mom * slot.m[i] / denom;
  }
}

Nadam::Nadam(std::vector<Var> params, NadamOptions opts)
    : params_(std::move(params)), slots_(params_.size()), opts_(opts) {}

void Nadam::step() {
  std::vector<double> zeros;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& value = params_[i].value();
    const double* g = nullptr;
    if (value.grad) {
      g = value.grad->data();
    } else {
      zeros.assign(value.size(), 0.0);
      g = zeros.data();
    }
    nadam_update(value.data.data(), g, value.size(), slots_[i], opts_, params_[i].name());
  }
}

void Nadam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace dhsense
