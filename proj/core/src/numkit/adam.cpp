#include "nti/numkit/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace nti::numkit {

AdamState::AdamState(std::span<Parameter* const> params, AdamConfig config) : config_(config) {
  first_.reserve(params.size());
  second_.reserve(params.size());
  for (const Parameter* p : params) {
    first_.emplace_back(p->value.shape(), 0.0);
    second_.emplace_back(p->value.shape(), 0.0);
  }
}

void adam_step(std::span<Parameter* const> params, const Gradients& grads, AdamState& state,
               double learning_rate) {
  if (params.size() != state.first_.size()) {
    throw std::invalid_argument("adam: parameter count does not match optimizer state");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = *params[i];
    if (p.value.shape() != state.first_[i].shape()) {
      throw std::invalid_argument("adam: shape mismatch for parameter '" + p.name + "'");
    }
    if (!grads.contains(p)) continue;
    const Tensor& g = grads.of(p);
    if (g.shape() != p.value.shape()) {
      throw std::invalid_argument("adam: gradient shape mismatch for parameter '" + p.name + "'");
    }
    if (!g.all_finite()) {
      throw std::domain_error("adam: non-finite gradient for parameter '" + p.name + "'");
    }
  }

  const AdamConfig& c = state.config_;
  ++state.step_;
  const double t = static_cast<double>(state.step_);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    Tensor& m = state.first_[i];
    Tensor& v = state.second_[i];
    const Tensor* g = grads.contains(p) ? &grads.of(p) : nullptr;
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double gj = g != nullptr ? (*g)[j] : 0.0;
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * gj;
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * gj * gj;
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      p.value[j] -= learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

}  // namespace nti::numkit
