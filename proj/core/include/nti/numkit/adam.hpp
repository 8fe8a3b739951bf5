#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nti/numkit/tape.hpp"

namespace nti::numkit {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First/second moment accumulators, one pair per parameter in registration order.
class AdamState {
 public:
  AdamState(std::span<Parameter* const> params, AdamConfig config = {});

  const AdamConfig& config() const { return config_; }
  std::uint64_t step() const { return step_; }
  const Tensor& first_moment(std::size_t i) const { return first_[i]; }
  const Tensor& second_moment(std::size_t i) const { return second_[i]; }
  std::size_t size() const { return first_.size(); }

 private:
  friend void adam_step(std::span<Parameter* const>, const Gradients&, AdamState&, double);

  AdamConfig config_;
  std::uint64_t step_ = 0;
  std::vector<Tensor> first_;
  std::vector<Tensor> second_;
};

// Bias-corrected Adam update in place. Parameters absent from `grads` see a zero gradient.
// Throws on shape mismatch or a non-finite gradient; nothing is modified in that case.
void adam_step(std::span<Parameter* const> params, const Gradients& grads, AdamState& state,
               double learning_rate);

}  // namespace nti::numkit
