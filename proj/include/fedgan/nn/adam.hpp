#pragma once

#include <cstdint>

#include "fedgan/nn/param_set.hpp"

namespace fedgan::nn {

struct AdamConfig {
  double alpha = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double epsilon = 1e-8;

  // Throws ConfigError unless 0 < alpha, 0 <= beta < 1, epsilon > 0.
  void validate() const;
};

struct AdamState {
  ParamSet first_moment;
  ParamSet second_moment;
  std::uint64_t step_count = 0;

  static AdamState for_params(const ParamSet& params);
};

// One bias-corrected Adam update in the descent direction of `grads`:
//   theta -= alpha * m_hat / (sqrt(v_hat) + epsilon)
void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state, const AdamConfig& cfg);

}  // namespace fedgan::nn
