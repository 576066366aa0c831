#include "fedgan/nn/adam.hpp"

#include <cmath>

#include "fedgan/common/error.hpp"

namespace fedgan::nn {

void AdamConfig::validate() const {
  if (!(alpha > 0)) throw ConfigError("adam alpha must be > 0");
  if (!(beta1 >= 0 && beta1 < 1)) throw ConfigError("adam beta1 must lie in [0, 1)");
  if (!(beta2 >= 0 && beta2 < 1)) throw ConfigError("adam beta2 must lie in [0, 1)");
  if (!(epsilon > 0)) throw ConfigError("adam epsilon must be > 0");
}

AdamState AdamState::for_params(const ParamSet& params) {
  return {params.zeros_like(), params.zeros_like(), 0};
}

void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state, const AdamConfig& cfg) {
  params.require_same_structure(grads, "adam_step gradients");
  params.require_same_structure(state.first_moment, "adam_step first moment");
  params.require_same_structure(state.second_moment, "adam_step second moment");

  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    double* theta = params[k].raw();
    const double* g = grads[k].raw();
    double* m = state.first_moment[k].raw();
    double* v = state.second_moment[k].raw();
    for (std::size_t j = 0; j < params[k].size(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      theta[j] -= cfg.alpha * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

}  // namespace fedgan::nn
