#include "fedgan/federation/config.hpp"

#include "fedgan/common/error.hpp"

namespace fedgan::federation {

std::string to_string(Mode m) {
  switch (m) {
    case Mode::centralized: return "centralized";
    case Mode::standalone: return "standalone";
    case Mode::distributed: return "distributed";
    case Mode::federated: return "federated";
  }
  return "?";
}

Mode parse_mode(const std::string& s) {
  for (Mode m : {Mode::centralized, Mode::standalone, Mode::distributed, Mode::federated}) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("unknown mode '" + s +
                    "' (valid modes: centralized, standalone, distributed, federated)");
}

void TopologySpec::validate() const {
  if (slices == 0) throw ConfigError("topology.slices must be >= 1");
  if (monitors_per_slice == 0) throw ConfigError("topology.monitors_per_slice must be >= 1");
}

void TrainingConfig::validate() const {
  if (critic_iterations == 0) throw ConfigError("training.critic_iterations must be >= 1");
  if (local_iterations == 0) throw ConfigError("training.local_iterations must be >= 1");
  if (batch_size == 0) throw ConfigError("training.batch_size must be >= 1");
  if (!(penalty >= 0.0)) throw ConfigError("training.penalty must be >= 0");
  if (!(clip > 0.0)) throw ConfigError("training.clip must be > 0");
  if (threads == 0) throw ConfigError("training.threads must be >= 1");
  adam.validate();
  if (variant != models::Variant::biwgan_gp &&
      (mode == Mode::distributed || mode == Mode::federated)) {
    throw ConfigError("variant " + models::to_string(variant) +
                      " is only available in standalone or centralized mode");
  }
}

}  // namespace fedgan::federation
