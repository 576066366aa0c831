#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedgan/models/architecture.hpp"
#include "fedgan/models/losses.hpp"
#include "fedgan/nn/adam.hpp"

namespace fedgan::federation {

enum class Mode { centralized, standalone, distributed, federated };

std::string to_string(Mode m);
Mode parse_mode(const std::string& s);  // ConfigError naming the four modes

struct TopologySpec {
  std::size_t slices = 1;              // S
  std::size_t monitors_per_slice = 1;  // N
  // When set, raw metrics may not leave a slice, which rules out centralized mode.
  bool keep_data_in_slice = false;

  void validate() const;
  std::size_t monitor_count() const { return slices * monitors_per_slice; }
};

struct TrainingConfig {
  Mode mode = Mode::federated;
  models::Variant variant = models::Variant::biwgan_gp;  // single-node trainers only
  std::size_t iterations = 500;        // I (0 allowed: returns untrained models)
  std::size_t critic_iterations = 5;   // K
  std::size_t local_iterations = 10;   // L
  std::size_t batch_size = 64;         // M
  double penalty = 10.0;               // eta
  double clip = 0.01;                  // wgan weight clipping bound
  nn::AdamConfig adam;
  models::NoiseDistribution noise = models::NoiseDistribution::standard_normal;
  std::uint64_t seed = 1;
  std::size_t threads = 1;

  void validate() const;
};

}  // namespace fedgan::federation
