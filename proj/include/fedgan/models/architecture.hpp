#pragma once

#include <cstdint>
#include <string>

#include "fedgan/common/tensor.hpp"
#include "fedgan/nn/network.hpp"

namespace fedgan {
class Rng;
}

namespace fedgan::models {

enum class HeadMode { critic_linear, probability_sigmoid };
enum class NoiseDistribution { standard_normal, uniform };

std::string to_string(HeadMode m);
HeadMode parse_head_mode(const std::string& s);
std::string to_string(NoiseDistribution d);
NoiseDistribution parse_noise_distribution(const std::string& s);

// Sizes shared by the generator, encoder and critics of one experiment.
struct ArchitectureConfig {
  std::size_t window = 8;     // t
  std::size_t features = 26;  // d_x
  std::size_t latent_dim = 16;
  std::size_t hidden = 24;         // VLSTM and encoder projection width
  std::size_t critic_hidden = 32;  // width of both hidden critic layers
  HeadMode critic_head = HeadMode::critic_linear;

  void validate() const;  // ConfigError on any zero size
  std::size_t data_width() const { return window * features; }
  Shape window_shape() const { return {window, features}; }
};

// z ~ P_z; reproducible from `seed`.
struct NoiseSpec {
  NoiseDistribution distribution = NoiseDistribution::standard_normal;
  std::size_t latent_dim = 16;
  std::uint64_t seed = 0;

  Tensor sample(std::size_t batch) const;
};

Tensor sample_noise(NoiseDistribution dist, std::size_t batch, std::size_t latent_dim, Rng& rng);

// Layer stacks: latent -> VLSTM -> VLSTM -> dense(linear) per step; the
// encoder is the same stack in reverse; the critic is three dense layers over
// a flattened joint pair (or a data window alone when latent_input is false).
nn::NetworkSpec generator_spec(const ArchitectureConfig& a);
nn::NetworkSpec encoder_spec(const ArchitectureConfig& a);
nn::NetworkSpec critic_spec(const ArchitectureConfig& a, bool latent_input = true);

}  // namespace fedgan::models
