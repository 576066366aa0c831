#include "fedgan/models/architecture.hpp"

#include "fedgan/common/error.hpp"
#include "fedgan/common/rng.hpp"

namespace fedgan::models {

std::string to_string(HeadMode m) {
  return m == HeadMode::critic_linear ? "linear" : "sigmoid";
}

HeadMode parse_head_mode(const std::string& s) {
  if (s == "linear" || s == "critic-linear") return HeadMode::critic_linear;
  if (s == "sigmoid" || s == "probability-sigmoid") return HeadMode::probability_sigmoid;
  throw ConfigError("unknown critic head '" + s + "' (expected linear or sigmoid)");
}

std::string to_string(NoiseDistribution d) {
  return d == NoiseDistribution::standard_normal ? "normal" : "uniform";
}

NoiseDistribution parse_noise_distribution(const std::string& s) {
  if (s == "normal" || s == "standard_normal") return NoiseDistribution::standard_normal;
  if (s == "uniform") return NoiseDistribution::uniform;
  throw ConfigError("unknown noise distribution '" + s + "' (expected normal or uniform)");
}

void ArchitectureConfig::validate() const {
  if (window == 0) throw ConfigError("model.window must be >= 1");
  if (features == 0) throw ConfigError("model.features must be >= 1");
  if (latent_dim == 0) throw ConfigError("model.latent_dim must be >= 1");
  if (hidden == 0) throw ConfigError("model.hidden must be >= 1");
  if (critic_hidden == 0) throw ConfigError("model.critic_hidden must be >= 1");
}

Tensor sample_noise(NoiseDistribution dist, std::size_t batch, std::size_t latent_dim,
                    Rng& rng) {
  Tensor z({batch, latent_dim});
  for (double& v : z.data()) {
    v = dist == NoiseDistribution::standard_normal ? rng.normal() : rng.uniform(-1.0, 1.0);
  }
  return z;
}

Tensor NoiseSpec::sample(std::size_t batch) const {
  Rng rng(seed);
  return sample_noise(distribution, batch, latent_dim, rng);
}

nn::NetworkSpec generator_spec(const ArchitectureConfig& a) {
  a.validate();
  nn::NetworkSpec s;
  s.input_dim = a.latent_dim;
  s.steps = a.window;
  s.repeat_input = true;
  s.layers = {nn::VlstmSpec{a.hidden}, nn::VlstmSpec{a.hidden},
              nn::DenseSpec{a.features, nn::Activation::linear}};
  return s;
}

nn::NetworkSpec encoder_spec(const ArchitectureConfig& a) {
  a.validate();
  nn::NetworkSpec s;
  s.input_dim = a.features;
  s.steps = a.window;
  s.last_step_only = true;
  s.layers = {nn::DenseSpec{a.hidden, nn::Activation::linear}, nn::VlstmSpec{a.hidden},
              nn::VlstmSpec{a.latent_dim}};
  return s;
}

nn::NetworkSpec critic_spec(const ArchitectureConfig& a, bool latent_input) {
  a.validate();
  nn::NetworkSpec s;
  s.input_dim = a.data_width() + (latent_input ? a.latent_dim : 0);
  const auto head = a.critic_head == HeadMode::critic_linear ? nn::Activation::linear
                                                             : nn::Activation::sigmoid;
  s.layers = {nn::DenseSpec{a.critic_hidden, nn::Activation::tanh},
              nn::DenseSpec{a.critic_hidden, nn::Activation::tanh}, nn::DenseSpec{1, head}};
  return s;
}

}  // namespace fedgan::models
