#pragma once

#include <vector>

#include "fedgan/models/architecture.hpp"
#include "fedgan/models/joint.hpp"
#include "fedgan/nn/network.hpp"

namespace fedgan::models {

// G: [M x latent_dim] noise -> [M x t x d_x] windows.
class GeneratorModel {
 public:
  GeneratorModel(const ArchitectureConfig& arch, std::uint64_t seed);
  explicit GeneratorModel(nn::Network net);

  Tensor generate(const Tensor& z) const;
  Tensor generate(const Tensor& z, nn::Tape& tape) const;
  // Parameter gradient of <dX, G(z)> for the pass recorded in `tape`.
  nn::ParamSet backward(const nn::Tape& tape, const Tensor& dX) const;
  // Also returns dL/dz (used by latent inversion).
  nn::NetworkGradients backward_full(const nn::Tape& tape, const Tensor& dX,
                                     bool want_param_grads) const;

  std::size_t latent_dim() const { return net_.spec().input_dim; }
  Shape window_shape() const;
  const nn::Network& network() const { return net_; }
  nn::Network& network() { return net_; }

 private:
  void check() const;
  nn::Network net_;
};

// E: [M x t x d_x] windows -> [M x latent_dim] representations.
class EncoderModel {
 public:
  EncoderModel(const ArchitectureConfig& arch, std::uint64_t seed);
  explicit EncoderModel(nn::Network net);

  Tensor encode(const Tensor& x) const;
  Tensor encode(const Tensor& x, nn::Tape& tape) const;
  nn::ParamSet backward(const nn::Tape& tape, const Tensor& df) const;

  std::size_t latent_dim() const { return net_.spec().output_dim(); }
  Shape window_shape() const { return {net_.spec().steps, net_.spec().input_dim}; }
  const nn::Network& network() const { return net_; }
  nn::Network& network() { return net_; }

 private:
  void check() const;
  nn::Network net_;
};

// D: flattened joint pair (or data window) -> scalar. The head mode follows
// the activation of the final single-unit layer.
class CriticModel {
 public:
  CriticModel(const ArchitectureConfig& arch, std::uint64_t seed, bool latent_input = true);
  explicit CriticModel(nn::Network net);

  HeadMode head_mode() const { return head_; }
  std::size_t input_dim() const { return net_.spec().input_dim; }

  double discriminate(const JointPair& p) const;
  // One scalar per example.
  std::vector<double> discriminate(const JointBatch& b) const;
  std::vector<double> discriminate_flat(const Tensor& flat) const;

  const nn::Network& network() const { return net_; }
  nn::Network& network() { return net_; }

 private:
  void check_batch(const JointBatch& b) const;
  nn::Network net_;
  HeadMode head_;
};

// -log P(real) for a critic output: softplus(-d) for a linear head,
// -log(max(d, 1e-12)) for a probability head.
double confidence_loss(HeadMode head, double d);

}  // namespace fedgan::models
