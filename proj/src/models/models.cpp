#include "fedgan/models/models.hpp"

#include <algorithm>
#include <cmath>

#include "fedgan/common/error.hpp"

namespace fedgan::models {

GeneratorModel::GeneratorModel(const ArchitectureConfig& arch, std::uint64_t seed)
    : net_(generator_spec(arch), seed) {}

GeneratorModel::GeneratorModel(nn::Network net) : net_(std::move(net)) { check(); }

void GeneratorModel::check() const {
  const auto& s = net_.spec();
  if (!s.is_sequence() || !s.repeat_input || s.last_step_only) {
    throw ConfigError("generator network must map a vector to a full sequence");
  }
}

Shape GeneratorModel::window_shape() const {
  return {net_.spec().steps, net_.spec().output_dim()};
}

Tensor GeneratorModel::generate(const Tensor& z) const { return net_.forward(z); }

Tensor GeneratorModel::generate(const Tensor& z, nn::Tape& tape) const {
  return net_.forward(z, tape);
}

nn::ParamSet GeneratorModel::backward(const nn::Tape& tape, const Tensor& dX) const {
  return net_.backward(tape, dX, true).params;
}

nn::NetworkGradients GeneratorModel::backward_full(const nn::Tape& tape, const Tensor& dX,
                                                   bool want_param_grads) const {
  return net_.backward(tape, dX, want_param_grads);
}

EncoderModel::EncoderModel(const ArchitectureConfig& arch, std::uint64_t seed)
    : net_(encoder_spec(arch), seed) {}

EncoderModel::EncoderModel(nn::Network net) : net_(std::move(net)) { check(); }

void EncoderModel::check() const {
  const auto& s = net_.spec();
  if (!s.is_sequence() || s.repeat_input || !s.last_step_only) {
    throw ConfigError("encoder network must map a sequence to its last-step vector");
  }
}

Tensor EncoderModel::encode(const Tensor& x) const { return net_.forward(x); }

Tensor EncoderModel::encode(const Tensor& x, nn::Tape& tape) const {
  return net_.forward(x, tape);
}

nn::ParamSet EncoderModel::backward(const nn::Tape& tape, const Tensor& df) const {
  return net_.backward(tape, df, true).params;
}

CriticModel::CriticModel(const ArchitectureConfig& arch, std::uint64_t seed, bool latent_input)
    : CriticModel(nn::Network(critic_spec(arch, latent_input), seed)) {}

CriticModel::CriticModel(nn::Network net) : net_(std::move(net)) {
  const auto& s = net_.spec();
  if (s.is_sequence()) throw ConfigError("critic must be a feed-forward network");
  const auto* head = std::get_if<nn::DenseSpec>(&s.layers.back());
  if (head == nullptr || head->units != 1) {
    throw ConfigError("critic must end in a single-unit dense layer");
  }
  if (head->activation == nn::Activation::linear) {
    head_ = HeadMode::critic_linear;
  } else if (head->activation == nn::Activation::sigmoid) {
    head_ = HeadMode::probability_sigmoid;
  } else {
    throw ConfigError("critic head must be linear or sigmoid");
  }
}

void CriticModel::check_batch(const JointBatch& b) const {
  if (b.pair_width() != input_dim()) {
    throw DimensionError("critic expects pairs of width " + std::to_string(input_dim()) +
                         ", got data " + shape_to_string(b.data.shape()) + " + latent " +
                         shape_to_string(b.latent.shape()));
  }
}

double CriticModel::discriminate(const JointPair& p) const {
  Tensor d = p.data_part.reshaped({1, p.data_part.size()});
  Tensor l = p.latent_part.reshaped({1, p.latent_part.size()});
  return discriminate(JointBatch(d, l, p.provenance)).front();
}

std::vector<double> CriticModel::discriminate(const JointBatch& b) const {
  check_batch(b);
  return discriminate_flat(b.flatten());
}

std::vector<double> CriticModel::discriminate_flat(const Tensor& flat) const {
  Tensor out = net_.forward(flat);
  return out.values();
}

double confidence_loss(HeadMode head, double d) {
  if (head == HeadMode::critic_linear) return nn::softplus(-d);
  return -std::log(std::max(d, 1e-12));
}

}  // namespace fedgan::models
