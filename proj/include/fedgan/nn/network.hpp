#pragma once

#include <cstdint>
#include <memory>
#include <variant>
#include <vector>

#include "fedgan/common/tensor.hpp"
#include "fedgan/nn/activation.hpp"
#include "fedgan/nn/dense.hpp"
#include "fedgan/nn/param_set.hpp"
#include "fedgan/nn/vlstm.hpp"

namespace fedgan::nn {

struct DenseSpec {
  std::size_t units = 0;
  Activation activation = Activation::linear;
};

struct VlstmSpec {
  std::size_t units = 0;
};

using LayerSpec = std::variant<DenseSpec, VlstmSpec>;

// A stack of layers. With steps == 0 the network is feed-forward on
// [batch x input_dim]. With steps > 0 every layer runs once per time step
// (dense layers are shared across steps); the input is either a sequence
// [batch x steps x input_dim] or, with repeat_input, a vector fed at every
// step. Output is the full sequence or, with last_step_only, the final step.
struct NetworkSpec {
  std::size_t input_dim = 0;
  std::size_t steps = 0;
  bool repeat_input = false;
  bool last_step_only = false;
  std::vector<LayerSpec> layers;

  // Throws ConfigError for an incompatible layer chain.
  void validate() const;
  std::size_t output_dim() const;
  bool is_sequence() const { return steps > 0; }
  Shape input_shape(std::size_t batch) const;
  Shape output_shape(std::size_t batch) const;
};

class Network;

// Intermediate values of one forward pass; only valid for the network (and
// parameter version) that produced it.
class Tape {
 public:
  std::size_t batch() const { return batch_; }

 private:
  friend class Network;
  struct DenseStep {
    std::vector<double> input;
    std::vector<double> output;
  };
  struct LayerRecord {
    std::vector<DenseStep> dense;         // one per step
    std::vector<VlstmStepCache> vlstm;    // one per step
  };
  std::uint64_t owner_id_ = 0;
  std::uint64_t version_ = 0;
  std::size_t batch_ = 0;
  std::vector<LayerRecord> layers_;
};

struct NetworkGradients {
  ParamSet params;
  Tensor input;
};

class Network {
 public:
  // Seeded uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization.
  Network(NetworkSpec spec, std::uint64_t seed);
  Network(NetworkSpec spec, ParamSet params);

  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  const NetworkSpec& spec() const { return spec_; }
  const ParamSet& params() const { return params_; }
  // Any mutation invalidates outstanding tapes.
  ParamSet& mutable_params();
  void set_params(const ParamSet& params);
  std::size_t parameter_count() const { return params_.scalar_count(); }

  Tensor forward(const Tensor& input) const;
  Tensor forward(const Tensor& input, Tape& tape) const;
  NetworkGradients backward(const Tape& tape, const Tensor& output_gradient,
                            bool want_param_grads = true) const;

  // Parameter views for layer k; valid until the next mutation.
  DenseLayerParams dense_layer(std::size_t k) const;
  VlstmParams vlstm_layer(std::size_t k) const;
  std::size_t layer_input_dim(std::size_t k) const;

 private:
  static std::uint64_t next_id();
  void build_views();
  Tensor run(const Tensor& input, Tape* tape) const;

  NetworkSpec spec_;
  ParamSet params_;
  std::vector<std::size_t> first_param_;  // index into params_ per layer
  std::uint64_t id_;
  std::uint64_t version_ = 0;
};

ParamSet make_layer_params(const NetworkSpec& spec);

}  // namespace fedgan::nn
