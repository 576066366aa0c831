#pragma once

#include "fedgan/common/tensor.hpp"
#include "fedgan/nn/activation.hpp"

namespace fedgan::nn {

struct DenseLayerParams {
  Tensor weights;  // [out x in]
  Tensor bias;     // [out]
  Activation activation = Activation::linear;

  std::size_t input_dim() const { return weights.dim(1); }
  std::size_t output_dim() const { return weights.dim(0); }
  void validate() const;
};

// activation(weights . x + bias) for x of shape [in] or [batch x in].
Tensor dense_apply(const Tensor& x, const DenseLayerParams& p);

}  // namespace fedgan::nn
