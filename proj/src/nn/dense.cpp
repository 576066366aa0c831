#include "fedgan/nn/dense.hpp"

#include "fedgan/common/error.hpp"
#include "kernels.hpp"

namespace fedgan::nn {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
    case Activation::linear: break;
  }
  return "linear";
}

Activation parse_activation(std::string_view name) {
  if (name == "linear") return Activation::linear;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + std::string(name) +
                    "' (expected linear, sigmoid or tanh)");
}

void DenseLayerParams::validate() const {
  if (weights.rank() != 2) {
    throw DimensionError("dense weights must be [out x in], got " +
                         shape_to_string(weights.shape()));
  }
  if (bias.shape() != Shape{weights.dim(0)}) {
    throw DimensionError("dense bias " + shape_to_string(bias.shape()) +
                         " does not match weights " + shape_to_string(weights.shape()));
  }
}

Tensor dense_apply(const Tensor& x, const DenseLayerParams& p) {
  p.validate();
  const bool single = x.rank() == 1;
  if (x.rank() > 2 || x.shape().back() != p.input_dim()) {
    throw DimensionError("dense_apply: input " + shape_to_string(x.shape()) +
                         " incompatible with weights " + shape_to_string(p.weights.shape()));
  }
  const std::size_t rows = single ? 1 : x.dim(0);
  Tensor y = single ? Tensor({p.output_dim()}) : Tensor({rows, p.output_dim()});
  kernels::affine(x.raw(), rows, p.input_dim(), p.weights.raw(), p.output_dim(), p.bias.raw(),
                  y.raw());
  for (double& v : y.data()) v = activate(p.activation, v);
  return y;
}

}  // namespace fedgan::nn
