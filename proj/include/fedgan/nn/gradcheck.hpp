#pragma once

#include <functional>

#include "fedgan/common/tensor.hpp"
#include "fedgan/nn/param_set.hpp"

namespace fedgan::nn {

using ParamLoss = std::function<double(const ParamSet&)>;
using TensorLoss = std::function<double(const Tensor&)>;

// Central differences (L(theta + h e_i) - L(theta - h e_i)) / 2h per coordinate.
// A non-finite loss evaluation throws EvaluationError.
ParamSet finite_difference_gradient(const ParamLoss& loss, const ParamSet& params, double h);
Tensor finite_difference_gradient(const TensorLoss& loss, const Tensor& x, double h);

// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor)
double max_relative_error(const Tensor& analytic, const Tensor& numeric, double floor = 1e-6);
double max_relative_error(const ParamSet& analytic, const ParamSet& numeric,
                          double floor = 1e-6);

}  // namespace fedgan::nn
