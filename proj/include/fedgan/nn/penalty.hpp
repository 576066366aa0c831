#pragma once

#include <vector>

#include "fedgan/common/tensor.hpp"
#include "fedgan/nn/network.hpp"
#include "fedgan/nn/param_set.hpp"

namespace fedgan::nn {

struct PenaltyResult {
  std::vector<double> per_example;  // eta * (||grad_x D(x_b)||_2 - 1)^2
  std::vector<double> grad_norms;   // ||grad_x D(x_b)||_2
  double mean = 0.0;
  ParamSet param_grads;  // d(mean)/d(critic parameters)
  Tensor input_grads;    // d(mean)/d(points)
};

// Gradient penalty of a feed-forward scalar critic at the rows of `points`
// ([batch x input_dim]), differentiated by reverse mode through the critic's
// own backward pass. At ||g|| == 0 the norm's derivative is taken as 0.
PenaltyResult gradient_penalty_backward(const Network& critic, const Tensor& points, double eta);

}  // namespace fedgan::nn
