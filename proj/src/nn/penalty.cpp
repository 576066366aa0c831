#include "fedgan/nn/penalty.hpp"

#include <cmath>

#include "fedgan/common/error.hpp"
#include "kernels.hpp"

namespace fedgan::nn {

PenaltyResult gradient_penalty_backward(const Network& critic, const Tensor& points, double eta) {
  const NetworkSpec& spec = critic.spec();
  if (spec.is_sequence()) throw UsageError("gradient penalty requires a feed-forward critic");
  if (spec.output_dim() != 1) throw UsageError("gradient penalty requires a scalar critic");
  if (eta < 0) throw UsageError("penalty coefficient must be non-negative");
  if (points.shape() != spec.input_shape(points.rank() ? points.dim(0) : 0)) {
    throw DimensionError("gradient penalty points " + shape_to_string(points.shape()) +
                         " vs critic input " + shape_to_string(spec.input_shape(0)));
  }
  const std::size_t batch = points.dim(0);
  const std::size_t layers = spec.layers.size();
  const ParamSet& params = critic.params();

  std::vector<std::size_t> width(layers + 1);
  std::vector<Activation> act(layers);
  width[0] = spec.input_dim;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto& d = std::get<DenseSpec>(spec.layers[l]);
    width[l + 1] = d.units;
    act[l] = d.activation;
  }
  auto W = [&](std::size_t l) { return params[2 * l].raw(); };
  auto B = [&](std::size_t l) { return params[2 * l + 1].raw(); };

  // Forward: h[0] = x, h[l+1] = act(W_l h[l] + b_l).
  std::vector<std::vector<double>> h(layers + 1);
  h[0].assign(points.data().begin(), points.data().end());
  for (std::size_t l = 0; l < layers; ++l) {
    h[l + 1].resize(batch * width[l + 1]);
    kernels::affine(h[l].data(), batch, width[l], W(l), width[l + 1], B(l), h[l + 1].data());
    for (double& v : h[l + 1]) v = activate(act[l], v);
  }

  // First backward pass: u[L] = 1, delta_l = u[l+1] * act'(a_l), u[l] = delta_l W_l.
  std::vector<std::vector<double>> u(layers + 1), delta(layers), d1(layers), d2(layers);
  u[layers].assign(batch, 1.0);
  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t n = batch * width[l + 1];
    d1[l].resize(n);
    d2[l].resize(n);
    delta[l].resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      d1[l][j] = derivative_from_output(act[l], h[l + 1][j]);
      d2[l][j] = second_derivative_from_output(act[l], h[l + 1][j]);
      delta[l][j] = u[l + 1][j] * d1[l][j];
    }
    u[l].assign(batch * width[l], 0.0);
    kernels::accumulate_input_grad(delta[l].data(), batch, width[l + 1], W(l), width[l],
                                   u[l].data());
  }

  PenaltyResult result;
  result.per_example.resize(batch);
  result.grad_norms.resize(batch);
  result.param_grads = params.zeros_like();
  result.input_grads = Tensor({batch, spec.input_dim});
  if (batch == 0) return result;

  // Adjoint of the penalty w.r.t. g = u[0].
  const double inv_batch = 1.0 / static_cast<double>(batch);
  std::vector<double> u_bar(batch * width[0], 0.0);
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const double* g = u[0].data() + b * width[0];
    double sq = 0.0;
    for (std::size_t i = 0; i < width[0]; ++i) sq += g[i] * g[i];
    const double norm = std::sqrt(sq);
    result.grad_norms[b] = norm;
    result.per_example[b] = eta * (norm - 1.0) * (norm - 1.0);
    total += result.per_example[b];
    if (norm > 0.0) {
      const double scale = 2.0 * eta * (norm - 1.0) / norm * inv_batch;
      for (std::size_t i = 0; i < width[0]; ++i) u_bar[b * width[0] + i] = scale * g[i];
    }
  }
  result.mean = total * inv_batch;

  // Reverse through the first backward pass, from layer 0 upwards.
  std::vector<std::vector<double>> a_bar(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t n = batch * width[l + 1];
    // u[l] = delta_l W_l
    kernels::accumulate_weight_grad(delta[l].data(), batch, width[l + 1], u_bar.data(), width[l],
                                    result.param_grads[2 * l].raw(), nullptr);
    std::vector<double> delta_bar(n);
    kernels::affine(u_bar.data(), batch, width[l], W(l), width[l + 1], nullptr,
                    delta_bar.data());
    // delta_l = u[l+1] * act'(a_l)
    std::vector<double> next_u_bar(n);
    a_bar[l].resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      next_u_bar[j] = delta_bar[j] * d1[l][j];
      a_bar[l][j] = delta_bar[j] * u[l + 1][j] * d2[l][j];
    }
    u_bar = std::move(next_u_bar);
  }

  // Reverse through the forward pass; the penalty does not read h[L] directly.
  std::vector<double> h_bar(batch * width[layers], 0.0);
  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t n = batch * width[l + 1];
    std::vector<double> a_total(n);
    for (std::size_t j = 0; j < n; ++j) a_total[j] = a_bar[l][j] + h_bar[j] * d1[l][j];
    kernels::accumulate_weight_grad(a_total.data(), batch, width[l + 1], h[l].data(), width[l],
                                    result.param_grads[2 * l].raw(),
                                    result.param_grads[2 * l + 1].raw());
    h_bar.assign(batch * width[l], 0.0);
    kernels::accumulate_input_grad(a_total.data(), batch, width[l + 1], W(l), width[l],
                                   h_bar.data());
  }
  std::copy(h_bar.begin(), h_bar.end(), result.input_grads.data().begin());
  return result;
}

}  // namespace fedgan::nn
