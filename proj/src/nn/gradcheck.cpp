#include "fedgan/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "fedgan/common/error.hpp"

namespace fedgan::nn {
namespace {

double checked(double v, std::size_t coordinate) {
  if (!std::isfinite(v)) {
    throw EvaluationError("finite_difference_gradient: loss is non-finite at coordinate " +
                          std::to_string(coordinate));
  }
  return v;
}

}  // namespace

ParamSet finite_difference_gradient(const ParamLoss& loss, const ParamSet& params, double h) {
  if (!(h > 0)) throw UsageError("finite difference step must be positive");
  ParamSet probe = params;
  ParamSet grads = params.zeros_like();
  std::size_t coordinate = 0;
  for (std::size_t k = 0; k < probe.size(); ++k) {
    for (std::size_t j = 0; j < probe[k].size(); ++j, ++coordinate) {
      const double saved = probe[k][j];
      probe[k][j] = saved + h;
      const double up = checked(loss(probe), coordinate);
      probe[k][j] = saved - h;
      const double down = checked(loss(probe), coordinate);
      probe[k][j] = saved;
      grads[k][j] = (up - down) / (2.0 * h);
    }
  }
  return grads;
}

Tensor finite_difference_gradient(const TensorLoss& loss, const Tensor& x, double h) {
  if (!(h > 0)) throw UsageError("finite difference step must be positive");
  Tensor probe = x;
  Tensor grads = Tensor::zeros(x.shape());
  for (std::size_t j = 0; j < probe.size(); ++j) {
    const double saved = probe[j];
    probe[j] = saved + h;
    const double up = checked(loss(probe), j);
    probe[j] = saved - h;
    const double down = checked(loss(probe), j);
    probe[j] = saved;
    grads[j] = (up - down) / (2.0 * h);
  }
  return grads;
}

double max_relative_error(const Tensor& analytic, const Tensor& numeric, double floor) {
  require_same_shape(analytic, numeric, "max_relative_error");
  double worst = 0.0;
  for (std::size_t j = 0; j < analytic.size(); ++j) {
    const double scale = std::max({std::abs(analytic[j]), std::abs(numeric[j]), floor});
    worst = std::max(worst, std::abs(analytic[j] - numeric[j]) / scale);
  }
  return worst;
}

double max_relative_error(const ParamSet& analytic, const ParamSet& numeric, double floor) {
  analytic.require_same_structure(numeric, "max_relative_error");
  double worst = 0.0;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    worst = std::max(worst, max_relative_error(analytic[k], numeric[k], floor));
  }
  return worst;
}

}  // namespace fedgan::nn
