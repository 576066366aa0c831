#pragma once

#include <cmath>
#include <string>
#include <string_view>

namespace fedgan::nn {

// All three are twice differentiable, which the gradient penalty requires.
enum class Activation { linear, sigmoid, tanh };

std::string to_string(Activation a);
Activation parse_activation(std::string_view name);

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double activate(Activation a, double x) {
  switch (a) {
    case Activation::sigmoid: return sigmoid(x);
    case Activation::tanh: return std::tanh(x);
    case Activation::linear: break;
  }
  return x;
}

// First and second derivatives expressed through the activation output y.
inline double derivative_from_output(Activation a, double y) {
  switch (a) {
    case Activation::sigmoid: return y * (1.0 - y);
    case Activation::tanh: return 1.0 - y * y;
    case Activation::linear: break;
  }
  return 1.0;
}

inline double second_derivative_from_output(Activation a, double y) {
  switch (a) {
    case Activation::sigmoid: return y * (1.0 - y) * (1.0 - 2.0 * y);
    case Activation::tanh: return -2.0 * y * (1.0 - y * y);
    case Activation::linear: break;
  }
  return 0.0;
}

}  // namespace fedgan::nn
