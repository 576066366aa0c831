#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fedgan::models {

// One analytic-versus-finite-difference comparison.
struct OracleCheck {
  std::string family;  // network, penalty, critic_loss, eg_feedbacks, or a variant name
  std::size_t trial = 0;
  std::string target;  // which gradient was compared, e.g. "params" or "real"
  double error = 0.0;  // max relative error
  double tolerance = 1e-4;

  bool passed() const { return error < tolerance; }
};

// Runs `trials` random small configurations of every differentiable piece:
// dense/VLSTM networks, the gradient penalty, the penalized critic loss, the
// error feedbacks and the five adversarial objectives. Central differences
// use h = 1e-5.
std::vector<OracleCheck> run_oracle_suite(std::size_t trials, std::uint64_t seed);

}  // namespace fedgan::models
