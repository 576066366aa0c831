#pragma once

#include <span>
#include <string>

#include "fedgan/models/models.hpp"
#include "fedgan/nn/param_set.hpp"

namespace fedgan::models {

struct CriticLossResult {
  double loss = 0.0;         // mean_m [-(D(real) - D(fake)) + eta * GP]
  double wasserstein = 0.0;  // mean D(real) - mean D(fake)
  double penalty = 0.0;      // mean eta * (||grad D(x_hat)|| - 1)^2
  nn::ParamSet param_grads;  // d loss / d theta_D
  Tensor real_grad;          // d loss / d flattened real pairs  [M x P]
  Tensor fake_grad;          // d loss / d flattened fake pairs  [M x P]
};

// Penalized critic loss over M real/fake pairs, one interpolation eps per
// example. Throws UsageError for M == 0, eta < 0 or eps outside [0, 1].
CriticLossResult critic_loss(const CriticModel& D, const JointBatch& real,
                             const JointBatch& fake, std::span<const double> eps, double eta);

// mean_m D(real_m) - mean_m D(fake_m)
double eg_local_loss(const CriticModel& D, const JointBatch& real, const JointBatch& fake);

// e_m = d L_EG / d(real pair m), g_m = d L_EG / d(fake pair m); both carry
// the 1/M of the batch mean.
struct Feedbacks {
  JointBatch e;
  JointBatch g;
  double eg_loss = 0.0;
};

Feedbacks error_feedbacks(const CriticModel& D, const JointBatch& real, const JointBatch& fake);

// Model families compared in the detection experiments.
enum class Variant { gan, bigan, wgan, wgan_gp, biwgan_gp };

std::string to_string(Variant v);
Variant parse_variant(const std::string& s);
bool has_encoder(Variant v);       // bigan, biwgan_gp
bool uses_joint_pairs(Variant v);  // same set: the critic sees (x, z)
HeadMode default_head(Variant v);  // sigmoid for gan/bigan, linear otherwise

struct AdversarialLoss {
  double objective = 0.0;   // value of the variant's minimax objective
  double d_loss = 0.0;      // minimized by the critic
  double ge_loss = 0.0;     // minimized by the generator (and encoder)
  nn::ParamSet d_grads;     // d d_loss / d theta_D
  Tensor ge_real_grad;      // d ge_loss / d flattened real pairs
  Tensor ge_fake_grad;      // d ge_loss / d flattened fake pairs
};

// Objectives per variant (logs clamped at 1e-12):
//   gan       V = mean log D(x) + mean log(1 - D(G(z)));  d_loss = -V, ge_loss = mean log(1 - D(G(z)))
//   bigan     V = mean log D(x, E(x)) + mean log(1 - D(G(z), z));  d_loss = -V, ge_loss = V
//   wgan      W = mean D(x) - mean D(G(z));  d_loss = -W, ge_loss = -mean D(G(z))
//   wgan_gp   as wgan with + eta * GP in d_loss (data-space interpolates)
//   biwgan_gp as wgan_gp on joint pairs, ge_loss = W
AdversarialLoss adversarial_loss(Variant v, const CriticModel& D, const JointBatch& real,
                                 const JointBatch& fake, std::span<const double> eps,
                                 double eta);

// Clamps every critic weight and bias into [-c, c].
void clip_weights(CriticModel& D, double c);

}  // namespace fedgan::models
