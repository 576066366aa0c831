#include "fedgan/models/losses.hpp"

#include <algorithm>
#include <cmath>

#include "fedgan/common/error.hpp"
#include "fedgan/nn/penalty.hpp"

namespace fedgan::models {
namespace {

constexpr double kLogFloor = 1e-12;

void require_batches(const CriticModel& D, const JointBatch& real, const JointBatch& fake,
                     const char* what) {
  if (real.size() == 0) throw UsageError(std::string(what) + ": empty batch (M = 0)");
  require_same_shape(real.data, fake.data, what);
  require_same_shape(real.latent, fake.latent, what);
  if (real.pair_width() != D.input_dim()) {
    throw DimensionError(std::string(what) + ": critic input width " +
                         std::to_string(D.input_dim()) + " does not match pair width " +
                         std::to_string(real.pair_width()));
  }
}

// Forward pass over [real; fake] stacked into one batch.
struct StackedPass {
  Tensor flat_real, flat_fake;
  nn::Tape tape;
  std::vector<double> d_real, d_fake;
};

StackedPass stacked_forward(const CriticModel& D, const JointBatch& real,
                            const JointBatch& fake) {
  StackedPass s;
  s.flat_real = real.flatten();
  s.flat_fake = fake.flatten();
  const Tensor parts[] = {s.flat_real, s.flat_fake};
  Tensor out = D.network().forward(concat_rows(parts), s.tape);
  const std::size_t M = real.size();
  s.d_real.assign(out.raw(), out.raw() + M);
  s.d_fake.assign(out.raw() + M, out.raw() + 2 * M);
  return s;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Backward of the stacked pass with per-output adjoints; splits input grads.
nn::NetworkGradients stacked_backward(const CriticModel& D, const StackedPass& s,
                                      const std::vector<double>& adj_real,
                                      const std::vector<double>& adj_fake, bool want_params) {
  const std::size_t M = adj_real.size();
  Tensor adj({2 * M, 1});
  std::copy(adj_real.begin(), adj_real.end(), adj.raw());
  std::copy(adj_fake.begin(), adj_fake.end(), adj.raw() + M);
  return D.network().backward(s.tape, adj, want_params);
}

double safe_log(double x) { return std::log(std::max(x, kLogFloor)); }
double safe_log_deriv(double x) { return x > kLogFloor ? 1.0 / x : 0.0; }

void require_eps(std::span<const double> eps, std::size_t M) {
  if (eps.size() != M) {
    throw DimensionError("need one eps per example: got " + std::to_string(eps.size()) +
                         " for M = " + std::to_string(M));
  }
  for (double e : eps) {
    if (!(e >= 0.0 && e <= 1.0)) throw UsageError("eps must lie in [0, 1]");
  }
}

Tensor interpolate_flat(const Tensor& r, const Tensor& f, std::span<const double> eps) {
  Tensor out(r.shape());
  const std::size_t P = r.row_size();
  for (std::size_t m = 0; m < eps.size(); ++m) {
    for (std::size_t j = 0; j < P; ++j) {
      const std::size_t k = m * P + j;
      out[k] = eps[m] * r[k] + (1.0 - eps[m]) * f[k];
    }
  }
  return out;
}

}  // namespace

CriticLossResult critic_loss(const CriticModel& D, const JointBatch& real,
                             const JointBatch& fake, std::span<const double> eps, double eta) {
  require_batches(D, real, fake, "critic_loss");
  if (!(eta >= 0.0)) throw UsageError("critic_loss: eta must be >= 0");
  const std::size_t M = real.size();
  require_eps(eps, M);

  StackedPass s = stacked_forward(D, real, fake);
  const double inv_m = 1.0 / static_cast<double>(M);
  auto g = stacked_backward(D, s, std::vector<double>(M, -inv_m), std::vector<double>(M, inv_m),
                            true);

  Tensor x_hat = interpolate_flat(s.flat_real, s.flat_fake, eps);
  nn::PenaltyResult pen = nn::gradient_penalty_backward(D.network(), x_hat, eta);

  CriticLossResult r;
  r.wasserstein = mean(s.d_real) - mean(s.d_fake);
  r.penalty = pen.mean;
  r.loss = -r.wasserstein + pen.mean;
  if (!std::isfinite(r.loss)) throw EvaluationError("critic_loss is non-finite");
  r.param_grads = std::move(g.params);
  r.param_grads.add_scaled(pen.param_grads, 1.0);

  const std::size_t P = real.pair_width();
  r.real_grad = g.input.slice_rows(0, M);
  r.fake_grad = g.input.slice_rows(M, 2 * M);
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t j = 0; j < P; ++j) {
      const double gp = pen.input_grads[m * P + j];
      r.real_grad[m * P + j] += eps[m] * gp;
      r.fake_grad[m * P + j] += (1.0 - eps[m]) * gp;
    }
  }
  return r;
}

double eg_local_loss(const CriticModel& D, const JointBatch& real, const JointBatch& fake) {
  require_batches(D, real, fake, "eg_local_loss");
  return mean(D.discriminate(real)) - mean(D.discriminate(fake));
}

Feedbacks error_feedbacks(const CriticModel& D, const JointBatch& real, const JointBatch& fake) {
  require_batches(D, real, fake, "error_feedbacks");
  const std::size_t M = real.size();
  StackedPass s = stacked_forward(D, real, fake);
  const double inv_m = 1.0 / static_cast<double>(M);
  auto g = stacked_backward(D, s, std::vector<double>(M, inv_m), std::vector<double>(M, -inv_m),
                            false);
  const Shape row_shape(real.data.shape().begin() + 1, real.data.shape().end());
  const std::size_t k = real.latent_width();
  return {JointBatch::unflatten(g.input.slice_rows(0, M), row_shape, k, Provenance::real),
          JointBatch::unflatten(g.input.slice_rows(M, 2 * M), row_shape, k, Provenance::fake),
          mean(s.d_real) - mean(s.d_fake)};
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::gan: return "gan";
    case Variant::bigan: return "bigan";
    case Variant::wgan: return "wgan";
    case Variant::wgan_gp: return "wgan_gp";
    case Variant::biwgan_gp: return "biwgan_gp";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  for (Variant v : {Variant::gan, Variant::bigan, Variant::wgan, Variant::wgan_gp,
                    Variant::biwgan_gp}) {
    if (to_string(v) == s) return v;
  }
  throw ConfigError("unknown variant '" + s +
                    "' (expected gan, bigan, wgan, wgan_gp or biwgan_gp)");
}

bool has_encoder(Variant v) { return v == Variant::bigan || v == Variant::biwgan_gp; }
bool uses_joint_pairs(Variant v) { return has_encoder(v); }

HeadMode default_head(Variant v) {
  return v == Variant::gan || v == Variant::bigan ? HeadMode::probability_sigmoid
                                                  : HeadMode::critic_linear;
}

AdversarialLoss adversarial_loss(Variant v, const CriticModel& D, const JointBatch& real,
                                 const JointBatch& fake, std::span<const double> eps,
                                 double eta) {
  require_batches(D, real, fake, "adversarial_loss");
  const bool log_form = v == Variant::gan || v == Variant::bigan;
  if (log_form && D.head_mode() != HeadMode::probability_sigmoid) {
    throw UsageError(to_string(v) + " needs a probability (sigmoid) critic head");
  }
  if (uses_joint_pairs(v) != (real.latent_width() > 0)) {
    throw UsageError(to_string(v) + (uses_joint_pairs(v) ? " needs joint (x, z) pairs"
                                                         : " takes data-only batches"));
  }
  const std::size_t M = real.size();
  const double inv_m = 1.0 / static_cast<double>(M);
  StackedPass s = stacked_forward(D, real, fake);

  AdversarialLoss r;
  std::vector<double> d_adj_r(M), d_adj_f(M), ge_adj_r(M, 0.0), ge_adj_f(M);
  if (log_form) {
    double v_real = 0, v_fake = 0;
    for (std::size_t m = 0; m < M; ++m) {
      v_real += safe_log(s.d_real[m]) * inv_m;
      v_fake += safe_log(1.0 - s.d_fake[m]) * inv_m;
      d_adj_r[m] = -inv_m * safe_log_deriv(s.d_real[m]);
      d_adj_f[m] = inv_m * safe_log_deriv(1.0 - s.d_fake[m]);
      ge_adj_f[m] = -d_adj_f[m];
      if (v == Variant::bigan) ge_adj_r[m] = -d_adj_r[m];
    }
    r.objective = v_real + v_fake;
    r.d_loss = -r.objective;
    r.ge_loss = v == Variant::bigan ? r.objective : v_fake;
  } else {
    r.objective = mean(s.d_real) - mean(s.d_fake);
    r.d_loss = -r.objective;
    for (std::size_t m = 0; m < M; ++m) {
      d_adj_r[m] = -inv_m;
      d_adj_f[m] = inv_m;
      ge_adj_f[m] = -inv_m;
      if (v == Variant::biwgan_gp) ge_adj_r[m] = inv_m;
    }
    r.ge_loss = v == Variant::biwgan_gp ? r.objective : -mean(s.d_fake);
  }

  r.d_grads = stacked_backward(D, s, d_adj_r, d_adj_f, true).params;
  if (v == Variant::wgan_gp || v == Variant::biwgan_gp) {
    if (!(eta >= 0.0)) throw UsageError("adversarial_loss: eta must be >= 0");
    require_eps(eps, M);
    Tensor x_hat = interpolate_flat(s.flat_real, s.flat_fake, eps);
    nn::PenaltyResult pen = nn::gradient_penalty_backward(D.network(), x_hat, eta);
    r.d_loss += pen.mean;
    r.d_grads.add_scaled(pen.param_grads, 1.0);
  }
  if (!std::isfinite(r.d_loss) || !std::isfinite(r.ge_loss)) {
    throw EvaluationError(to_string(v) + " loss is non-finite");
  }

  Tensor ge_in = stacked_backward(D, s, ge_adj_r, ge_adj_f, false).input;
  r.ge_real_grad = ge_in.slice_rows(0, M);
  r.ge_fake_grad = ge_in.slice_rows(M, 2 * M);
  return r;
}

void clip_weights(CriticModel& D, double c) {
  if (!(c > 0)) throw UsageError("clip bound must be positive");
  for (auto& e : D.network().mutable_params()) {
    for (double& x : e.value.data()) x = std::clamp(x, -c, c);
  }
}

}  // namespace fedgan::models
