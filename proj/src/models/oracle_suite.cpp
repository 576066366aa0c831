#include "fedgan/models/oracle_suite.hpp"

#include "fedgan/common/rng.hpp"
#include "fedgan/models/losses.hpp"
#include "fedgan/models/models.hpp"
#include "fedgan/nn/gradcheck.hpp"
#include "fedgan/nn/penalty.hpp"

namespace fedgan::models {

namespace {

constexpr double kStep = 1e-5;

Tensor randn(Shape s, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(s));
  for (double& v : t.data()) v = scale * rng.normal();
  return t;
}

double weighted_sum(const Tensor& out, const Tensor& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * w[i];
  return s;
}

ArchitectureConfig small_arch(Rng& rng) {
  ArchitectureConfig a;
  a.window = 1 + rng.index(3);
  a.features = 2;
  a.latent_dim = 2;
  a.hidden = 3;
  a.critic_hidden = 4;
  return a;
}

JointBatch random_batch(const ArchitectureConfig& a, std::size_t M, Rng& rng, bool joint,
                        Provenance pv) {
  return {randn({M, a.window, a.features}, rng), randn({M, joint ? a.latent_dim : 0}, rng), pv};
}

class Suite {
 public:
  Suite(std::size_t trials, std::uint64_t seed) : trials_(trials), seed_(seed) {}

  std::vector<OracleCheck> run() {
    for (std::size_t t = 0; t < trials_; ++t) {
      network(t);
      penalty(t);
      critic(t);
      for (Variant v : {Variant::gan, Variant::bigan, Variant::wgan, Variant::wgan_gp,
                        Variant::biwgan_gp}) {
        objective(v, t);
      }
    }
    return std::move(out_);
  }

 private:
  Rng rng_for(std::uint64_t family, std::size_t t) const {
    return Rng(derive_seed(seed_, {family, t}));
  }

  void add(std::string family, std::size_t t, std::string target, double err) {
    out_.push_back({std::move(family), t, std::move(target), err, 1e-4});
  }

  void network(std::size_t t) {
    Rng rng = rng_for(1, t);
    const nn::Activation acts[] = {nn::Activation::linear, nn::Activation::sigmoid,
                                   nn::Activation::tanh};
    nn::NetworkSpec spec;
    spec.input_dim = 1 + rng.index(3);
    switch (t % 3) {
      case 0:
        spec.layers = {nn::DenseSpec{2 + rng.index(3), acts[rng.index(3)]},
                       nn::DenseSpec{1 + rng.index(2), acts[rng.index(3)]}};
        break;
      case 1:
        spec.steps = 2 + rng.index(2);
        spec.repeat_input = true;
        spec.layers = {nn::VlstmSpec{2}, nn::VlstmSpec{3}, nn::DenseSpec{2, nn::Activation::linear}};
        break;
      default:
        spec.steps = 2 + rng.index(2);
        spec.last_step_only = true;
        spec.layers = {nn::DenseSpec{3, nn::Activation::linear}, nn::VlstmSpec{2}, nn::VlstmSpec{2}};
        break;
    }
    nn::Network net(spec, rng.engine()());
    for (auto& e : net.mutable_params()) e.value *= 1.5;
    const std::size_t batch = 1 + rng.index(3);
    Tensor x = randn(spec.input_shape(batch), rng);
    Tensor w = randn(spec.output_shape(batch), rng);
    nn::Tape tape;
    net.forward(x, tape);
    nn::NetworkGradients g = net.backward(tape, w);
    auto num_p = nn::finite_difference_gradient(
        [&](const nn::ParamSet& p) { return weighted_sum(nn::Network(spec, p).forward(x), w); },
        net.params(), kStep);
    auto num_x = nn::finite_difference_gradient(
        [&](const Tensor& xi) { return weighted_sum(net.forward(xi), w); }, x, kStep);
    add("network", t, "params", nn::max_relative_error(g.params, num_p));
    add("network", t, "input", nn::max_relative_error(g.input, num_x));
  }

  void penalty(std::size_t t) {
    Rng rng = rng_for(2, t);
    const nn::Activation acts[] = {nn::Activation::linear, nn::Activation::sigmoid,
                                   nn::Activation::tanh};
    nn::NetworkSpec spec;
    spec.input_dim = 2 + rng.index(3);
    spec.layers = {nn::DenseSpec{2 + rng.index(3), acts[rng.index(3)]},
                   nn::DenseSpec{2 + rng.index(3), acts[rng.index(3)]},
                   nn::DenseSpec{1, acts[rng.index(3)]}};
    nn::Network critic(spec, rng.engine()());
    for (auto& e : critic.mutable_params()) e.value *= 2.0;
    Tensor pts = randn({3, spec.input_dim}, rng);
    const double eta = 10.0;
    auto r = nn::gradient_penalty_backward(critic, pts, eta);
    auto num_p = nn::finite_difference_gradient(
        [&](const nn::ParamSet& p) {
          return nn::gradient_penalty_backward(nn::Network(spec, p), pts, eta).mean;
        },
        critic.params(), kStep);
    auto num_x = nn::finite_difference_gradient(
        [&](const Tensor& x) { return nn::gradient_penalty_backward(critic, x, eta).mean; }, pts,
        kStep);
    add("penalty", t, "params", nn::max_relative_error(r.param_grads, num_p));
    add("penalty", t, "input", nn::max_relative_error(r.input_grads, num_x));
  }

  void critic(std::size_t t) {
    Rng rng = rng_for(3, t);
    ArchitectureConfig a = small_arch(rng);
    a.critic_head = t % 3 == 0 ? HeadMode::probability_sigmoid : HeadMode::critic_linear;
    const std::size_t M = 1 + rng.index(4);
    CriticModel D(a, rng.engine()());
    auto real = random_batch(a, M, rng, true, Provenance::real);
    auto fake = random_batch(a, M, rng, true, Provenance::fake);
    std::vector<double> eps(M);
    for (double& e : eps) e = rng.uniform();
    const double eta = 10.0;
    const auto spec = D.network().spec();
    const Shape row(real.data.shape().begin() + 1, real.data.shape().end());
    auto as_real = [&](const Tensor& f) {
      return JointBatch::unflatten(f, row, a.latent_dim, Provenance::real);
    };
    auto as_fake = [&](const Tensor& f) {
      return JointBatch::unflatten(f, row, a.latent_dim, Provenance::fake);
    };

    auto r = critic_loss(D, real, fake, eps, eta);
    auto num_p = nn::finite_difference_gradient(
        [&](const nn::ParamSet& p) {
          return critic_loss(CriticModel(nn::Network(spec, p)), real, fake, eps, eta).loss;
        },
        D.network().params(), kStep);
    auto num_r = nn::finite_difference_gradient(
        [&](const Tensor& f) { return critic_loss(D, as_real(f), fake, eps, eta).loss; },
        real.flatten(), kStep);
    auto num_f = nn::finite_difference_gradient(
        [&](const Tensor& f) { return critic_loss(D, real, as_fake(f), eps, eta).loss; },
        fake.flatten(), kStep);
    add("critic_loss", t, "params", nn::max_relative_error(r.param_grads, num_p));
    add("critic_loss", t, "real", nn::max_relative_error(r.real_grad, num_r));
    add("critic_loss", t, "fake", nn::max_relative_error(r.fake_grad, num_f));

    auto fb = error_feedbacks(D, real, fake);
    auto num_e = nn::finite_difference_gradient(
        [&](const Tensor& f) { return eg_local_loss(D, as_real(f), fake); }, real.flatten(),
        kStep);
    auto num_g = nn::finite_difference_gradient(
        [&](const Tensor& f) { return eg_local_loss(D, real, as_fake(f)); }, fake.flatten(),
        kStep);
    add("eg_feedbacks", t, "e", nn::max_relative_error(fb.e.flatten(), num_e));
    add("eg_feedbacks", t, "g", nn::max_relative_error(fb.g.flatten(), num_g));
  }

  void objective(Variant v, std::size_t t) {
    Rng rng = rng_for(10 + static_cast<std::uint64_t>(v), t);
    ArchitectureConfig a = small_arch(rng);
    a.critic_head = default_head(v);
    const bool joint = uses_joint_pairs(v);
    const std::size_t M = 1 + rng.index(4);
    CriticModel D(a, rng.engine()(), joint);
    auto real = random_batch(a, M, rng, joint, Provenance::real);
    auto fake = random_batch(a, M, rng, joint, Provenance::fake);
    std::vector<double> eps(M);
    for (double& e : eps) e = rng.uniform();
    const double eta = 10.0;
    const auto spec = D.network().spec();
    const std::size_t k = joint ? a.latent_dim : 0;
    const Shape row(real.data.shape().begin() + 1, real.data.shape().end());

    auto r = adversarial_loss(v, D, real, fake, eps, eta);
    auto num_p = nn::finite_difference_gradient(
        [&](const nn::ParamSet& p) {
          return adversarial_loss(v, CriticModel(nn::Network(spec, p)), real, fake, eps, eta)
              .d_loss;
        },
        D.network().params(), kStep);
    auto num_r = nn::finite_difference_gradient(
        [&](const Tensor& f) {
          return adversarial_loss(v, D, JointBatch::unflatten(f, row, k, Provenance::real), fake,
                                  eps, eta)
              .ge_loss;
        },
        real.flatten(), kStep);
    auto num_f = nn::finite_difference_gradient(
        [&](const Tensor& f) {
          return adversarial_loss(v, D, real, JointBatch::unflatten(f, row, k, Provenance::fake),
                                  eps, eta)
              .ge_loss;
        },
        fake.flatten(), kStep);
    const std::string name = to_string(v);
    add(name, t, "d_params", nn::max_relative_error(r.d_grads, num_p));
    add(name, t, "ge_real", nn::max_relative_error(r.ge_real_grad, num_r));
    add(name, t, "ge_fake", nn::max_relative_error(r.ge_fake_grad, num_f));
  }

  std::size_t trials_;
  std::uint64_t seed_;
  std::vector<OracleCheck> out_;
};

}  // namespace

std::vector<OracleCheck> run_oracle_suite(std::size_t trials, std::uint64_t seed) {
  return Suite(trials, seed).run();
}

}  // namespace fedgan::models
