#include "fedgan/federation/nodes.hpp"

#include <set>
#include <string>

#include "fedgan/common/error.hpp"
#include "fedgan/common/rng.hpp"
#include "fedgan/models/losses.hpp"

namespace fedgan::federation {

Tensor sample_batch(const Tensor& shard, std::size_t M, Rng& rng) {
  const std::size_t W = shard.dim(0);
  if (W == 0) throw UsageError("cannot sample a batch from an empty shard");
  const std::size_t row = shard.row_size();
  Shape shape = shard.shape();
  shape[0] = M;
  Tensor out(shape);
  for (std::size_t m = 0; m < M; ++m) {
    const std::size_t src = rng.index(W);
    std::copy_n(shard.raw() + src * row, row, out.data().begin() + m * row);
  }
  return out;
}

std::vector<double> critic_epsilons(std::uint64_t seed, std::size_t slice, std::size_t monitor,
                                    std::size_t iteration, std::size_t k, std::size_t M) {
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(Stream::epsilon), slice, monitor,
                             iteration, k}));
  std::vector<double> eps(M);
  for (double& e : eps) e = rng.uniform();
  return eps;
}

MonitorState::MonitorState(std::size_t s, std::size_t n, models::CriticModel D, Tensor data)
    : slice(s),
      monitor(n),
      critic(std::move(D)),
      adam(nn::AdamState::for_params(critic.network().params())),
      shard(std::move(data)) {}

MonitorRoundResult monitor_round(MonitorState& state, const Tensor& real_batch,
                                 const GenPacket& packet, const TrainingConfig& cfg) {
  packet.validate();
  const std::size_t M = real_batch.dim(0);
  if (packet.f.dim(0) != M) {
    throw DimensionError("monitor " + std::to_string(state.monitor) + " holds a batch of " +
                         std::to_string(M) + " windows but the packet carries " +
                         std::to_string(packet.f.dim(0)));
  }
  const models::JointBatch real(real_batch, packet.f, models::Provenance::real);
  const models::JointBatch fake(packet.x_bar, packet.z, models::Provenance::fake);

  MonitorRoundResult out;
  out.feedback.iteration = packet.iteration;
  out.feedback.monitor = static_cast<std::uint32_t>(state.monitor);
  double d_sum = 0.0;
  for (std::size_t k = 1; k <= cfg.critic_iterations; ++k) {
    if (k == cfg.critic_iterations) {
      models::Feedbacks fb = models::error_feedbacks(state.critic, real, fake);
      out.feedback.e = std::move(fb.e);
      out.feedback.g = std::move(fb.g);
      out.eg_loss = fb.eg_loss;
    }
    const auto eps = critic_epsilons(cfg.seed, state.slice, state.monitor, packet.iteration, k, M);
    models::CriticLossResult res = models::critic_loss(state.critic, real, fake, eps, cfg.penalty);
    d_sum += res.loss;
    nn::adam_step(state.critic.network().mutable_params(), res.param_grads, state.adam, cfg.adam);
  }
  out.d_loss = d_sum / static_cast<double>(cfg.critic_iterations);
  return out;
}

ManagerState::ManagerState(std::size_t s, std::size_t n, models::GeneratorModel G,
                           models::EncoderModel E)
    : slice(s),
      monitors(n),
      generator(std::move(G)),
      encoder(std::move(E)),
      adam_g(nn::AdamState::for_params(generator.network().params())),
      adam_e(nn::AdamState::for_params(encoder.network().params())) {}

std::vector<GenPacket> manager_generate(ManagerState& state,
                                        const std::map<std::size_t, Tensor>& batches,
                                        const TrainingConfig& cfg, std::uint64_t iteration) {
  for (std::size_t n = 0; n < state.monitors; ++n) {
    if (!batches.count(n)) {
      throw ProtocolError("slice " + std::to_string(state.slice) + " received no batch from monitor " +
                          std::to_string(n) + " at iteration " + std::to_string(iteration));
    }
  }
  if (batches.size() != state.monitors) {
    throw ProtocolError("slice " + std::to_string(state.slice) + " received batches from " +
                        std::to_string(batches.size()) + " monitors, expected " +
                        std::to_string(state.monitors));
  }
  state.generator_tapes.assign(state.monitors, nn::Tape{});
  state.encoder_tapes.assign(state.monitors, nn::Tape{});
  std::vector<GenPacket> packets(state.monitors);
  for (std::size_t n = 0; n < state.monitors; ++n) {
    const Tensor& X = batches.at(n);
    GenPacket& p = packets[n];
    p.iteration = iteration;
    p.monitor = static_cast<std::uint32_t>(n);
    p.f = state.encoder.encode(X, state.encoder_tapes[n]);
    Rng rng(derive_seed(cfg.seed, {static_cast<std::uint64_t>(Stream::noise), state.slice,
                                   iteration, n}));
    p.z = models::sample_noise(cfg.noise, X.dim(0), state.generator.latent_dim(), rng);
    p.x_bar = state.generator.generate(p.z, state.generator_tapes[n]);
  }
  state.pending_iteration = iteration;
  return packets;
}

GeneratorEncoderGradients assemble_gradients(const ManagerState& state,
                                             const std::vector<FeedbackPacket>& feedbacks) {
  if (!state.pending_iteration) {
    throw ProtocolError("slice " + std::to_string(state.slice) +
                        " received feedbacks without a pending generation");
  }
  std::vector<const FeedbackPacket*> by_monitor(state.monitors, nullptr);
  for (const FeedbackPacket& p : feedbacks) {
    if (p.iteration != *state.pending_iteration) {
      throw ProtocolError("feedback from monitor " + std::to_string(p.monitor) +
                          " is for iteration " + std::to_string(p.iteration) + ", expected " +
                          std::to_string(*state.pending_iteration));
    }
    if (p.monitor >= state.monitors) {
      throw ProtocolError("feedback from unknown monitor " + std::to_string(p.monitor));
    }
    if (by_monitor[p.monitor]) {
      throw ProtocolError("duplicate feedback from monitor " + std::to_string(p.monitor));
    }
    by_monitor[p.monitor] = &p;
  }
  for (std::size_t n = 0; n < state.monitors; ++n) {
    if (!by_monitor[n]) throw ProtocolError("missing feedback from monitor " + std::to_string(n));
  }

  GeneratorEncoderGradients out;
  out.generator = state.generator.network().params().zeros_like();
  out.encoder = state.encoder.network().params().zeros_like();
  const double inv_n = 1.0 / static_cast<double>(state.monitors);
  for (std::size_t n = 0; n < state.monitors; ++n) {
    const FeedbackPacket& p = *by_monitor[n];
    out.generator.add_scaled(state.generator.backward(state.generator_tapes[n], p.g.data), inv_n);
    out.encoder.add_scaled(state.encoder.backward(state.encoder_tapes[n], p.e.latent), inv_n);
  }
  return out;
}

GeneratorEncoderGradients manager_update(ManagerState& state,
                                         const std::vector<FeedbackPacket>& feedbacks,
                                         const TrainingConfig& cfg) {
  GeneratorEncoderGradients grads = assemble_gradients(state, feedbacks);
  nn::adam_step(state.generator.network().mutable_params(), grads.generator, state.adam_g, cfg.adam);
  nn::adam_step(state.encoder.network().mutable_params(), grads.encoder, state.adam_e, cfg.adam);
  state.pending_iteration.reset();
  state.generator_tapes.clear();
  state.encoder_tapes.clear();
  return grads;
}

double SliceWeights::total() const {
  double q_total = 0.0;
  for (double v : q) q_total += v;
  return q_total;
}

void SliceWeights::validate(std::size_t slices) const {
  if (q.size() != slices) {
    throw UsageError("expected " + std::to_string(slices) + " slice weights, got " +
                     std::to_string(q.size()));
  }
  for (double v : q) {
    if (!(v >= 0.0)) throw UsageError("slice weights must be non-negative");
  }
  if (!(total() > 0.0)) throw UsageError("slice weights sum to zero");
}

nn::ParamSet controller_aggregate(const std::vector<nn::ParamSet>& params,
                                  const SliceWeights& weights) {
  if (params.empty()) throw UsageError("nothing to aggregate");
  weights.validate(params.size());
  for (std::size_t s = 1; s < params.size(); ++s) {
    params[0].require_same_structure(params[s], "controller_aggregate");
  }
  const double q_total = weights.total();
  nn::ParamSet out = params[0].zeros_like();
  for (std::size_t s = 0; s < params.size(); ++s) {
    out.add_scaled(params[s], weights.q[s] / q_total);
  }
  return out;
}

void apply_global(ManagerState& state, const nn::ParamSet& generator,
                  const nn::ParamSet& encoder) {
  state.generator.network().params().require_same_structure(generator, "apply_global generator");
  state.encoder.network().params().require_same_structure(encoder, "apply_global encoder");
  state.generator.network().set_params(generator);
  state.encoder.network().set_params(encoder);
}

}  // namespace fedgan::federation
