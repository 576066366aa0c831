#include "fedgan/federation/training.hpp"

#include <chrono>
#include <map>
#include <string>

#include "fedgan/common/error.hpp"
#include "fedgan/common/parallel.hpp"
#include "fedgan/common/rng.hpp"
#include "fedgan/models/losses.hpp"

namespace fedgan::federation {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::uint64_t stream(Stream s) { return static_cast<std::uint64_t>(s); }

Tensor empty_latent(std::size_t M) { return Tensor({M, 0}); }

std::string monitor_key(std::size_t s, std::size_t n) {
  return "monitor[" + std::to_string(s) + "," + std::to_string(n) + "]";
}

std::string manager_key(std::size_t s) { return "manager[" + std::to_string(s) + "]"; }

Tensor concat_shards(const TrainingData& data) {
  std::vector<Tensor> parts;
  for (const auto& slice : data.shards) {
    for (const Tensor& t : slice) parts.push_back(t);
  }
  return concat_rows(parts);
}

std::vector<double> flatten_pair(const nn::ParamSet& a, const nn::ParamSet& b) {
  std::vector<double> v = a.flatten();
  const std::vector<double> w = b.flatten();
  v.insert(v.end(), w.begin(), w.end());
  return v;
}

void unflatten_pair(std::span<const double> v, nn::ParamSet& a, nn::ParamSet& b) {
  const std::size_t na = a.scalar_count();
  a.assign_flat(v.subspan(0, na));
  b.assign_flat(v.subspan(na));
}

}  // namespace

models::ArchitectureConfig arch_for_variant(models::ArchitectureConfig arch, models::Variant v) {
  arch.critic_head = models::default_head(v);
  return arch;
}

models::GeneratorModel initial_generator(const models::ArchitectureConfig& arch,
                                         std::uint64_t seed) {
  return models::GeneratorModel(arch, derive_seed(seed, {stream(Stream::init_generator)}));
}

models::EncoderModel initial_encoder(const models::ArchitectureConfig& arch, std::uint64_t seed) {
  return models::EncoderModel(arch, derive_seed(seed, {stream(Stream::init_encoder)}));
}

models::CriticModel initial_critic(const models::ArchitectureConfig& arch, models::Variant v,
                                   std::uint64_t seed, std::size_t slice, std::size_t monitor) {
  return models::CriticModel(arch_for_variant(arch, v),
                             derive_seed(seed, {stream(Stream::init_critic), slice, monitor}),
                             models::uses_joint_pairs(v));
}

// ---------------------------------------------------------------------------

SingleNodeTrainer::SingleNodeTrainer(models::Variant v, std::size_t s, std::size_t n,
                                     models::GeneratorModel G,
                                     std::optional<models::EncoderModel> E, models::CriticModel D,
                                     Tensor data)
    : variant(v),
      slice(s),
      monitor(n),
      generator(std::move(G)),
      encoder(std::move(E)),
      critic(std::move(D)),
      shard(std::move(data)) {
  if (models::has_encoder(v) != encoder.has_value()) {
    throw UsageError(models::to_string(v) + (encoder ? " has no encoder" : " needs an encoder"));
  }
  adam_g = nn::AdamState::for_params(generator.network().params());
  if (encoder) adam_e = nn::AdamState::for_params(encoder->network().params());
  adam_d = nn::AdamState::for_params(critic.network().params());
}

SingleNodeTrainer::StepResult SingleNodeTrainer::step(const TrainingConfig& cfg,
                                                      std::size_t iteration,
                                                      std::size_t batch_size) {
  const std::size_t M = batch_size;
  Rng batch_rng(derive_seed(cfg.seed, {stream(Stream::batch), slice, monitor, iteration}));
  const Tensor X = sample_batch(shard, M, batch_rng);

  nn::Tape tape_g, tape_e;
  const Tensor f = encoder ? encoder->encode(X, tape_e) : empty_latent(M);
  Rng noise_rng(derive_seed(cfg.seed, {stream(Stream::noise), slice, iteration, monitor}));
  const Tensor z = models::sample_noise(cfg.noise, M, generator.latent_dim(), noise_rng);
  const Tensor x_bar = generator.generate(z, tape_g);

  const bool joint = models::uses_joint_pairs(variant);
  const models::JointBatch real(X, joint ? f : empty_latent(M), models::Provenance::real);
  const models::JointBatch fake(x_bar, joint ? z : empty_latent(M), models::Provenance::fake);

  StepResult out;
  double d_sum = 0.0;
  Tensor ge_real, ge_fake;
  for (std::size_t k = 1; k <= cfg.critic_iterations; ++k) {
    const auto eps = critic_epsilons(cfg.seed, slice, monitor, iteration, k, M);
    models::AdversarialLoss loss =
        models::adversarial_loss(variant, critic, real, fake, eps, cfg.penalty);
    d_sum += loss.d_loss;
    if (k == cfg.critic_iterations) {
      out.ge_loss = loss.ge_loss;
      ge_real = std::move(loss.ge_real_grad);
      ge_fake = std::move(loss.ge_fake_grad);
    }
    nn::adam_step(critic.network().mutable_params(), loss.d_grads, adam_d, cfg.adam);
    if (variant == models::Variant::wgan) models::clip_weights(critic, cfg.clip);
  }
  out.d_loss = d_sum / static_cast<double>(cfg.critic_iterations);

  const Shape row_shape = generator.window_shape();
  const std::size_t latent = joint ? generator.latent_dim() : 0;
  const models::JointBatch g =
      models::JointBatch::unflatten(ge_fake, row_shape, latent, models::Provenance::fake);
  nn::ParamSet grad_g = generator.backward(tape_g, g.data);
  grad_g.scale(1.0);  // N = 1: same arithmetic as the manager's average
  nn::adam_step(generator.network().mutable_params(), grad_g, adam_g, cfg.adam);
  if (encoder) {
    const models::JointBatch e =
        models::JointBatch::unflatten(ge_real, row_shape, latent, models::Provenance::real);
    nn::ParamSet grad_e = encoder->backward(tape_e, e.latent);
    nn::adam_step(encoder->network().mutable_params(), grad_e, adam_e, cfg.adam);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<LossTrace> average_over_groups(const std::vector<LossTrace>& traces) {
  std::map<std::size_t, std::pair<LossTrace, std::size_t>> acc;
  for (const LossTrace& t : traces) {
    auto& [sum, count] = acc[t.iteration];
    sum.iteration = t.iteration;
    sum.d_loss += t.d_loss;
    sum.eg_loss += t.eg_loss;
    ++count;
  }
  std::vector<LossTrace> out;
  out.reserve(acc.size());
  for (auto& [i, entry] : acc) {
    LossTrace t = entry.first;
    t.d_loss /= static_cast<double>(entry.second);
    t.eg_loss /= static_cast<double>(entry.second);
    out.push_back(t);
  }
  return out;
}

void TrainingData::validate(const TopologySpec& topo,
                            const models::ArchitectureConfig& arch) const {
  if (shards.size() != topo.slices) {
    throw ConfigError("dataset has " + std::to_string(shards.size()) + " slices, topology expects " +
                      std::to_string(topo.slices));
  }
  for (std::size_t s = 0; s < shards.size(); ++s) {
    if (shards[s].size() != topo.monitors_per_slice) {
      throw ConfigError("slice " + std::to_string(s) + " has " + std::to_string(shards[s].size()) +
                        " monitor shards, topology expects " +
                        std::to_string(topo.monitors_per_slice));
    }
    for (std::size_t n = 0; n < shards[s].size(); ++n) {
      const Tensor& t = shards[s][n];
      if (t.rank() != 3 || t.dim(1) != arch.window || t.dim(2) != arch.features) {
        throw DimensionError("shard of " + monitor_key(s, n) + " has shape " +
                             shape_to_string(t.shape()) + ", expected [W x " +
                             std::to_string(arch.window) + " x " + std::to_string(arch.features) +
                             "]");
      }
      if (t.dim(0) == 0) throw ConfigError("shard of " + monitor_key(s, n) + " is empty");
    }
  }
}

models::ModelBundle TrainingResult::bundle(std::size_t s, std::size_t n) const {
  const NodeModels& m = monitors.at(s).at(n);
  return models::ModelBundle{arch_for_variant(arch, variant), variant, m.generator, m.encoder,
                             {m.critic}};
}

// ---------------------------------------------------------------------------

namespace {

struct Run {
  const TopologySpec& topo;
  const TrainingConfig& cfg;
  models::ArchitectureConfig arch;
  const TrainingData& data;
  const RunOptions& options;
  TrainingResult result;
  MessageBus bus;

  Run(const TopologySpec& t, const TrainingConfig& c, const models::ArchitectureConfig& a,
      const TrainingData& d, const RunOptions& o)
      : topo(t), cfg(c), arch(arch_for_variant(a, c.variant)), data(d), options(o),
        bus(result.ledger) {}

  models::GeneratorModel start_generator() const {
    models::GeneratorModel G = initial_generator(arch, cfg.seed);
    if (options.warm_start) G.network().set_params(options.warm_start->generator);
    return G;
  }

  std::optional<models::EncoderModel> start_encoder() const {
    if (!models::has_encoder(cfg.variant)) return std::nullopt;
    models::EncoderModel E = initial_encoder(arch, cfg.seed);
    if (options.warm_start) E.network().set_params(options.warm_start->encoder);
    return E;
  }

  void add_flops(const std::string& key, double value) { result.ledger.flops[key] += value; }

  void fill_sizes() {
    result.sizes.theta_g = start_generator().network().parameter_count();
    result.sizes.theta_e = start_encoder() ? start_encoder()->network().parameter_count() : 0;
    result.sizes.theta_d = initial_critic(arch, cfg.variant, cfg.seed, 0, 0).network().parameter_count();
  }

  double single_node_flops(std::size_t M) const {
    const double K = static_cast<double>(cfg.critic_iterations);
    return 4.0 * K * M * result.sizes.theta_d +
           2.0 * M * static_cast<double>(result.sizes.theta_e + result.sizes.theta_g);
  }

  void centralized();
  void standalone();
  void collaborative(bool federated);
};

void Run::centralized() {
  const std::size_t window_values = arch.window * arch.features;
  for (std::size_t s = 0; s < topo.slices && cfg.iterations > 0; ++s) {
    for (std::size_t n = 0; n < topo.monitors_per_slice; ++n) {
      const Tensor& shard = data.shards[s][n];
      Header h{MessageType::data_upload, static_cast<std::uint16_t>(s),
               static_cast<std::uint32_t>(n), 0};
      bus.send(Link::monitor_controller, Direction::up, h, shard.data());
      const auto bytes = bus.receive(h);
      (void)decode_payload(bytes, shard.dim(0) * window_values);
    }
  }
  SingleNodeTrainer trainer(cfg.variant, 0, 0, start_generator(), start_encoder(),
                            initial_critic(arch, cfg.variant, cfg.seed, 0, 0), concat_shards(data));
  const std::size_t M = cfg.batch_size * topo.monitor_count();
  const auto t0 = Clock::now();
  for (std::size_t i = 0; i < cfg.iterations; ++i) {
    const auto r = trainer.step(cfg, i, M);
    result.traces.push_back({i, 0, r.d_loss, r.ge_loss});
    add_flops("controller", single_node_flops(M));
    result.ledger.iteration_seconds.push_back(seconds_since(t0));
  }
  result.ledger.seconds["controller"] += seconds_since(t0);
  result.monitors.assign(topo.slices, {});
  for (auto& slice : result.monitors) {
    for (std::size_t n = 0; n < topo.monitors_per_slice; ++n) {
      slice.push_back({trainer.generator, trainer.encoder, trainer.critic});
    }
  }
}

void Run::standalone() {
  const std::size_t N = topo.monitors_per_slice;
  std::vector<SingleNodeTrainer> trainers;
  for (std::size_t s = 0; s < topo.slices; ++s) {
    for (std::size_t n = 0; n < N; ++n) {
      trainers.emplace_back(cfg.variant, s, n, start_generator(), start_encoder(),
                            initial_critic(arch, cfg.variant, cfg.seed, s, n), data.shards[s][n]);
    }
  }
  std::vector<SingleNodeTrainer::StepResult> step(trainers.size());
  const auto t0 = Clock::now();
  for (std::size_t i = 0; i < cfg.iterations; ++i) {
    parallel_for(cfg.threads, trainers.size(),
                 [&](std::size_t j) { step[j] = trainers[j].step(cfg, i, cfg.batch_size); });
    for (std::size_t j = 0; j < trainers.size(); ++j) {
      result.traces.push_back({i, j, step[j].d_loss, step[j].ge_loss});
      add_flops(monitor_key(j / N, j % N), single_node_flops(cfg.batch_size));
    }
    result.ledger.iteration_seconds.push_back(seconds_since(t0));
  }
  result.ledger.seconds["monitor"] += seconds_since(t0);
  result.monitors.assign(topo.slices, {});
  for (auto& t : trainers) {
    result.monitors[t.slice].push_back({t.generator, t.encoder, t.critic});
  }
}

void Run::collaborative(bool federated) {
  const std::size_t S = topo.slices, N = topo.monitors_per_slice, M = cfg.batch_size;
  const std::size_t t = arch.window, d = arch.features, k = arch.latent_dim;
  const std::size_t total = S * N;
  const double theta_d = static_cast<double>(result.sizes.theta_d);
  const double theta_eg = static_cast<double>(result.sizes.theta_e + result.sizes.theta_g);

  std::vector<MonitorState> monitors;
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t n = 0; n < N; ++n) {
      monitors.emplace_back(s, n, initial_critic(arch, cfg.variant, cfg.seed, s, n),
                            data.shards[s][n]);
    }
  }
  const models::GeneratorModel G0 = start_generator();
  const models::EncoderModel E0 = *start_encoder();
  std::vector<ManagerState> managers;
  for (std::size_t s = 0; s < S; ++s) managers.emplace_back(s, N, G0, E0);

  SliceWeights weights;
  for (std::size_t s = 0; s < S; ++s) {
    double q = 0;
    for (const Tensor& shard : data.shards[s]) q += static_cast<double>(shard.dim(0));
    weights.q.push_back(q);
  }

  const std::size_t param_values = result.sizes.theta_g + result.sizes.theta_e;
  if (federated && cfg.iterations > 0) {
    // The controller distributes the starting model to every slice manager.
    const auto init = flatten_pair(G0.network().params(), E0.network().params());
    for (std::size_t s = 0; s < S; ++s) {
      Header h{MessageType::initial_model, static_cast<std::uint16_t>(s), 0, 0};
      bus.send(Link::manager_controller, Direction::down, h, init);
      const auto v = decode_payload(bus.receive(h), param_values);
      nn::ParamSet g = managers[s].generator.network().params();
      nn::ParamSet e = managers[s].encoder.network().params();
      unflatten_pair(v, g, e);
      apply_global(managers[s], g, e);
    }
  }

  std::vector<Tensor> batches(total);
  std::vector<std::vector<GenPacket>> packets(S);
  std::vector<MonitorRoundResult> rounds(total);
  double monitor_seconds = 0, manager_seconds = 0, controller_seconds = 0;
  const auto start = Clock::now();

  for (std::size_t i = 0; i < cfg.iterations; ++i) {
    // Monitors sample local batches and upload them.
    auto t0 = Clock::now();
    parallel_for(cfg.threads, total, [&](std::size_t j) {
      const MonitorState& m = monitors[j];
      Rng rng(derive_seed(cfg.seed, {stream(Stream::batch), m.slice, m.monitor, i}));
      batches[j] = sample_batch(m.shard, M, rng);
    });
    for (std::size_t j = 0; j < total; ++j) {
      Header h{MessageType::batch_upload, static_cast<std::uint16_t>(j / N),
               static_cast<std::uint32_t>(j % N), i};
      bus.send(Link::monitor_manager, Direction::up, h, batches[j].data());
    }
    monitor_seconds += seconds_since(t0);

    // Managers generate and send packets back.
    t0 = Clock::now();
    parallel_for(cfg.threads, S, [&](std::size_t s) {
      std::map<std::size_t, Tensor> received;
      for (std::size_t n = 0; n < N; ++n) {
        Header h{MessageType::batch_upload, static_cast<std::uint16_t>(s),
                 static_cast<std::uint32_t>(n), i};
        received[n] = Tensor({M, t, d}, decode_payload(bus.receive(h), M * t * d));
      }
      packets[s] = manager_generate(managers[s], received, cfg, i);
    });
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t n = 0; n < N; ++n) {
        Header h{MessageType::gen_packet, static_cast<std::uint16_t>(s),
                 static_cast<std::uint32_t>(n), i};
        bus.send(Link::monitor_manager, Direction::down, h, packets[s][n].payload());
      }
    }
    manager_seconds += seconds_since(t0);

    // Monitors run their critic passes and return feedbacks.
    t0 = Clock::now();
    parallel_for(cfg.threads, total, [&](std::size_t j) {
      MonitorState& m = monitors[j];
      Header h{MessageType::gen_packet, static_cast<std::uint16_t>(m.slice),
               static_cast<std::uint32_t>(m.monitor), i};
      const auto values = decode_payload(bus.receive(h), 2 * M * k + M * t * d);
      GenPacket p = GenPacket::from_payload(values, M, t, d, k);
      p.iteration = i;
      p.monitor = static_cast<std::uint32_t>(m.monitor);
      rounds[j] = monitor_round(m, batches[j], p, cfg);
    });
    for (std::size_t j = 0; j < total; ++j) {
      Header h{MessageType::feedback_packet, static_cast<std::uint16_t>(j / N),
               static_cast<std::uint32_t>(j % N), i};
      bus.send(Link::monitor_manager, Direction::up, h, rounds[j].feedback.payload());
      add_flops(monitor_key(j / N, j % N),
                4.0 * (1.0 + static_cast<double>(cfg.critic_iterations)) * M * theta_d);
    }
    monitor_seconds += seconds_since(t0);

    // Managers apply the chain rule and step G and E.
    t0 = Clock::now();
    parallel_for(cfg.threads, S, [&](std::size_t s) {
      std::vector<FeedbackPacket> fbs;
      for (std::size_t n = 0; n < N; ++n) {
        Header h{MessageType::feedback_packet, static_cast<std::uint16_t>(s),
                 static_cast<std::uint32_t>(n), i};
        const auto values = decode_payload(bus.receive(h), 2 * M * (t * d + k));
        FeedbackPacket p = FeedbackPacket::from_payload(values, M, t, d, k);
        p.iteration = i;
        p.monitor = static_cast<std::uint32_t>(n);
        fbs.push_back(std::move(p));
      }
      manager_update(managers[s], fbs, cfg);
    });
    for (std::size_t s = 0; s < S; ++s) {
      add_flops(manager_key(s), 2.0 * M * N * theta_eg);
      double d_mean = 0, eg_mean = 0;
      for (std::size_t n = 0; n < N; ++n) {
        d_mean += rounds[s * N + n].d_loss;
        eg_mean += rounds[s * N + n].eg_loss;
      }
      result.traces.push_back({i, s, d_mean / N, eg_mean / N});
    }
    manager_seconds += seconds_since(t0);

    // Aggregation every L iterations.
    if (federated && (i + 1) % cfg.local_iterations == 0) {
      t0 = Clock::now();
      std::vector<nn::ParamSet> gs, es;
      for (std::size_t s = 0; s < S; ++s) {
        Header h{MessageType::param_upload, static_cast<std::uint16_t>(s), 0, i};
        bus.send(Link::manager_controller, Direction::up, h,
                 flatten_pair(managers[s].generator.network().params(),
                              managers[s].encoder.network().params()));
      }
      for (std::size_t s = 0; s < S; ++s) {
        Header h{MessageType::param_upload, static_cast<std::uint16_t>(s), 0, i};
        const auto v = decode_payload(bus.receive(h), param_values);
        nn::ParamSet g = G0.network().params(), e = E0.network().params();
        unflatten_pair(v, g, e);
        gs.push_back(std::move(g));
        es.push_back(std::move(e));
      }
      GlobalModel global{controller_aggregate(gs, weights), controller_aggregate(es, weights)};
      add_flops("controller", static_cast<double>(S) * theta_eg);
      const auto flat = flatten_pair(global.generator, global.encoder);
      for (std::size_t s = 0; s < S; ++s) {
        Header h{MessageType::global_broadcast, static_cast<std::uint16_t>(s), 0, i};
        bus.send(Link::manager_controller, Direction::down, h, flat);
        const auto v = decode_payload(bus.receive(h), param_values);
        nn::ParamSet g = global.generator, e = global.encoder;
        unflatten_pair(v, g, e);
        apply_global(managers[s], g, e);
      }
      result.global = std::move(global);
      controller_seconds += seconds_since(t0);
    }
    result.ledger.iteration_seconds.push_back(seconds_since(start));
  }
  if (bus.pending() != 0) throw ProtocolError("undelivered messages at the end of training");

  result.ledger.seconds["monitor"] += monitor_seconds;
  result.ledger.seconds["manager"] += manager_seconds;
  if (federated) result.ledger.seconds["controller"] += controller_seconds;
  if (federated && !result.global) {
    result.global = GlobalModel{G0.network().params(), E0.network().params()};
  }
  result.monitors.assign(S, {});
  for (MonitorState& m : monitors) {
    const ManagerState& mgr = managers[m.slice];
    result.monitors[m.slice].push_back({mgr.generator, mgr.encoder, m.critic});
  }
}

}  // namespace

TrainingResult run_training(const TopologySpec& topo, const TrainingConfig& cfg,
                            const models::ArchitectureConfig& arch, const TrainingData& data,
                            const RunOptions& options) {
  topo.validate();
  cfg.validate();
  arch.validate();
  if (cfg.mode == Mode::centralized && topo.keep_data_in_slice) {
    throw ConfigError("centralized mode pools raw metrics at the controller, which the "
                      "keep_data_in_slice setting forbids");
  }
  data.validate(topo, arch);

  Run run(topo, cfg, arch, data, options);
  run.result.mode = cfg.mode;
  run.result.variant = cfg.variant;
  run.result.arch = run.arch;
  run.fill_sizes();
  const auto t0 = Clock::now();
  switch (cfg.mode) {
    case Mode::centralized: run.centralized(); break;
    case Mode::standalone: run.standalone(); break;
    case Mode::distributed: run.collaborative(false); break;
    case Mode::federated: run.collaborative(true); break;
  }
  run.result.ledger.seconds["total"] = seconds_since(t0);
  return std::move(run.result);
}

}  // namespace fedgan::federation
