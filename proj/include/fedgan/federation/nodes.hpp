#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "fedgan/federation/config.hpp"
#include "fedgan/federation/wire.hpp"
#include "fedgan/models/models.hpp"
#include "fedgan/nn/adam.hpp"

namespace fedgan::federation {

// M windows drawn with replacement from a shard [W x t x d].
Tensor sample_batch(const Tensor& shard, std::size_t M, Rng& rng);

// The M per-example interpolation weights of critic pass k (1-based).
std::vector<double> critic_epsilons(std::uint64_t seed, std::size_t slice, std::size_t monitor,
                                    std::size_t iteration, std::size_t k, std::size_t M);

// --- monitor -------------------------------------------------------------

struct MonitorState {
  std::size_t slice = 0;
  std::size_t monitor = 0;
  models::CriticModel critic;
  nn::AdamState adam;
  Tensor shard;  // local training windows [W x t x d]

  MonitorState(std::size_t slice, std::size_t monitor, models::CriticModel critic, Tensor shard);
};

struct MonitorRoundResult {
  FeedbackPacket feedback;
  double d_loss = 0.0;   // critic loss averaged over the K passes
  double eg_loss = 0.0;  // L_EG on the K-th pass, before its update
};

// K critic updates against the fixed real/fake pairs of this iteration. The
// feedbacks and L_EG come from the critic as it stands at the start of the
// K-th pass.
MonitorRoundResult monitor_round(MonitorState& state, const Tensor& real_batch,
                                 const GenPacket& packet, const TrainingConfig& cfg);

// --- manager -------------------------------------------------------------

struct ManagerState {
  std::size_t slice = 0;
  std::size_t monitors = 1;  // N
  models::GeneratorModel generator;
  models::EncoderModel encoder;
  nn::AdamState adam_g;
  nn::AdamState adam_e;

  // Forward passes of the current iteration, one per monitor.
  std::optional<std::uint64_t> pending_iteration;
  std::vector<nn::Tape> generator_tapes;
  std::vector<nn::Tape> encoder_tapes;

  ManagerState(std::size_t slice, std::size_t monitors, models::GeneratorModel G,
               models::EncoderModel E);
};

// f_n = E(X_n), z_n ~ P_z from the (seed, slice, iteration, monitor) stream,
// fake X_n = G(z_n). Batches are keyed by monitor id.
std::vector<GenPacket> manager_generate(ManagerState& state,
                                        const std::map<std::size_t, Tensor>& batches,
                                        const TrainingConfig& cfg, std::uint64_t iteration);

struct GeneratorEncoderGradients {
  nn::ParamSet generator;
  nn::ParamSet encoder;
};

// Chain rule through the recorded passes, averaged over the N monitors (each
// feedback already carries the 1/M of its batch mean). Validates that exactly
// one packet per monitor arrived for the pending iteration.
GeneratorEncoderGradients assemble_gradients(const ManagerState& state,
                                             const std::vector<FeedbackPacket>& feedbacks);

// assemble_gradients followed by one Adam step per model.
GeneratorEncoderGradients manager_update(ManagerState& state,
                                         const std::vector<FeedbackPacket>& feedbacks,
                                         const TrainingConfig& cfg);

// --- controller ----------------------------------------------------------

struct SliceWeights {
  std::vector<double> q;  // training windows per slice
  double total() const;
  void validate(std::size_t slices) const;
};

// Per-coordinate sum over slices, in ascending slice order, of (Q_s / Q) theta_s.
nn::ParamSet controller_aggregate(const std::vector<nn::ParamSet>& params,
                                  const SliceWeights& weights);

// Replaces the manager's parameters with the global ones. Adam moments stay.
void apply_global(ManagerState& state, const nn::ParamSet& generator,
                  const nn::ParamSet& encoder);

}  // namespace fedgan::federation
