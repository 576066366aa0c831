#pragma once

#include <optional>
#include <vector>

#include "fedgan/federation/config.hpp"
#include "fedgan/federation/ledger.hpp"
#include "fedgan/federation/nodes.hpp"
#include "fedgan/models/bundle.hpp"

namespace fedgan::federation {

// Critic head implied by the variant (sigmoid for gan/bigan).
models::ArchitectureConfig arch_for_variant(models::ArchitectureConfig arch,
                                            models::Variant v);

// Global initial generator/encoder shared by every mode, and per-monitor critics.
models::GeneratorModel initial_generator(const models::ArchitectureConfig& arch,
                                         std::uint64_t seed);
models::EncoderModel initial_encoder(const models::ArchitectureConfig& arch, std::uint64_t seed);
models::CriticModel initial_critic(const models::ArchitectureConfig& arch, models::Variant v,
                                   std::uint64_t seed, std::size_t slice, std::size_t monitor);

// One complete GAN of any variant trained on a single node (standalone
// monitors, the centralized controller, and the baselines).
struct SingleNodeTrainer {
  models::Variant variant;
  std::size_t slice = 0;    // stream path ids
  std::size_t monitor = 0;
  models::GeneratorModel generator;
  std::optional<models::EncoderModel> encoder;
  models::CriticModel critic;
  nn::AdamState adam_g, adam_e, adam_d;
  Tensor shard;

  SingleNodeTrainer(models::Variant v, std::size_t slice, std::size_t monitor,
                    models::GeneratorModel G, std::optional<models::EncoderModel> E,
                    models::CriticModel D, Tensor shard);

  struct StepResult {
    double d_loss = 0.0;   // mean over the K critic passes
    double ge_loss = 0.0;  // generator-side loss at the K-th pass
  };
  // One iteration: K critic passes on a fixed batch, then one G (and E) step.
  StepResult step(const TrainingConfig& cfg, std::size_t iteration, std::size_t batch_size);
};

struct LossTrace {
  std::size_t iteration = 0;
  std::size_t group = 0;  // slice (distributed/federated), monitor (standalone), 0 (centralized)
  double d_loss = 0.0;
  double eg_loss = 0.0;
};

// Mean of the traces over groups, one entry per iteration.
std::vector<LossTrace> average_over_groups(const std::vector<LossTrace>& traces);

struct NodeModels {
  models::GeneratorModel generator;
  std::optional<models::EncoderModel> encoder;
  models::CriticModel critic;
};

struct GlobalModel {
  nn::ParamSet generator;
  nn::ParamSet encoder;
};

// Training windows per monitor, indexed [slice][monitor], each [W x t x d].
struct TrainingData {
  std::vector<std::vector<Tensor>> shards;
  void validate(const TopologySpec& topo, const models::ArchitectureConfig& arch) const;
};

struct RunOptions {
  // A joining slice starts from an existing global model (fresh Adam moments).
  std::optional<GlobalModel> warm_start;
};

struct TrainingResult {
  Mode mode = Mode::federated;
  models::Variant variant = models::Variant::biwgan_gp;
  models::ArchitectureConfig arch;
  std::vector<std::vector<NodeModels>> monitors;  // models each monitor detects with
  std::optional<GlobalModel> global;              // federated only
  std::vector<LossTrace> traces;
  CostLedger ledger;
  ModelSizes sizes;

  // G, E and critic of monitor (s, n).
  models::ModelBundle bundle(std::size_t slice, std::size_t monitor) const;
};

TrainingResult run_training(const TopologySpec& topo, const TrainingConfig& cfg,
                            const models::ArchitectureConfig& arch, const TrainingData& data,
                            const RunOptions& options = {});

}  // namespace fedgan::federation
