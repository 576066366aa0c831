#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fedgan/common/checkpoint.hpp"
#include "fedgan/models/losses.hpp"
#include "fedgan/models/models.hpp"

namespace fedgan::models {

// Everything needed to score windows: G, optionally E, and one critic per
// monitor (global G/E, local critics).
struct ModelBundle {
  ArchitectureConfig arch;
  Variant variant = Variant::biwgan_gp;
  GeneratorModel generator;
  std::optional<EncoderModel> encoder;
  std::vector<CriticModel> critics;
};

// Architecture and variant go into metadata; tensors are stored as
// "generator/<param>", "encoder/<param>", "critic<n>/<param>".
Checkpoint bundle_to_checkpoint(const ModelBundle& b);
ModelBundle bundle_from_checkpoint(const Checkpoint& ck);

void save_bundle(const std::string& path, const ModelBundle& b,
                 const std::vector<std::pair<std::string, std::string>>& extra_meta = {});
ModelBundle load_bundle(const std::string& path, Checkpoint* raw = nullptr);

}  // namespace fedgan::models
