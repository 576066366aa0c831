#include "fedgan/models/bundle.hpp"

#include "fedgan/common/error.hpp"

namespace fedgan::models {
namespace {

void put_params(Checkpoint& ck, const std::string& prefix, const nn::ParamSet& ps) {
  for (const auto& e : ps) ck.tensors.push_back({prefix + "/" + e.name, e.value});
}

nn::ParamSet get_params(const Checkpoint& ck, const std::string& prefix,
                        const nn::NetworkSpec& spec) {
  nn::ParamSet ps = nn::make_layer_params(spec);
  nn::ParamSet out;
  for (const auto& e : ps) {
    const Tensor& t = ck.tensor(prefix + "/" + e.name);
    if (t.shape() != e.value.shape()) {
      throw FormatError("checkpoint tensor " + prefix + "/" + e.name + " has shape " +
                        shape_to_string(t.shape()) + ", architecture expects " +
                        shape_to_string(e.value.shape()));
    }
    out.add(e.name, t);
  }
  return out;
}

std::size_t meta_size(const Checkpoint& ck, const std::string& key) {
  const std::string& v = ck.meta(key);
  try {
    return std::stoul(v);
  } catch (const std::exception&) {
    throw FormatError("checkpoint metadata '" + key + "' is not an integer: " + v);
  }
}

}  // namespace

Checkpoint bundle_to_checkpoint(const ModelBundle& b) {
  Checkpoint ck;
  ck.set_meta("kind", "model-bundle");
  ck.set_meta("variant", to_string(b.variant));
  ck.set_meta("window", std::to_string(b.arch.window));
  ck.set_meta("features", std::to_string(b.arch.features));
  ck.set_meta("latent_dim", std::to_string(b.arch.latent_dim));
  ck.set_meta("hidden", std::to_string(b.arch.hidden));
  ck.set_meta("critic_hidden", std::to_string(b.arch.critic_hidden));
  ck.set_meta("critic_head", to_string(b.arch.critic_head));
  ck.set_meta("critics", std::to_string(b.critics.size()));
  put_params(ck, "generator", b.generator.network().params());
  if (b.encoder) put_params(ck, "encoder", b.encoder->network().params());
  for (std::size_t n = 0; n < b.critics.size(); ++n) {
    put_params(ck, "critic" + std::to_string(n), b.critics[n].network().params());
  }
  return ck;
}

ModelBundle bundle_from_checkpoint(const Checkpoint& ck) {
  if (ck.meta("kind") != "model-bundle") {
    throw FormatError("checkpoint does not hold a model bundle");
  }
  ArchitectureConfig arch;
  arch.window = meta_size(ck, "window");
  arch.features = meta_size(ck, "features");
  arch.latent_dim = meta_size(ck, "latent_dim");
  arch.hidden = meta_size(ck, "hidden");
  arch.critic_hidden = meta_size(ck, "critic_hidden");
  try {
    arch.critic_head = parse_head_mode(ck.meta("critic_head"));
    arch.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint architecture: ") + e.what());
  }
  Variant variant;
  try {
    variant = parse_variant(ck.meta("variant"));
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  }

  const auto gspec = generator_spec(arch);
  ModelBundle b{arch, variant,
                GeneratorModel(nn::Network(gspec, get_params(ck, "generator", gspec))),
                std::nullopt, {}};
  if (has_encoder(variant)) {
    const auto espec = encoder_spec(arch);
    b.encoder.emplace(nn::Network(espec, get_params(ck, "encoder", espec)));
  }
  const auto cspec = critic_spec(arch, uses_joint_pairs(variant));
  const std::size_t n_critics = meta_size(ck, "critics");
  for (std::size_t n = 0; n < n_critics; ++n) {
    b.critics.emplace_back(nn::Network(cspec, get_params(ck, "critic" + std::to_string(n), cspec)));
  }
  return b;
}

void save_bundle(const std::string& path, const ModelBundle& b,
                 const std::vector<std::pair<std::string, std::string>>& extra_meta) {
  Checkpoint ck = bundle_to_checkpoint(b);
  for (const auto& [k, v] : extra_meta) ck.set_meta(k, v);
  save_checkpoint(path, ck);
}

ModelBundle load_bundle(const std::string& path, Checkpoint* raw) {
  Checkpoint ck = load_checkpoint(path);
  ModelBundle b = bundle_from_checkpoint(ck);
  if (raw != nullptr) *raw = std::move(ck);
  return b;
}

}  // namespace fedgan::models
