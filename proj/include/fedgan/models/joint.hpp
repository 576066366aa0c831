#pragma once

#include <span>

#include "fedgan/common/tensor.hpp"

namespace fedgan::models {

enum class Provenance { real, fake, interpolated };

const char* to_string(Provenance p);

// One critic input: a data window [t x d_x] together with a latent vector.
struct JointPair {
  Tensor data_part;    // [t x d_x]
  Tensor latent_part;  // [latent_dim]
  Provenance provenance = Provenance::real;
};

// M joint pairs stored as two batched tensors. Data-only critics use a
// latent tensor of shape [M x 0].
struct JointBatch {
  Tensor data;    // [M x t x d_x]
  Tensor latent;  // [M x latent_dim]
  Provenance provenance = Provenance::real;

  JointBatch() = default;
  JointBatch(Tensor data, Tensor latent, Provenance provenance);

  std::size_t size() const { return data.dim(0); }
  std::size_t data_width() const { return data.row_size(); }
  std::size_t latent_width() const { return latent.row_size(); }
  std::size_t pair_width() const { return data_width() + latent_width(); }

  JointPair pair(std::size_t m) const;
  // Row-major data part followed by the latent part: [M x pair_width].
  Tensor flatten() const;
  // Inverse of flatten for the given data/latent trailing shapes.
  static JointBatch unflatten(const Tensor& flat, const Shape& data_row_shape,
                              std::size_t latent_dim, Provenance provenance);
  static JointBatch from_pairs(std::span<const JointPair> pairs);
};

// eps * real + (1 - eps) * fake for both parts; eps must lie in [0, 1].
JointPair interpolate(const JointPair& real, const JointPair& fake, double eps);
// One eps per example.
JointBatch interpolate(const JointBatch& real, const JointBatch& fake,
                       std::span<const double> eps);

}  // namespace fedgan::models
