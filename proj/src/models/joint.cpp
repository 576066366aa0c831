#include "fedgan/models/joint.hpp"

#include <algorithm>

#include "fedgan/common/error.hpp"

namespace fedgan::models {
namespace {

void require_eps(double eps) {
  if (!(eps >= 0.0 && eps <= 1.0)) {
    throw UsageError("interpolation eps must lie in [0, 1], got " + std::to_string(eps));
  }
}

}  // namespace

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::real: return "real";
    case Provenance::fake: return "fake";
    case Provenance::interpolated: return "interpolated";
  }
  return "?";
}

JointBatch::JointBatch(Tensor d, Tensor l, Provenance p)
    : data(std::move(d)), latent(std::move(l)), provenance(p) {
  if (data.rank() < 2 || latent.rank() != 2 || data.dim(0) != latent.dim(0)) {
    throw DimensionError("joint batch parts disagree: data " + shape_to_string(data.shape()) +
                         ", latent " + shape_to_string(latent.shape()));
  }
}

JointPair JointBatch::pair(std::size_t m) const {
  return {data.row(m), latent.row(m), provenance};
}

Tensor JointBatch::flatten() const {
  const std::size_t M = size(), dw = data_width(), lw = latent_width();
  Tensor out({M, dw + lw});
  for (std::size_t m = 0; m < M; ++m) {
    double* dst = out.raw() + m * (dw + lw);
    std::copy_n(data.raw() + m * dw, dw, dst);
    std::copy_n(latent.raw() + m * lw, lw, dst + dw);
  }
  return out;
}

JointBatch JointBatch::unflatten(const Tensor& flat, const Shape& data_row_shape,
                                 std::size_t latent_dim, Provenance provenance) {
  const std::size_t dw = shape_size(data_row_shape);
  if (flat.rank() != 2 || flat.dim(1) != dw + latent_dim) {
    throw DimensionError("cannot unflatten " + shape_to_string(flat.shape()) +
                         " into data " + shape_to_string(data_row_shape) + " + latent " +
                         std::to_string(latent_dim));
  }
  const std::size_t M = flat.dim(0);
  Shape dshape{M};
  dshape.insert(dshape.end(), data_row_shape.begin(), data_row_shape.end());
  Tensor data(dshape), latent({M, latent_dim});
  for (std::size_t m = 0; m < M; ++m) {
    const double* src = flat.raw() + m * (dw + latent_dim);
    std::copy_n(src, dw, data.raw() + m * dw);
    std::copy_n(src + dw, latent_dim, latent.raw() + m * latent_dim);
  }
  return {std::move(data), std::move(latent), provenance};
}

JointBatch JointBatch::from_pairs(std::span<const JointPair> pairs) {
  if (pairs.empty()) throw UsageError("from_pairs needs at least one pair");
  std::vector<Tensor> data, latent;
  for (const auto& p : pairs) {
    data.push_back(p.data_part);
    latent.push_back(p.latent_part);
  }
  return {stack_rows(data), stack_rows(latent), pairs.front().provenance};
}

JointPair interpolate(const JointPair& real, const JointPair& fake, double eps) {
  require_eps(eps);
  require_same_shape(real.data_part, fake.data_part, "interpolate data part");
  require_same_shape(real.latent_part, fake.latent_part, "interpolate latent part");
  JointPair out{fake.data_part, fake.latent_part, Provenance::interpolated};
  out.data_part *= 1.0 - eps;
  out.data_part.add_scaled(real.data_part, eps);
  out.latent_part *= 1.0 - eps;
  out.latent_part.add_scaled(real.latent_part, eps);
  return out;
}

JointBatch interpolate(const JointBatch& real, const JointBatch& fake,
                       std::span<const double> eps) {
  require_same_shape(real.data, fake.data, "interpolate data");
  require_same_shape(real.latent, fake.latent, "interpolate latent");
  if (eps.size() != real.size()) {
    throw DimensionError("interpolate needs one eps per example: " +
                         std::to_string(eps.size()) + " for batch " +
                         std::to_string(real.size()));
  }
  JointBatch out(real.data, real.latent, Provenance::interpolated);
  auto mix = [&](Tensor& dst, const Tensor& r, const Tensor& f) {
    const std::size_t w = r.row_size();
    for (std::size_t m = 0; m < eps.size(); ++m) {
      require_eps(eps[m]);
      for (std::size_t j = 0; j < w; ++j) {
        const std::size_t k = m * w + j;
        dst[k] = eps[m] * r[k] + (1.0 - eps[m]) * f[k];
      }
    }
  };
  mix(out.data, real.data, fake.data);
  mix(out.latent, real.latent, fake.latent);
  return out;
}

}  // namespace fedgan::models
