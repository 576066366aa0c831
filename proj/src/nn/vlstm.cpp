#include "fedgan/nn/vlstm.hpp"

#include <algorithm>
#include <cmath>

#include "fedgan/common/error.hpp"
#include "fedgan/nn/activation.hpp"
#include "kernels.hpp"

namespace fedgan::nn {

VlstmParams VlstmParams::zeros(std::size_t input_dim, std::size_t hidden_dim) {
  VlstmParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  const std::size_t wide = input_dim + 2 * hidden_dim;
  p.w_i = Tensor({hidden_dim, wide});
  p.w_f = Tensor({hidden_dim, wide});
  p.w_z = Tensor({hidden_dim, input_dim + hidden_dim});
  p.w_o = Tensor({hidden_dim, wide});
  p.b_i = Tensor({hidden_dim});
  p.b_f = Tensor({hidden_dim});
  p.b_z = Tensor({hidden_dim});
  p.b_o = Tensor({hidden_dim});
  return p;
}

void VlstmParams::validate() const {
  if (input_dim == 0 || hidden_dim == 0) throw ConfigError("VLSTM dimensions must be positive");
  const Shape wide{hidden_dim, input_dim + 2 * hidden_dim};
  const Shape narrow{hidden_dim, input_dim + hidden_dim};
  const Shape bias{hidden_dim};
  auto check = [](const Tensor& t, const Shape& want, const char* name) {
    if (t.shape() != want) {
      throw DimensionError(std::string("VLSTM ") + name + " is " + shape_to_string(t.shape()) +
                           ", expected " + shape_to_string(want));
    }
  };
  check(w_i, wide, "w_i");
  check(w_f, wide, "w_f");
  check(w_z, narrow, "w_z");
  check(w_o, wide, "w_o");
  check(b_i, bias, "b_i");
  check(b_f, bias, "b_f");
  check(b_z, bias, "b_z");
  check(b_o, bias, "b_o");
}

VlstmView VlstmParams::view() const {
  return {input_dim, hidden_dim, w_i.raw(), w_f.raw(), w_z.raw(), w_o.raw(),
          b_i.raw(), b_f.raw(), b_z.raw(), b_o.raw()};
}

VlstmGrads VlstmGrads::zeros(std::size_t input_dim, std::size_t hidden_dim) {
  const std::size_t wide = hidden_dim * (input_dim + 2 * hidden_dim);
  VlstmGrads g;
  g.w_i.assign(wide, 0.0);
  g.w_f.assign(wide, 0.0);
  g.w_z.assign(hidden_dim * (input_dim + hidden_dim), 0.0);
  g.w_o.assign(wide, 0.0);
  g.b_i.assign(hidden_dim, 0.0);
  g.b_f.assign(hidden_dim, 0.0);
  g.b_z.assign(hidden_dim, 0.0);
  g.b_o.assign(hidden_dim, 0.0);
  return g;
}

namespace detail {

namespace {

// Writes [a | b | c] rows into dst; c may be null.
void concat_rows3(const double* a, std::size_t na, const double* b, std::size_t nb,
                  const double* c, std::size_t nc, std::size_t rows, std::vector<double>& dst) {
  const std::size_t width = na + nb + (c ? nc : 0);
  dst.resize(rows * width);
  for (std::size_t r = 0; r < rows; ++r) {
    double* d = dst.data() + r * width;
    std::copy_n(a + r * na, na, d);
    std::copy_n(b + r * nb, nb, d + na);
    if (c) std::copy_n(c + r * nc, nc, d + na + nb);
  }
}

}  // namespace

void vlstm_forward(const VlstmView& p, const double* y, const double* h_prev,
                   const double* c_prev, std::size_t rows, VlstmStepCache& cache) {
  const std::size_t in = p.input_dim;
  const std::size_t hd = p.hidden_dim;
  const std::size_t n = rows * hd;
  cache.rows = rows;
  concat_rows3(y, in, h_prev, hd, c_prev, hd, rows, cache.u_if);
  concat_rows3(y, in, h_prev, hd, nullptr, 0, rows, cache.u_z);
  cache.c_prev.assign(c_prev, c_prev + n);
  cache.i.resize(n);
  cache.f.resize(n);
  cache.g.resize(n);
  cache.c.resize(n);
  cache.o.resize(n);
  cache.tanh_c.resize(n);
  cache.h.resize(n);

  kernels::affine(cache.u_if.data(), rows, in + 2 * hd, p.w_i, hd, p.b_i,
                  cache.i.data());
  kernels::affine(cache.u_if.data(), rows, in + 2 * hd, p.w_f, hd, p.b_f,
                  cache.f.data());
  kernels::affine(cache.u_z.data(), rows, in + hd, p.w_z, hd, p.b_z,
                  cache.g.data());
  for (std::size_t k = 0; k < n; ++k) {
    cache.i[k] = sigmoid(cache.i[k]);
    cache.f[k] = sigmoid(cache.f[k]);
    cache.g[k] = std::tanh(cache.g[k]);
    cache.c[k] = cache.f[k] * cache.c_prev[k] + cache.i[k] * cache.g[k];
  }
  concat_rows3(y, in, h_prev, hd, cache.c.data(), hd, rows, cache.u_o);
  kernels::affine(cache.u_o.data(), rows, in + 2 * hd, p.w_o, hd, p.b_o,
                  cache.o.data());
  for (std::size_t k = 0; k < n; ++k) {
    cache.o[k] = sigmoid(cache.o[k]);
    cache.tanh_c[k] = std::tanh(cache.c[k]);
    cache.h[k] = cache.o[k] * cache.tanh_c[k];
  }
}

void vlstm_backward(const VlstmView& p, const VlstmStepCache& cache, const double* dh,
                    const double* dc_in, VlstmGrads& grads, double* dy, double* dh_prev,
                    double* dc_prev) {
  const std::size_t in = p.input_dim;
  const std::size_t hd = p.hidden_dim;
  const std::size_t rows = cache.rows;
  const std::size_t n = rows * hd;
  const std::size_t wide = in + 2 * hd;

  std::vector<double> dc(dc_in, dc_in + n);
  std::vector<double> da(n);

  // Output gate.
  for (std::size_t k = 0; k < n; ++k) {
    const double o = cache.o[k];
    const double tc = cache.tanh_c[k];
    dc[k] += dh[k] * o * (1.0 - tc * tc);
    da[k] = dh[k] * tc * o * (1.0 - o);
  }
  kernels::accumulate_weight_grad(da.data(), rows, hd, cache.u_o.data(), wide,
                                  grads.w_o.data(), grads.b_o.data());
  std::vector<double> du(rows * wide, 0.0);
  kernels::accumulate_input_grad(da.data(), rows, hd, p.w_o, wide, du.data());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* dur = du.data() + r * wide;
    for (std::size_t j = 0; j < in; ++j) dy[r * in + j] += dur[j];
    for (std::size_t j = 0; j < hd; ++j) {
      dh_prev[r * hd + j] = dur[in + j];
      dc[r * hd + j] += dur[in + hd + j];  // o reads the new cell
    }
  }

  // Cell candidate.
  for (std::size_t k = 0; k < n; ++k) {
    const double g = cache.g[k];
    da[k] = dc[k] * cache.i[k] * (1.0 - g * g);
    dc_prev[k] = dc[k] * cache.f[k];
  }
  kernels::accumulate_weight_grad(da.data(), rows, hd, cache.u_z.data(), in + hd,
                                  grads.w_z.data(), grads.b_z.data());
  std::fill(du.begin(), du.end(), 0.0);
  kernels::accumulate_input_grad(da.data(), rows, hd, p.w_z, in + hd, du.data());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* dur = du.data() + r * (in + hd);
    for (std::size_t j = 0; j < in; ++j) dy[r * in + j] += dur[j];
    for (std::size_t j = 0; j < hd; ++j) dh_prev[r * hd + j] += dur[in + j];
  }

  // Input and forget gates share the [y, h_prev, c_prev] input.
  std::vector<double> da_f(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double i = cache.i[k];
    const double f = cache.f[k];
    da[k] = dc[k] * cache.g[k] * i * (1.0 - i);
    da_f[k] = dc[k] * cache.c_prev[k] * f * (1.0 - f);
  }
  kernels::accumulate_weight_grad(da.data(), rows, hd, cache.u_if.data(), wide,
                                  grads.w_i.data(), grads.b_i.data());
  kernels::accumulate_weight_grad(da_f.data(), rows, hd, cache.u_if.data(), wide,
                                  grads.w_f.data(), grads.b_f.data());
  std::fill(du.begin(), du.end(), 0.0);
  du.resize(rows * wide, 0.0);
  kernels::accumulate_input_grad(da.data(), rows, hd, p.w_i, wide, du.data());
  kernels::accumulate_input_grad(da_f.data(), rows, hd, p.w_f, wide, du.data());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* dur = du.data() + r * wide;
    for (std::size_t j = 0; j < in; ++j) dy[r * in + j] += dur[j];
    for (std::size_t j = 0; j < hd; ++j) {
      dh_prev[r * hd + j] += dur[in + j];
      dc_prev[r * hd + j] += dur[in + hd + j];
    }
  }
}

}  // namespace detail

VlstmState vlstm_step(const Tensor& y, const Tensor& h_prev, const Tensor& c_prev,
                      const VlstmParams& p) {
  p.validate();
  const bool single = y.rank() == 1;
  const std::size_t rows = single ? 1 : y.dim(0);
  const Shape want_y = single ? Shape{p.input_dim} : Shape{rows, p.input_dim};
  const Shape want_h = single ? Shape{p.hidden_dim} : Shape{rows, p.hidden_dim};
  if (y.shape() != want_y) {
    throw DimensionError("vlstm_step: input " + shape_to_string(y.shape()) + " vs expected " +
                         shape_to_string(want_y));
  }
  if (h_prev.shape() != want_h || c_prev.shape() != want_h) {
    throw DimensionError("vlstm_step: state " + shape_to_string(h_prev.shape()) + "/" +
                         shape_to_string(c_prev.shape()) + " vs expected " +
                         shape_to_string(want_h));
  }
  VlstmStepCache cache;
  detail::vlstm_forward(p.view(), y.raw(), h_prev.raw(), c_prev.raw(), rows, cache);
  return {Tensor(want_h, cache.h), Tensor(want_h, cache.c)};
}

}  // namespace fedgan::nn
