#pragma once

#include <cstddef>

// Row-major batched affine kernels shared by dense, VLSTM and penalty code.
// Weights are [out x in]; batches are [rows x in] / [rows x out].
namespace fedgan::nn::kernels {

// y[r][o] = bias[o] + sum_i x[r][i] * w[o][i]   (bias may be null)
inline void affine(const double* x, std::size_t rows, std::size_t in, const double* w,
                   std::size_t out, const double* bias, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x + r * in;
    double* yr = y + r * out;
    for (std::size_t o = 0; o < out; ++o) {
      const double* wo = w + o * in;
      double acc = 0.0;
      for (std::size_t i = 0; i < in; ++i) acc += xr[i] * wo[i];
      yr[o] = bias ? acc + bias[o] : acc;
    }
  }
}

// dw[o][i] += sum_r da[r][o] * x[r][i];  db[o] += sum_r da[r][o]  (db may be null)
inline void accumulate_weight_grad(const double* da, std::size_t rows, std::size_t out,
                                   const double* x, std::size_t in, double* dw, double* db) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* dar = da + r * out;
    const double* xr = x + r * in;
    for (std::size_t o = 0; o < out; ++o) {
      const double g = dar[o];
      if (db) db[o] += g;
      if (g == 0.0) continue;
      double* dwo = dw + o * in;
      for (std::size_t i = 0; i < in; ++i) dwo[i] += g * xr[i];
    }
  }
}

// dx[r][i] += sum_o da[r][o] * w[o][i]
inline void accumulate_input_grad(const double* da, std::size_t rows, std::size_t out,
                                  const double* w, std::size_t in, double* dx) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* dar = da + r * out;
    double* dxr = dx + r * in;
    for (std::size_t o = 0; o < out; ++o) {
      const double g = dar[o];
      if (g == 0.0) continue;
      const double* wo = w + o * in;
      for (std::size_t i = 0; i < in; ++i) dxr[i] += g * wo[i];
    }
  }
}

}  // namespace fedgan::nn::kernels
