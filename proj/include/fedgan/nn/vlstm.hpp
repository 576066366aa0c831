#pragma once

#include <vector>

#include "fedgan/common/tensor.hpp"

namespace fedgan::nn {

// Vanilla LSTM cell with the gate wiring
//   i = sig(w_i [y, h_prev, c_prev] + b_i)
//   f = sig(w_f [y, h_prev, c_prev] + b_f)
//   c = f * c_prev + i * tanh(w_z [y, h_prev] + b_z)
//   o = sig(w_o [y, h_prev, c] + b_o)        (output gate reads the new cell)
//   h = o * tanh(c)
// Non-owning pointers to the eight parameter blocks of one cell.
struct VlstmView {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  const double *w_i, *w_f, *w_z, *w_o, *b_i, *b_f, *b_z, *b_o;
};

struct VlstmParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Tensor w_i, w_f, w_z, w_o;  // [H x (in+2H)], [H x (in+2H)], [H x (in+H)], [H x (in+2H)]
  Tensor b_i, b_f, b_z, b_o;  // [H]

  static VlstmParams zeros(std::size_t input_dim, std::size_t hidden_dim);
  void validate() const;
  VlstmView view() const;
};

struct VlstmState {
  Tensor h;
  Tensor c;
};

// Accepts [in]/[H] vectors or [batch x in]/[batch x H] matrices.
VlstmState vlstm_step(const Tensor& y, const Tensor& h_prev, const Tensor& c_prev,
                      const VlstmParams& p);

// Intermediate values of one batched step, kept for backpropagation.
struct VlstmStepCache {
  std::size_t rows = 0;
  std::vector<double> u_if, u_z, u_o;
  std::vector<double> c_prev, i, f, g, c, o, tanh_c, h;
};

struct VlstmGrads {
  std::vector<double> w_i, w_f, w_z, w_o, b_i, b_f, b_z, b_o;
  static VlstmGrads zeros(std::size_t input_dim, std::size_t hidden_dim);
};

namespace detail {

// Raw batched step: y [rows x in], h_prev/c_prev [rows x H].
void vlstm_forward(const VlstmView& p, const double* y, const double* h_prev,
                   const double* c_prev, std::size_t rows, VlstmStepCache& cache);

// Given dL/dh and dL/dc at this step, accumulates parameter grads and writes
// dL/dy (added into dy), dL/dh_prev and dL/dc_prev (overwritten).
void vlstm_backward(const VlstmView& p, const VlstmStepCache& cache, const double* dh,
                    const double* dc, VlstmGrads& grads, double* dy, double* dh_prev,
                    double* dc_prev);

}  // namespace detail
}  // namespace fedgan::nn
