#include "fedgan/nn/network.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "fedgan/common/error.hpp"
#include "fedgan/common/rng.hpp"
#include "kernels.hpp"

namespace fedgan::nn {
namespace {

constexpr const char* kGateNames[] = {"w_i", "w_f", "w_z", "w_o", "b_i", "b_f", "b_z", "b_o"};

std::string layer_prefix(std::size_t k) { return "layer" + std::to_string(k) + "."; }

}  // namespace

void NetworkSpec::validate() const {
  if (input_dim == 0) throw ConfigError("network input_dim must be positive");
  if (layers.empty()) throw ConfigError("network needs at least one layer");
  if (steps == 0 && (repeat_input || last_step_only)) {
    throw ConfigError("repeat_input/last_step_only require a sequence network (steps > 0)");
  }
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const bool ok = std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if (l.units == 0) {
            throw ConfigError("layer " + std::to_string(k) + " has zero units");
          }
          return !(std::is_same_v<T, VlstmSpec> && steps == 0);
        },
        layers[k]);
    if (!ok) {
      throw ConfigError("layer " + std::to_string(k) +
                        " is a VLSTM but the network is not a sequence network");
    }
  }
}

std::size_t NetworkSpec::output_dim() const {
  return std::visit([](const auto& l) { return l.units; }, layers.back());
}

Shape NetworkSpec::input_shape(std::size_t batch) const {
  if (steps == 0 || repeat_input) return {batch, input_dim};
  return {batch, steps, input_dim};
}

Shape NetworkSpec::output_shape(std::size_t batch) const {
  if (steps == 0 || last_step_only) return {batch, output_dim()};
  return {batch, steps, output_dim()};
}

ParamSet make_layer_params(const NetworkSpec& spec) {
  spec.validate();
  ParamSet params;
  std::size_t in = spec.input_dim;
  for (std::size_t k = 0; k < spec.layers.size(); ++k) {
    const std::string prefix = layer_prefix(k);
    if (const auto* d = std::get_if<DenseSpec>(&spec.layers[k])) {
      params.add(prefix + "weights", Tensor({d->units, in}));
      params.add(prefix + "bias", Tensor({d->units}));
      in = d->units;
    } else {
      const auto& v = std::get<VlstmSpec>(spec.layers[k]);
      VlstmParams z = VlstmParams::zeros(in, v.units);
      const Tensor* blocks[] = {&z.w_i, &z.w_f, &z.w_z, &z.w_o, &z.b_i, &z.b_f, &z.b_z, &z.b_o};
      for (int g = 0; g < 8; ++g) params.add(prefix + kGateNames[g], *blocks[g]);
      in = v.units;
    }
  }
  return params;
}

std::uint64_t Network::next_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1);
}

Network::Network(NetworkSpec spec, std::uint64_t seed)
    : spec_(std::move(spec)), params_(make_layer_params(spec_)), id_(next_id()) {
  build_views();
  Rng rng(seed);
  for (std::size_t k = 0; k < spec_.layers.size(); ++k) {
    const std::size_t first = first_param_[k];
    const bool dense = std::holds_alternative<DenseSpec>(spec_.layers[k]);
    const std::size_t weights = dense ? 1 : 4;
    const std::size_t count = dense ? 2 : 8;
    for (std::size_t j = 0; j < count; ++j) {
      // Biases share the bound of their weight block.
      const std::size_t weight_index = first + (j < weights ? j : j - weights);
      const double fan_in = static_cast<double>(params_[weight_index].dim(1));
      const double bound = 1.0 / std::sqrt(fan_in);
      for (double& v : params_[first + j].data()) v = rng.uniform(-bound, bound);
    }
  }
}

Network::Network(NetworkSpec spec, ParamSet params)
    : spec_(std::move(spec)), params_(std::move(params)), id_(next_id()) {
  make_layer_params(spec_).require_same_structure(params_, "Network parameters");
  for (const auto& e : params_) e.value.require_finite("Network parameters");
  build_views();
}

Network::Network(const Network& other)
    : spec_(other.spec_), params_(other.params_), first_param_(other.first_param_),
      id_(next_id()) {}

Network& Network::operator=(const Network& other) {
  if (this != &other) {
    spec_ = other.spec_;
    params_ = other.params_;
    first_param_ = other.first_param_;
    id_ = next_id();
    version_ = 0;
  }
  return *this;
}

void Network::build_views() {
  first_param_.clear();
  std::size_t index = 0;
  for (const auto& layer : spec_.layers) {
    first_param_.push_back(index);
    index += std::holds_alternative<DenseSpec>(layer) ? 2 : 8;
  }
}

ParamSet& Network::mutable_params() {
  ++version_;
  return params_;
}

void Network::set_params(const ParamSet& params) {
  params_.require_same_structure(params, "Network::set_params");
  ++version_;
  params_ = params;
}

std::size_t Network::layer_input_dim(std::size_t k) const {
  if (k == 0) return spec_.input_dim;
  return std::visit([](const auto& l) { return l.units; }, spec_.layers[k - 1]);
}

DenseLayerParams Network::dense_layer(std::size_t k) const {
  const auto& d = std::get<DenseSpec>(spec_.layers.at(k));
  return {params_[first_param_[k]], params_[first_param_[k] + 1], d.activation};
}

VlstmParams Network::vlstm_layer(std::size_t k) const {
  const auto& v = std::get<VlstmSpec>(spec_.layers.at(k));
  const std::size_t f = first_param_[k];
  VlstmParams p;
  p.input_dim = layer_input_dim(k);
  p.hidden_dim = v.units;
  p.w_i = params_[f];
  p.w_f = params_[f + 1];
  p.w_z = params_[f + 2];
  p.w_o = params_[f + 3];
  p.b_i = params_[f + 4];
  p.b_f = params_[f + 5];
  p.b_z = params_[f + 6];
  p.b_o = params_[f + 7];
  return p;
}

Tensor Network::forward(const Tensor& input) const { return run(input, nullptr); }

Tensor Network::forward(const Tensor& input, Tape& tape) const { return run(input, &tape); }

Tensor Network::run(const Tensor& input, Tape* tape) const {
  if (input.rank() == 0 || input.shape() != spec_.input_shape(input.dim(0))) {
    const std::size_t batch = input.rank() ? input.dim(0) : 0;
    throw DimensionError("network input " + shape_to_string(input.shape()) +
                         " does not match expected " +
                         shape_to_string(spec_.input_shape(batch)));
  }
  const std::size_t batch = input.dim(0);
  const std::size_t steps = std::max<std::size_t>(spec_.steps, 1);
  if (tape) {
    tape->owner_id_ = id_;
    tape->version_ = version_;
    tape->batch_ = batch;
    tape->layers_.assign(spec_.layers.size(), {});
  }

  // Per-step activations [batch x width].
  std::vector<std::vector<double>> seq(steps);
  std::size_t width = spec_.input_dim;
  for (std::size_t t = 0; t < steps; ++t) {
    auto& x = seq[t];
    x.resize(batch * width);
    if (spec_.steps == 0 || spec_.repeat_input) {
      std::copy(input.data().begin(), input.data().end(), x.begin());
    } else {
      for (std::size_t b = 0; b < batch; ++b) {
        std::copy_n(input.raw() + (b * steps + t) * width, width, x.data() + b * width);
      }
    }
  }

  for (std::size_t k = 0; k < spec_.layers.size(); ++k) {
    const std::size_t f = first_param_[k];
    if (const auto* d = std::get_if<DenseSpec>(&spec_.layers[k])) {
      const std::size_t out = d->units;
      if (tape) tape->layers_[k].dense.resize(steps);
      for (std::size_t t = 0; t < steps; ++t) {
        std::vector<double> y(batch * out);
        kernels::affine(seq[t].data(), batch, width, params_[f].raw(), out, params_[f + 1].raw(),
                        y.data());
        for (double& v : y) v = activate(d->activation, v);
        if (tape) {
          tape->layers_[k].dense[t].input = std::move(seq[t]);
          tape->layers_[k].dense[t].output = y;
        }
        seq[t] = std::move(y);
      }
      width = out;
    } else {
      const std::size_t hd = std::get<VlstmSpec>(spec_.layers[k]).units;
      const VlstmView view{width,           hd,
                           params_[f].raw(), params_[f + 1].raw(), params_[f + 2].raw(),
                           params_[f + 3].raw(), params_[f + 4].raw(), params_[f + 5].raw(),
                           params_[f + 6].raw(), params_[f + 7].raw()};
      std::vector<double> h(batch * hd, 0.0), c(batch * hd, 0.0);
      std::vector<VlstmStepCache> caches(steps);
      for (std::size_t t = 0; t < steps; ++t) {
        detail::vlstm_forward(view, seq[t].data(), h.data(), c.data(), batch, caches[t]);
        h = caches[t].h;
        c = caches[t].c;
        seq[t] = h;
      }
      if (tape) tape->layers_[k].vlstm = std::move(caches);
      width = hd;
    }
  }

  if (spec_.steps == 0 || spec_.last_step_only) {
    return Tensor(spec_.output_shape(batch), std::move(seq.back()));
  }
  std::vector<double> out(batch * steps * width);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t b = 0; b < batch; ++b) {
      std::copy_n(seq[t].data() + b * width, width, out.data() + (b * steps + t) * width);
    }
  }
  return Tensor(spec_.output_shape(batch), std::move(out));
}

NetworkGradients Network::backward(const Tape& tape, const Tensor& output_gradient,
                                   bool want_param_grads) const {
  if (tape.owner_id_ != id_ || tape.version_ != version_ ||
      tape.layers_.size() != spec_.layers.size()) {
    throw UsageError("network_backward: tape is stale or was recorded by another network");
  }
  const std::size_t batch = tape.batch_;
  if (output_gradient.shape() != spec_.output_shape(batch)) {
    throw DimensionError("network_backward: output gradient " +
                         shape_to_string(output_gradient.shape()) + " vs output " +
                         shape_to_string(spec_.output_shape(batch)));
  }
  const std::size_t steps = std::max<std::size_t>(spec_.steps, 1);
  std::size_t width = spec_.output_dim();

  std::vector<std::vector<double>> grad(steps, std::vector<double>(batch * width, 0.0));
  if (spec_.steps == 0 || spec_.last_step_only) {
    std::copy(output_gradient.data().begin(), output_gradient.data().end(),
              grad.back().begin());
  } else {
    for (std::size_t t = 0; t < steps; ++t) {
      for (std::size_t b = 0; b < batch; ++b) {
        std::copy_n(output_gradient.raw() + (b * steps + t) * width, width,
                    grad[t].data() + b * width);
      }
    }
  }

  NetworkGradients out;
  out.params = params_.zeros_like();

  for (std::size_t k = spec_.layers.size(); k-- > 0;) {
    const std::size_t f = first_param_[k];
    const std::size_t in = layer_input_dim(k);
    if (const auto* d = std::get_if<DenseSpec>(&spec_.layers[k])) {
      const std::size_t units = d->units;
      for (std::size_t t = 0; t < steps; ++t) {
        const auto& rec = tape.layers_[k].dense[t];
        std::vector<double> da(batch * units);
        for (std::size_t j = 0; j < da.size(); ++j) {
          da[j] = grad[t][j] * derivative_from_output(d->activation, rec.output[j]);
        }
        if (want_param_grads) {
          kernels::accumulate_weight_grad(da.data(), batch, units, rec.input.data(), in,
                                          out.params[f].raw(), out.params[f + 1].raw());
        }
        std::vector<double> dx(batch * in, 0.0);
        kernels::accumulate_input_grad(da.data(), batch, units, params_[f].raw(), in, dx.data());
        grad[t] = std::move(dx);
      }
    } else {
      const std::size_t hd = std::get<VlstmSpec>(spec_.layers[k]).units;
      const VlstmView view{in,
                           hd,
                           params_[f].raw(),
                           params_[f + 1].raw(),
                           params_[f + 2].raw(),
                           params_[f + 3].raw(),
                           params_[f + 4].raw(),
                           params_[f + 5].raw(),
                           params_[f + 6].raw(),
                           params_[f + 7].raw()};
      VlstmGrads g = VlstmGrads::zeros(in, hd);
      std::vector<double> dh_next(batch * hd, 0.0), dc_next(batch * hd, 0.0);
      std::vector<double> dh(batch * hd), dh_prev(batch * hd), dc_prev(batch * hd);
      for (std::size_t t = steps; t-- > 0;) {
        for (std::size_t j = 0; j < dh.size(); ++j) dh[j] = grad[t][j] + dh_next[j];
        std::vector<double> dy(batch * in, 0.0);
        detail::vlstm_backward(view, tape.layers_[k].vlstm[t], dh.data(), dc_next.data(), g,
                               dy.data(), dh_prev.data(), dc_prev.data());
        grad[t] = std::move(dy);
        dh_next.swap(dh_prev);
        dc_next.swap(dc_prev);
      }
      if (want_param_grads) {
        const std::vector<double>* blocks[] = {&g.w_i, &g.w_f, &g.w_z, &g.w_o,
                                               &g.b_i, &g.b_f, &g.b_z, &g.b_o};
        for (std::size_t j = 0; j < 8; ++j) {
          std::copy(blocks[j]->begin(), blocks[j]->end(), out.params[f + j].data().begin());
        }
      }
    }
    width = in;
  }

  out.input = Tensor(spec_.input_shape(batch));
  if (spec_.steps == 0) {
    std::copy(grad[0].begin(), grad[0].end(), out.input.data().begin());
  } else if (spec_.repeat_input) {
    for (std::size_t t = 0; t < steps; ++t) {
      for (std::size_t j = 0; j < grad[t].size(); ++j) out.input[j] += grad[t][j];
    }
  } else {
    for (std::size_t t = 0; t < steps; ++t) {
      for (std::size_t b = 0; b < batch; ++b) {
        std::copy_n(grad[t].data() + b * width, width,
                    out.input.raw() + (b * steps + t) * width);
      }
    }
  }
  return out;
}

}  // namespace fedgan::nn
