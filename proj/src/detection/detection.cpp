#include "fedgan/detection/detection.hpp"

#include <algorithm>
#include <cmath>

#include "fedgan/common/error.hpp"
#include "fedgan/common/rng.hpp"
#include "fedgan/nn/adam.hpp"

namespace fedgan::detection {

void DetectionConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("detection.gamma must lie in [0, 1]");
}

double combine_score(double gamma, double reconstruction, double discrimination) {
  return gamma * reconstruction + (1.0 - gamma) * discrimination;
}

Tensor invert_latent(const models::GeneratorModel& G, const Tensor& windows,
                     const InversionConfig& cfg) {
  const std::size_t n = windows.dim(0);
  Rng rng(derive_seed(cfg.seed, {static_cast<std::uint64_t>(Stream::inversion)}));
  nn::ParamSet z;
  {
    Tensor z0({n, G.latent_dim()});
    for (double& v : z0.data()) v = cfg.init_scale * rng.normal();
    z.add("z", std::move(z0));
  }
  nn::AdamState state = nn::AdamState::for_params(z);
  nn::AdamConfig adam;
  adam.alpha = cfg.learning_rate;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    nn::Tape tape;
    Tensor x = G.generate(z[0], tape);
    require_same_shape(x, windows, "invert_latent");
    Tensor dx(x.shape());
    // Subgradient of the L1 residual; per-window sums keep windows independent.
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = x[i] - windows[i];
      dx[i] = r > 0 ? 1.0 : (r < 0 ? -1.0 : 0.0);
    }
    nn::ParamSet g;
    g.add("z", G.backward_full(tape, dx, false).input);
    nn::adam_step(z, g, state, adam);
  }
  return z[0];
}

namespace {

void require_models(const ScoringModels& m) {
  if (m.generator == nullptr || m.critic == nullptr) {
    throw UsageError("scoring needs a generator and a critic");
  }
}

}  // namespace

std::vector<ScoredSample> score_windows(const std::vector<data::WindowedSample>& windows,
                                        const ScoringModels& m, double gamma,
                                        std::size_t chunk) {
  DetectionConfig{gamma, 0.0}.validate();
  require_models(m);
  if (chunk == 0) throw UsageError("scoring chunk must be positive");
  std::vector<ScoredSample> out(windows.size());
  for (std::size_t begin = 0; begin < windows.size(); begin += chunk) {
    const std::size_t end = std::min(windows.size(), begin + chunk);
    std::vector<data::WindowedSample> part(windows.begin() + begin, windows.begin() + end);
    Tensor x = data::stack_windows(part);
    Tensor latent = m.encoder != nullptr ? m.encoder->encode(x)
                                         : invert_latent(*m.generator, x, m.inversion);
    Tensor recon = m.generator->generate(latent);
    require_same_shape(recon, x, "reconstruction");
    const bool joint = m.critic->input_dim() == x.row_size() + latent.row_size();
    models::JointBatch pairs(x, joint ? latent : Tensor({x.dim(0), 0}), models::Provenance::real);
    const auto d = m.critic->discriminate(pairs);
    const std::size_t w = x.row_size();
    for (std::size_t i = 0; i < part.size(); ++i) {
      ScoredSample& s = out[begin + i];
      double l1 = 0.0;
      for (std::size_t j = 0; j < w; ++j) l1 += std::abs(x[i * w + j] - recon[i * w + j]);
      s.window_id = begin + i;
      s.reconstruction = l1;
      s.discrimination = models::confidence_loss(m.critic->head_mode(), d[i]);
      s.score = combine_score(gamma, s.reconstruction, s.discrimination);
      s.truth = part[i].abnormal;
      s.vm = part[i].vm;
      s.fault = part[i].fault;
    }
  }
  return out;
}

ScoredSample anomaly_score(const Tensor& window, const ScoringModels& m, double gamma) {
  if (window.rank() != 2) {
    throw DimensionError("anomaly_score expects one [t x d] window, got " +
                         shape_to_string(window.shape()));
  }
  data::WindowedSample w;
  w.x = window;
  ScoredSample s = score_windows({w}, m, gamma).front();
  s.truth.reset();
  return s;
}

Calibration calibrate_threshold(std::span<const ScoredSample> validation) {
  Calibration c;
  double sum_n = 0.0, sum_a = 0.0;
  for (const auto& s : validation) {
    if (!s.truth) throw UsageError("calibration samples must be labeled");
    if (*s.truth) {
      sum_a += s.score;
      ++c.n_abnormal;
    } else {
      sum_n += s.score;
      ++c.n_normal;
    }
  }
  if (c.n_abnormal == 0) throw EvaluationError("no injected anomalies in the validation set");
  if (c.n_normal == 0) throw EvaluationError("no normal windows in the validation set");
  c.mean_normal = sum_n / static_cast<double>(c.n_normal);
  c.mean_abnormal = sum_a / static_cast<double>(c.n_abnormal);
  c.threshold = (c.mean_normal + c.mean_abnormal) / 2.0;
  c.degenerate = c.mean_normal == c.mean_abnormal;
  return c;
}

std::map<std::size_t, Calibration> calibrate_by_vm(std::span<const ScoredSample> validation) {
  std::map<std::size_t, std::vector<ScoredSample>> groups;
  for (const auto& s : validation) groups[s.vm].push_back(s);
  std::map<std::size_t, Calibration> out;
  for (const auto& [vm, samples] : groups) {
    try {
      out[vm] = calibrate_threshold(samples);
    } catch (const EvaluationError& e) {
      throw EvaluationError("monitor " + std::to_string(vm) + ": " + e.what());
    }
  }
  return out;
}

bool classify(const ScoredSample& s, double threshold) { return s.score > threshold; }

void classify_all(std::vector<ScoredSample>& samples, double threshold) {
  for (auto& s : samples) s.predicted = classify(s, threshold);
}

void classify_by_vm(std::vector<ScoredSample>& samples,
                    const std::map<std::size_t, Calibration>& thresholds) {
  for (auto& s : samples) {
    auto it = thresholds.find(s.vm);
    if (it == thresholds.end()) {
      throw UsageError("no threshold calibrated for monitor " + std::to_string(s.vm));
    }
    s.predicted = classify(s, it->second.threshold);
  }
}

double Ratio::value() const {
  if (!defined()) throw EvaluationError("ratio undefined: " + undefined_reason);
  return static_cast<double>(numerator) / static_cast<double>(denominator);
}

std::optional<double> Ratio::maybe() const {
  if (!defined()) return std::nullopt;
  return value();
}

namespace {

Ratio make_ratio(std::uint64_t num, std::uint64_t den, const char* reason) {
  Ratio r{num, den, {}};
  if (den == 0) r.undefined_reason = reason;
  return r;
}

}  // namespace

Metrics metrics_from_counts(const ConfusionCounts& c) {
  Metrics m;
  m.counts = c;
  m.precision = make_ratio(c.tp, c.tp + c.fp, "no samples predicted abnormal (TP + FP = 0)");
  m.recall = make_ratio(c.tp, c.tp + c.fn, "no abnormal samples (TP + FN = 0)");
  m.f1 = make_ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn,
                    "no abnormal samples and none predicted (2TP + FP + FN = 0)");
  m.accuracy = make_ratio(c.tp + c.tn, c.total(), "no samples");
  return m;
}

Metrics evaluate(std::span<const ScoredSample> samples) {
  if (samples.empty()) throw UsageError("evaluate needs at least one sample");
  ConfusionCounts c;
  for (const auto& s : samples) {
    if (!s.truth) throw UsageError("evaluate needs labeled samples");
    if (*s.truth) {
      (s.predicted ? c.tp : c.fn) += 1;
    } else {
      (s.predicted ? c.fp : c.tn) += 1;
    }
  }
  return metrics_from_counts(c);
}

std::map<data::FaultType, Ratio> per_fault_recall(std::span<const ScoredSample> samples) {
  std::map<data::FaultType, Ratio> out;
  for (auto f : data::kFaultTypes) out[f] = make_ratio(0, 0, "no windows of this fault type");
  for (const auto& s : samples) {
    if (s.fault == data::FaultType::none) continue;
    Ratio& r = out[s.fault];
    ++r.denominator;
    if (s.predicted) ++r.numerator;
    r.undefined_reason.clear();
  }
  return out;
}

std::vector<SweepPoint> threshold_sweep(std::span<const ScoredSample> samples,
                                        std::size_t points) {
  if (samples.empty()) throw UsageError("threshold sweep needs samples");
  if (points < 2) throw UsageError("threshold sweep needs at least two points");
  double lo = samples.front().score, hi = lo;
  for (const auto& s : samples) {
    lo = std::min(lo, s.score);
    hi = std::max(hi, s.score);
  }
  std::vector<ScoredSample> work(samples.begin(), samples.end());
  std::vector<SweepPoint> out;
  for (std::size_t k = 0; k < points; ++k) {
    const double th = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1);
    classify_all(work, th);
    out.push_back({th, evaluate(work)});
  }
  return out;
}

}  // namespace fedgan::detection
