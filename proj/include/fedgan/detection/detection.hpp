#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedgan/data/pipeline.hpp"
#include "fedgan/models/models.hpp"

namespace fedgan::detection {

struct DetectionConfig {
  double gamma = 0.9;
  double threshold = 0.0;

  void validate() const;  // ConfigError unless 0 <= gamma <= 1
};

struct ScoredSample {
  std::size_t window_id = 0;
  double score = 0.0;           // gamma * reconstruction + (1 - gamma) * discrimination
  double reconstruction = 0.0;  // ||x - G(E(x))||_1
  double discrimination = 0.0;  // cross-entropy of the critic's "real" confidence
  std::optional<bool> truth;
  bool predicted = false;
  std::size_t vm = 0;
  data::FaultType fault = data::FaultType::none;
};

double combine_score(double gamma, double reconstruction, double discrimination);

// Latent search used when a model family has no encoder: Adam on z
// minimizing ||x - G(z)||_1, started from a seeded small Gaussian.
struct InversionConfig {
  std::size_t steps = 60;
  double learning_rate = 0.05;
  double init_scale = 0.1;
  std::uint64_t seed = 0;
};

struct ScoringModels {
  const models::GeneratorModel* generator = nullptr;
  const models::EncoderModel* encoder = nullptr;  // null: latent inversion
  const models::CriticModel* critic = nullptr;
  InversionConfig inversion;
};

// Best latent codes for a batch of windows [n x t x d].
Tensor invert_latent(const models::GeneratorModel& G, const Tensor& windows,
                     const InversionConfig& cfg);

// Scores one window [t x d].
ScoredSample anomaly_score(const Tensor& window, const ScoringModels& m, double gamma);

// Scores a batch; window_id is the position in `windows`.
std::vector<ScoredSample> score_windows(const std::vector<data::WindowedSample>& windows,
                                        const ScoringModels& m, double gamma,
                                        std::size_t chunk = 256);

struct Calibration {
  double threshold = 0.0;
  double mean_normal = 0.0;
  double mean_abnormal = 0.0;
  std::size_t n_normal = 0;
  std::size_t n_abnormal = 0;
  bool degenerate = false;  // class means coincide
};

// Midpoint of the mean normal and mean abnormal scores over labeled samples.
// Throws EvaluationError when either class is empty.
Calibration calibrate_threshold(std::span<const ScoredSample> validation);
// One calibration per monitor (vm id).
std::map<std::size_t, Calibration> calibrate_by_vm(std::span<const ScoredSample> validation);

// abnormal iff score > threshold
bool classify(const ScoredSample& s, double threshold);
void classify_all(std::vector<ScoredSample>& samples, double threshold);
void classify_by_vm(std::vector<ScoredSample>& samples,
                    const std::map<std::size_t, Calibration>& thresholds);

struct ConfusionCounts {
  std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
  std::uint64_t total() const { return tp + tn + fp + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

// An exact ratio; undefined (with a reason) when the denominator is zero.
struct Ratio {
  std::uint64_t numerator = 0;
  std::uint64_t denominator = 0;
  std::string undefined_reason;

  bool defined() const { return denominator != 0; }
  double value() const;  // EvaluationError when undefined
  std::optional<double> maybe() const;
};

struct Metrics {
  ConfusionCounts counts;
  Ratio precision, recall, f1, accuracy;
};

Metrics metrics_from_counts(const ConfusionCounts& c);
// Uses truth and predicted of every sample; throws UsageError on empty input
// or an unlabeled sample.
Metrics evaluate(std::span<const ScoredSample> samples);

// Recall restricted to windows injected with each fault type.
std::map<data::FaultType, Ratio> per_fault_recall(std::span<const ScoredSample> samples);

struct SweepPoint {
  double threshold;
  Metrics metrics;
};

// Evaluates `points` evenly spaced thresholds between the lowest and highest
// score (inclusive).
std::vector<SweepPoint> threshold_sweep(std::span<const ScoredSample> samples,
                                        std::size_t points);

}  // namespace fedgan::detection
