#pragma once

#include <map>
#include <vector>

#include "fedgan/data/pipeline.hpp"
#include "fedgan/detection/detection.hpp"
#include "fedgan/federation/training.hpp"

namespace fedgan::experiment {

// One monitor's prepared data: its own normalizer, clean training windows,
// and validation/test windows with injected faults.
struct MonitorData {
  std::size_t slice = 0;
  std::size_t monitor = 0;
  data::Normalizer normalizer;
  std::vector<data::WindowedSample> train, val, test;
};

struct DatasetSpec {
  std::size_t window = 8;
  std::size_t stride = 1;
  data::SplitRatios ratios;
  double anomaly_rate = 0.1;  // injected into validation and test
  double magnitude_min = 2.0;
  double magnitude_max = 4.0;
  std::uint64_t seed = 1;
};

struct ExperimentData {
  std::vector<std::vector<MonitorData>> monitors;  // [slice][monitor]

  federation::TrainingData training() const;
  std::vector<data::WindowedSample> all(bool test) const;  // val or test of every monitor
  std::size_t windows_per_monitor() const;                  // largest training shard
};

// Global monitor index used as the window vm id.
std::size_t vm_id(const federation::TopologySpec& topo, std::size_t slice, std::size_t monitor);

// Splits, normalizes and windows each monitor's records, then injects a
// round-robin mix of the four fault types into validation and test.
ExperimentData prepare_experiment(const federation::TopologySpec& topo,
                                  const std::vector<std::vector<std::vector<data::MetricsRecord>>>& records,
                                  const DatasetSpec& spec);

// Records for every monitor of the topology from the seasonal generator; each
// monitor gets its own seed derived from `base`.
std::vector<std::vector<std::vector<data::MetricsRecord>>> synthetic_records(
    const federation::TopologySpec& topo, const data::SynthSpec& base);

struct DetectionReport {
  std::map<std::size_t, detection::Calibration> calibration;  // per vm
  std::vector<detection::ScoredSample> test;                 // classified test windows
  detection::Metrics metrics;
  std::map<data::FaultType, detection::Ratio> fault_recall;
};

// Scores validation and test windows of each monitor with that monitor's
// models, calibrates one threshold per monitor on validation, and evaluates
// the test windows.
DetectionReport detect_and_evaluate(const federation::TrainingResult& trained,
                                    const ExperimentData& data, double gamma,
                                    const detection::InversionConfig& inversion = {});

}  // namespace fedgan::experiment
