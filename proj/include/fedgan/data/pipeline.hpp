#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedgan/common/tensor.hpp"
#include "fedgan/data/records.hpp"

namespace fedgan::data {

// Per-feature min-max scaling fitted once on training records. Constant
// features map to 0; values outside the fitted range are not clipped.
class Normalizer {
 public:
  static Normalizer fit(const std::vector<MetricsRecord>& train);
  Normalizer(std::array<double, kFeatureCount> min, std::array<double, kFeatureCount> max);

  double normalize(std::size_t feature, double value) const;
  double denormalize(std::size_t feature, double value) const;
  std::vector<MetricsRecord> apply(std::vector<MetricsRecord> records) const;
  std::vector<MetricsRecord> invert(std::vector<MetricsRecord> records) const;

  const std::array<double, kFeatureCount>& min() const { return min_; }
  const std::array<double, kFeatureCount>& max() const { return max_; }
  bool is_constant(std::size_t feature) const { return max_[feature] == min_[feature]; }

 private:
  std::array<double, kFeatureCount> min_{}, max_{};
};

enum class FaultType { none, cpu_endless_loop, memory_leak, disk_io_fault, network_congestion };

inline constexpr std::array<FaultType, 4> kFaultTypes = {
    FaultType::cpu_endless_loop, FaultType::memory_leak, FaultType::disk_io_fault,
    FaultType::network_congestion};

const char* to_string(FaultType f);
FaultType parse_fault_type(const std::string& s);
FeatureGroup fault_group(FaultType f);

struct WindowedSample {
  Tensor x;               // [t x 26]
  bool abnormal = false;  // any member record abnormal, or injected
  std::size_t vm = 0;     // source VM / monitor id
  std::size_t start = 0;  // index of the first record in the source sequence
  FaultType fault = FaultType::none;
};

// Windows of t consecutive records every `stride` records. A window is
// abnormal iff a member record is labeled abnormal. Throws UsageError when
// t exceeds the record count, t == 0 or stride == 0.
std::vector<WindowedSample> make_windows(const std::vector<MetricsRecord>& records,
                                         std::size_t t, std::size_t stride = 1,
                                         std::size_t vm = 0, std::size_t index_offset = 0);

struct SplitRatios {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
  void validate() const;  // ConfigError unless non-negative and summing to 1
};

template <typename T>
struct Splits {
  std::vector<T> train, val, test;
};

// Contiguous, order-preserving split: round(n * train), round(n * val), rest.
Splits<WindowedSample> split(const std::vector<WindowedSample>& windows, const SplitRatios& r);
Splits<MetricsRecord> split_records(const std::vector<MetricsRecord>& records,
                                    const SplitRatios& r);

// One VM's path through the pipeline: split records, fit the normalizer on
// the training part, normalize, then window each part independently so no
// window crosses a split boundary.
struct PreparedShard {
  Normalizer normalizer;
  Splits<WindowedSample> windows;
};

PreparedShard prepare_shard(const std::vector<MetricsRecord>& records, const SplitRatios& r,
                            std::size_t t, std::size_t stride, std::size_t vm);

struct InjectionSpec {
  FaultType fault = FaultType::cpu_endless_loop;
  double rate = 0.1;            // fraction of windows perturbed, in (0, 1)
  double magnitude_min = 2.0;   // additive excursion in normalized units
  double magnitude_max = 4.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Picks floor(rate * n) windows by a seeded shuffle and perturbs only the
// features of the fault's group, relabeling those windows abnormal.
std::vector<WindowedSample> inject_anomalies(std::vector<WindowedSample> windows,
                                             const InjectionSpec& spec);

// Same selection rule, assigning the four fault types round-robin over the
// selected windows. spec.fault is ignored.
std::vector<WindowedSample> inject_mixed(std::vector<WindowedSample> windows,
                                         const InjectionSpec& spec);

// Applies one fault signature to a [t x 26] window in place.
void apply_fault(Tensor& window, FaultType fault, double magnitude);

struct SynthSpec {
  std::size_t length = 1000;
  double min_period = 24.0;  // periods drawn in [min_period, max_period]
  double max_period = 96.0;
  double noise = 0.05;       // Gaussian noise std relative to each feature's amplitude
  std::uint64_t seed = 0;
};

struct FeatureProfile {
  double base, amplitude, period, phase;
  double value(std::size_t tau) const;
};

std::array<FeatureProfile, kFeatureCount> synth_profiles(const SynthSpec& spec);
std::vector<MetricsRecord> synth_dataset(const SynthSpec& spec);

// Window store in the checkpoint container format.
void save_windows(const std::string& path, const std::vector<WindowedSample>& windows,
                  const std::vector<std::pair<std::string, std::string>>& meta = {});
std::vector<WindowedSample> load_windows(const std::string& path);

// Stacks window tensors into [n x t x 26].
Tensor stack_windows(const std::vector<WindowedSample>& windows);

}  // namespace fedgan::data
