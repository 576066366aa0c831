#include "fedgan/data/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fedgan/common/checkpoint.hpp"
#include "fedgan/common/error.hpp"
#include "fedgan/common/rng.hpp"

namespace fedgan::data {

Normalizer Normalizer::fit(const std::vector<MetricsRecord>& train) {
  if (train.empty()) throw UsageError("cannot fit a normalizer on an empty training set");
  std::array<double, kFeatureCount> lo = train.front().features, hi = lo;
  for (const auto& r : train) {
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      lo[j] = std::min(lo[j], r.features[j]);
      hi[j] = std::max(hi[j], r.features[j]);
    }
  }
  return Normalizer(lo, hi);
}

Normalizer::Normalizer(std::array<double, kFeatureCount> min,
                       std::array<double, kFeatureCount> max)
    : min_(min), max_(max) {
  for (std::size_t j = 0; j < kFeatureCount; ++j) {
    if (!(max_[j] >= min_[j])) throw UsageError("normalizer max below min");
  }
}

double Normalizer::normalize(std::size_t j, double v) const {
  if (is_constant(j)) return 0.0;
  return (v - min_[j]) / (max_[j] - min_[j]);
}

double Normalizer::denormalize(std::size_t j, double v) const {
  if (is_constant(j)) return min_[j];
  return min_[j] + v * (max_[j] - min_[j]);
}

std::vector<MetricsRecord> Normalizer::apply(std::vector<MetricsRecord> records) const {
  for (auto& r : records) {
    for (std::size_t j = 0; j < kFeatureCount; ++j) r.features[j] = normalize(j, r.features[j]);
  }
  return records;
}

std::vector<MetricsRecord> Normalizer::invert(std::vector<MetricsRecord> records) const {
  for (auto& r : records) {
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      r.features[j] = denormalize(j, r.features[j]);
    }
  }
  return records;
}

const char* to_string(FaultType f) {
  switch (f) {
    case FaultType::none: return "none";
    case FaultType::cpu_endless_loop: return "cpu_endless_loop";
    case FaultType::memory_leak: return "memory_leak";
    case FaultType::disk_io_fault: return "disk_io_fault";
    case FaultType::network_congestion: return "network_congestion";
  }
  return "?";
}

FaultType parse_fault_type(const std::string& s) {
  for (FaultType f : kFaultTypes) {
    if (s == to_string(f)) return f;
  }
  if (s == "none") return FaultType::none;
  throw ConfigError("unknown fault type '" + s + "'");
}

FeatureGroup fault_group(FaultType f) {
  switch (f) {
    case FaultType::cpu_endless_loop: return FeatureGroup::cpu;
    case FaultType::memory_leak: return FeatureGroup::memory;
    case FaultType::disk_io_fault: return FeatureGroup::disk;
    case FaultType::network_congestion: return FeatureGroup::network;
    case FaultType::none: break;
  }
  throw UsageError("fault type 'none' has no feature group");
}

std::vector<WindowedSample> make_windows(const std::vector<MetricsRecord>& records,
                                         std::size_t t, std::size_t stride, std::size_t vm,
                                         std::size_t index_offset) {
  if (t == 0) throw UsageError("window length must be >= 1");
  if (stride == 0) throw UsageError("window stride must be >= 1");
  if (t > records.size()) {
    throw UsageError("window length " + std::to_string(t) + " exceeds record count " +
                     std::to_string(records.size()));
  }
  std::vector<WindowedSample> out;
  for (std::size_t s = 0; s + t <= records.size(); s += stride) {
    WindowedSample w;
    w.x = Tensor({t, kFeatureCount});
    for (std::size_t k = 0; k < t; ++k) {
      const auto& r = records[s + k];
      std::copy(r.features.begin(), r.features.end(), w.x.raw() + k * kFeatureCount);
      if (r.abnormal.value_or(false)) w.abnormal = true;
    }
    w.vm = vm;
    w.start = index_offset + s;
    out.push_back(std::move(w));
  }
  return out;
}

void SplitRatios::validate() const {
  if (train < 0 || val < 0 || test < 0) throw ConfigError("split ratios must be non-negative");
  if (std::abs(train + val + test - 1.0) > 1e-9) {
    throw ConfigError("split ratios must sum to 1");
  }
}

namespace {

template <typename T>
Splits<T> split_impl(const std::vector<T>& items, const SplitRatios& r) {
  r.validate();
  const std::size_t n = items.size();
  const std::size_t n_train = std::min<std::size_t>(n, std::llround(r.train * n));
  const std::size_t n_val = std::min<std::size_t>(n - n_train, std::llround(r.val * n));
  Splits<T> s;
  s.train.assign(items.begin(), items.begin() + n_train);
  s.val.assign(items.begin() + n_train, items.begin() + n_train + n_val);
  s.test.assign(items.begin() + n_train + n_val, items.end());
  return s;
}

}  // namespace

Splits<WindowedSample> split(const std::vector<WindowedSample>& windows, const SplitRatios& r) {
  return split_impl(windows, r);
}

Splits<MetricsRecord> split_records(const std::vector<MetricsRecord>& records,
                                    const SplitRatios& r) {
  return split_impl(records, r);
}

PreparedShard prepare_shard(const std::vector<MetricsRecord>& records, const SplitRatios& r,
                            std::size_t t, std::size_t stride, std::size_t vm) {
  auto parts = split_records(records, r);
  Normalizer norm = Normalizer::fit(parts.train);
  const std::size_t off_val = parts.train.size();
  const std::size_t off_test = off_val + parts.val.size();
  auto window_part = [&](const std::vector<MetricsRecord>& part, std::size_t offset) {
    if (part.size() < t) return std::vector<WindowedSample>{};
    return make_windows(norm.apply(part), t, stride, vm, offset);
  };
  return {norm,
          {window_part(parts.train, 0), window_part(parts.val, off_val),
           window_part(parts.test, off_test)}};
}

void InjectionSpec::validate() const {
  if (!(rate > 0.0 && rate < 1.0)) throw UsageError("injection rate must lie in (0, 1)");
  if (!(magnitude_min >= 0.0 && magnitude_max >= magnitude_min)) {
    throw UsageError("injection magnitudes must satisfy 0 <= min <= max");
  }
}

void apply_fault(Tensor& w, FaultType fault, double m) {
  const std::size_t t = w.dim(0), d = w.dim(1);
  if (d != kFeatureCount) throw DimensionError("fault injection expects 26 features");
  auto shift = [&](std::size_t k, std::size_t j, double delta) { w[k * d + j] += delta; };
  for (std::size_t k = 0; k < t; ++k) {
    // A leak starts at half strength and grows to full strength by the last step.
    const double ramp = 0.5 + 0.5 * static_cast<double>(k + 1) / static_cast<double>(t);
    switch (fault) {
      case FaultType::cpu_endless_loop:
        shift(k, feature_index("cpu_idle"), -m);
        shift(k, feature_index("cpu_system"), m);
        shift(k, feature_index("cpu_wait"), -m);
        break;
      case FaultType::memory_leak:
        shift(k, feature_index("load_avg"), m * ramp);
        shift(k, feature_index("mem_usable_pct"), -m * ramp);
        shift(k, feature_index("mem_usable_mb"), -m * ramp);
        shift(k, feature_index("mem_free_mb"), -m * ramp);
        break;
      case FaultType::disk_io_fault:
        // disk_busy stands in for the device wait share, which has no
        // column of its own in the disk group.
        for (auto name : {"disk_read_rate", "disk_write_rate", "disk_busy"}) {
          shift(k, feature_index(name), m);
        }
        break;
      case FaultType::network_congestion:
        shift(k, feature_index("net_in_packets"), m);
        shift(k, feature_index("net_out_packets"), m);
        shift(k, feature_index("net_dropped"), m);
        break;
      case FaultType::none:
        return;
    }
  }
}

namespace {

std::vector<std::size_t> select_windows(std::size_t n, const InjectionSpec& spec) {
  spec.validate();
  const auto count = static_cast<std::size_t>(std::floor(spec.rate * static_cast<double>(n)));
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(derive_seed(spec.seed, {static_cast<std::uint64_t>(Stream::injection)}));
  // Partial Fisher-Yates: the first `count` slots become the selection.
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.index(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  return idx;
}

void perturb(WindowedSample& w, FaultType f, const InjectionSpec& spec, Rng& rng) {
  const double m = rng.uniform(spec.magnitude_min, spec.magnitude_max);
  apply_fault(w.x, f, m);
  w.abnormal = true;
  w.fault = f;
}

}  // namespace

std::vector<WindowedSample> inject_anomalies(std::vector<WindowedSample> windows,
                                             const InjectionSpec& spec) {
  if (spec.fault == FaultType::none) throw UsageError("injection needs a fault type");
  const auto chosen = select_windows(windows.size(), spec);
  Rng rng(derive_seed(spec.seed, {static_cast<std::uint64_t>(Stream::injection), 1}));
  for (std::size_t i : chosen) perturb(windows[i], spec.fault, spec, rng);
  return windows;
}

std::vector<WindowedSample> inject_mixed(std::vector<WindowedSample> windows,
                                         const InjectionSpec& spec) {
  const auto chosen = select_windows(windows.size(), spec);
  Rng rng(derive_seed(spec.seed, {static_cast<std::uint64_t>(Stream::injection), 1}));
  for (std::size_t k = 0; k < chosen.size(); ++k) {
    perturb(windows[chosen[k]], kFaultTypes[k % kFaultTypes.size()], spec, rng);
  }
  return windows;
}

double FeatureProfile::value(std::size_t tau) const {
  return base + amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(tau) / period +
                                     phase);
}

std::array<FeatureProfile, kFeatureCount> synth_profiles(const SynthSpec& spec) {
  Rng rng(derive_seed(spec.seed, {static_cast<std::uint64_t>(Stream::synthetic), 0}));
  std::array<FeatureProfile, kFeatureCount> p{};
  for (auto& f : p) {
    f.base = rng.uniform(10.0, 100.0);
    f.amplitude = rng.uniform(1.0, 10.0);
    f.period = rng.uniform(spec.min_period, spec.max_period);
    f.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }
  return p;
}

std::vector<MetricsRecord> synth_dataset(const SynthSpec& spec) {
  if (spec.length == 0) throw UsageError("synthetic length must be >= 1");
  if (!(spec.min_period > 0 && spec.max_period >= spec.min_period) || spec.noise < 0) {
    throw UsageError("synthetic periods must be positive and noise non-negative");
  }
  const auto profiles = synth_profiles(spec);
  Rng noise(derive_seed(spec.seed, {static_cast<std::uint64_t>(Stream::synthetic), 1}));
  std::vector<MetricsRecord> out(spec.length);
  for (std::size_t tau = 0; tau < spec.length; ++tau) {
    out[tau].timestamp = std::to_string(60 * tau);
    out[tau].abnormal = false;
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      double v = profiles[j].value(tau);
      if (spec.noise > 0) v += spec.noise * profiles[j].amplitude * noise.normal();
      out[tau].features[j] = v;
    }
  }
  return out;
}

Tensor stack_windows(const std::vector<WindowedSample>& windows) {
  if (windows.empty()) return Tensor({0, 0, kFeatureCount});
  const std::size_t t = windows.front().x.dim(0);
  Tensor out({windows.size(), t, kFeatureCount});
  const std::size_t w = t * kFeatureCount;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    require_same_shape(windows[i].x, windows.front().x, "stack_windows");
    std::copy_n(windows[i].x.raw(), w, out.raw() + i * w);
  }
  return out;
}

void save_windows(const std::string& path, const std::vector<WindowedSample>& windows,
                  const std::vector<std::pair<std::string, std::string>>& meta) {
  Checkpoint ck;
  ck.set_meta("kind", "window-store");
  for (const auto& [k, v] : meta) ck.set_meta(k, v);
  const std::size_t n = windows.size();
  Tensor labels({n}), vms({n}), starts({n}), faults({n});
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = windows[i].abnormal ? 1.0 : 0.0;
    vms[i] = static_cast<double>(windows[i].vm);
    starts[i] = static_cast<double>(windows[i].start);
    faults[i] = static_cast<double>(static_cast<int>(windows[i].fault));
  }
  ck.tensors = {{"windows", stack_windows(windows)}, {"abnormal", labels}, {"vm", vms},
                {"start", starts}, {"fault", faults}};
  save_checkpoint(path, ck);
}

std::vector<WindowedSample> load_windows(const std::string& path) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.meta("kind") != "window-store") {
    throw FormatError("'" + path + "' is not a window store");
  }
  const Tensor& x = ck.tensor("windows");
  const Tensor &labels = ck.tensor("abnormal"), &vms = ck.tensor("vm"),
               &starts = ck.tensor("start"), &faults = ck.tensor("fault");
  const std::size_t n = x.dim(0);
  if (x.rank() != 3 || labels.size() != n || vms.size() != n || starts.size() != n ||
      faults.size() != n) {
    throw FormatError("window store '" + path + "' has inconsistent tensors");
  }
  std::vector<WindowedSample> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].x = x.row(i);
    out[i].abnormal = labels[i] != 0.0;
    out[i].vm = static_cast<std::size_t>(vms[i]);
    out[i].start = static_cast<std::size_t>(starts[i]);
    const int f = static_cast<int>(faults[i]);
    if (f < 0 || f > static_cast<int>(FaultType::network_congestion)) {
      throw FormatError("window store has an invalid fault code");
    }
    out[i].fault = static_cast<FaultType>(f);
  }
  return out;
}

}  // namespace fedgan::data
