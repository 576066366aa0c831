#include "fedgan/experiment/experiment.hpp"

#include <algorithm>

#include "fedgan/common/error.hpp"
#include "fedgan/common/rng.hpp"

namespace fedgan::experiment {

federation::TrainingData ExperimentData::training() const {
  federation::TrainingData d;
  for (const auto& slice : monitors) {
    auto& out = d.shards.emplace_back();
    for (const MonitorData& m : slice) out.push_back(data::stack_windows(m.train));
  }
  return d;
}

std::vector<data::WindowedSample> ExperimentData::all(bool test) const {
  std::vector<data::WindowedSample> out;
  for (const auto& slice : monitors) {
    for (const MonitorData& m : slice) {
      const auto& part = test ? m.test : m.val;
      out.insert(out.end(), part.begin(), part.end());
    }
  }
  return out;
}

std::size_t ExperimentData::windows_per_monitor() const {
  std::size_t most = 0;
  for (const auto& slice : monitors) {
    for (const MonitorData& m : slice) most = std::max(most, m.train.size());
  }
  return most;
}

std::size_t vm_id(const federation::TopologySpec& topo, std::size_t slice, std::size_t monitor) {
  return slice * topo.monitors_per_slice + monitor;
}

ExperimentData prepare_experiment(
    const federation::TopologySpec& topo,
    const std::vector<std::vector<std::vector<data::MetricsRecord>>>& records,
    const DatasetSpec& spec) {
  topo.validate();
  if (records.size() != topo.slices) {
    throw ConfigError("expected record sets for " + std::to_string(topo.slices) + " slices, got " +
                      std::to_string(records.size()));
  }
  ExperimentData out;
  out.monitors.resize(topo.slices);
  for (std::size_t s = 0; s < topo.slices; ++s) {
    if (records[s].size() != topo.monitors_per_slice) {
      throw ConfigError("slice " + std::to_string(s) + " has " + std::to_string(records[s].size()) +
                        " monitors' records, expected " + std::to_string(topo.monitors_per_slice));
    }
    for (std::size_t n = 0; n < topo.monitors_per_slice; ++n) {
      const std::size_t vm = vm_id(topo, s, n);
      data::PreparedShard shard =
          data::prepare_shard(records[s][n], spec.ratios, spec.window, spec.stride, vm);
      MonitorData m{s, n, shard.normalizer, std::move(shard.windows.train), {}, {}};
      auto inject = [&](std::vector<data::WindowedSample> w, std::uint64_t part) {
        if (spec.anomaly_rate <= 0.0 || w.empty()) return w;
        data::InjectionSpec inj;
        inj.rate = spec.anomaly_rate;
        inj.magnitude_min = spec.magnitude_min;
        inj.magnitude_max = spec.magnitude_max;
        inj.seed = derive_seed(spec.seed, {vm, part});
        return data::inject_mixed(std::move(w), inj);
      };
      m.val = inject(std::move(shard.windows.val), 1);
      m.test = inject(std::move(shard.windows.test), 2);
      if (m.train.empty()) {
        throw ConfigError("monitor " + std::to_string(vm) + " has no training windows");
      }
      out.monitors[s].push_back(std::move(m));
    }
  }
  return out;
}

std::vector<std::vector<std::vector<data::MetricsRecord>>> synthetic_records(
    const federation::TopologySpec& topo, const data::SynthSpec& base) {
  std::vector<std::vector<std::vector<data::MetricsRecord>>> out(topo.slices);
  for (std::size_t s = 0; s < topo.slices; ++s) {
    for (std::size_t n = 0; n < topo.monitors_per_slice; ++n) {
      data::SynthSpec spec = base;
      spec.seed = derive_seed(base.seed, {static_cast<std::uint64_t>(Stream::synthetic), s, n});
      out[s].push_back(data::synth_dataset(spec));
    }
  }
  return out;
}

DetectionReport detect_and_evaluate(const federation::TrainingResult& trained,
                                    const ExperimentData& data, double gamma,
                                    const detection::InversionConfig& inversion) {
  DetectionReport report;
  std::vector<detection::ScoredSample> val_all;
  for (std::size_t s = 0; s < data.monitors.size(); ++s) {
    for (std::size_t n = 0; n < data.monitors[s].size(); ++n) {
      const federation::NodeModels& nm = trained.monitors.at(s).at(n);
      detection::ScoringModels models{&nm.generator, nm.encoder ? &*nm.encoder : nullptr,
                                      &nm.critic, inversion};
      const MonitorData& md = data.monitors[s][n];
      auto val = detection::score_windows(md.val, models, gamma);
      auto test = detection::score_windows(md.test, models, gamma);
      val_all.insert(val_all.end(), val.begin(), val.end());
      report.test.insert(report.test.end(), test.begin(), test.end());
    }
  }
  report.calibration = detection::calibrate_by_vm(val_all);
  detection::classify_by_vm(report.test, report.calibration);
  report.metrics = detection::evaluate(report.test);
  report.fault_recall = detection::per_fault_recall(report.test);
  return report;
}

}  // namespace fedgan::experiment
