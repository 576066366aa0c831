#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedgan/cli/config.hpp"
#include "fedgan/experiment/experiment.hpp"

namespace fedgan::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// An artifact does not match the run it claims to belong to.
class ProvenanceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 2 for configuration and usage problems, 1 for everything else.
int exit_code_for(const std::exception& e);

// Flags shared by the commands that read a configuration.
struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> threads;
  std::optional<std::string> mode;
};

Overrides overrides_from(const CommonOptions& o);

// Record of a run directory: where the configuration came from, its hash,
// the seeds in force, and every file produced with its content hash.
struct ManifestFile {
  std::string path;  // relative to the run directory
  std::string sha1;
  bool reproducible = true;  // false for wall-clock timings
};

struct Manifest {
  std::string config_path;
  std::string config_sha1;
  std::uint64_t seed = 0;
  std::string artifact_dir;
  std::string mode;
  std::string variant;
  std::string dataset_sha1;
  std::vector<ManifestFile> files;

  const ManifestFile* find(const std::string& path) const;
  // Adds or replaces the entry; the list stays sorted by path.
  void record(ManifestFile f);
};

std::string manifest_json(const Manifest& m);
Manifest parse_manifest(const std::string& json_text);

// Content hash of a prepared dataset: every window tensor, label, vm id and
// fault tag of every split.
std::string dataset_sha1(const experiment::ExperimentData& data);

// Reads each monitor's records from the configured source.
std::vector<std::vector<std::vector<data::MetricsRecord>>> load_records(
    const ExperimentConfig& cfg, std::ostream& log);

// File names inside a run directory.
namespace run_files {
inline constexpr const char* manifest = "manifest.json";
inline constexpr const char* config = "config.info";
inline constexpr const char* traces = "traces.csv";
inline constexpr const char* ledger = "ledger.csv";
inline constexpr const char* timing = "timing.csv";
inline constexpr const char* costs = "costs.json";
inline constexpr const char* val = "data/val.ws";
inline constexpr const char* test = "data/test.ws";
inline constexpr const char* global = "models/global.ck";
inline constexpr const char* thresholds = "thresholds.csv";
inline constexpr const char* scores = "scores.csv";
inline constexpr const char* metrics = "metrics.json";
std::string monitor_model(std::size_t slice, std::size_t monitor);
}  // namespace run_files

// train: prepares data, runs the configured mode and writes checkpoints,
// traces, ledger, costs, window stores and the manifest. Returns the run
// directory.
std::string cmd_train(const CommonOptions& opts, std::ostream& log);

// calibrate: one threshold per monitor from the validation windows, or a
// single pooled threshold (centralized runs only).
void cmd_calibrate(const std::string& run_dir, std::optional<double> gamma, bool pooled,
                   std::ostream& log);

// detect: scores and classifies the test windows with the calibrated
// thresholds.
void cmd_detect(const std::string& run_dir, std::ostream& log);

// evaluate: metrics and per-fault recall from the detection scores (running
// detection first when no scores exist yet).
void cmd_evaluate(const std::string& run_dir, std::ostream& log);

// compare: trains every variant on the same prepared data per seed with a
// pooled trainer and writes one row per (variant, seed) plus per-variant means.
struct CompareOptions {
  CommonOptions common;
  std::vector<std::string> variants;
  std::vector<std::uint64_t> seeds;  // empty: the configured seed
};
void cmd_compare(const CompareOptions& opts, std::ostream& log);

// report-costs: cost tables and plot-ready series from one or more runs.
void cmd_report_costs(const std::vector<std::string>& run_dirs, const std::string& out_dir,
                      std::ostream& log);

// synth: one CSV per monitor of the configured topology (with a config), or
// a single CSV at `out`.
struct SynthOptions {
  std::optional<std::string> config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> length;
};
void cmd_synth(const SynthOptions& opts, std::ostream& log);

// gradcheck: the finite-difference oracle suite; false when any check fails.
bool cmd_gradcheck(std::size_t trials, std::uint64_t seed, std::ostream& log);

}  // namespace fedgan::cli
