#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fedgan/data/records.hpp"
#include "fedgan/detection/detection.hpp"
#include "fedgan/experiment/experiment.hpp"
#include "fedgan/federation/config.hpp"

namespace fedgan::cli {

// Where each monitor's records come from when data.source is "files".
struct MonitorFile {
  std::size_t slice = 0;
  std::size_t monitor = 0;
  std::string path;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  federation::TopologySpec topology;
  federation::TrainingConfig training;
  models::ArchitectureConfig model;

  std::string data_source = "synthetic";  // "synthetic" or "files"
  data::SynthSpec synthetic;               // seed is taken from `seed`
  std::vector<MonitorFile> files;
  data::ColumnMapping columns;
  data::RowErrorPolicy row_errors = data::RowErrorPolicy::skip;
  experiment::DatasetSpec dataset;  // window copied from model.window

  double gamma = 0.9;
  detection::InversionConfig inversion;
  std::string output_dir = "run";

  // Canonical text of the resolved configuration (includes expanded); its
  // hash identifies the run.
  std::string resolved_text;
};

// Reads a nested key-value configuration (boost INFO syntax, with #include).
// Every problem found is listed, one "key: message" per line, in a single
// ConfigError. Unknown keys are errors.
// Overrides replace (or add) dotted keys before validation, so they are part
// of the resolved text and its hash.
using Overrides = std::vector<std::pair<std::string, std::string>>;
ExperimentConfig load_config(const std::string& path, const Overrides& overrides = {});
ExperimentConfig parse_config(const std::string& text, const std::string& base_dir = ".",
                              const Overrides& overrides = {});

// Column mapping file: timestamp, label, delimiter and a features block
// mapping canonical names to file headers.
data::ColumnMapping load_column_mapping(const std::string& path);

std::string sha1_hex(const std::string& bytes);

}  // namespace fedgan::cli
