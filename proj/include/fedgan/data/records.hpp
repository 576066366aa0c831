#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fedgan::data {

inline constexpr std::size_t kFeatureCount = 26;

// Canonical feature order: CPU 0-3, disk 4-11, memory 12-18, network 19-25.
enum class FeatureGroup { cpu, disk, memory, network };

const std::array<std::string_view, kFeatureCount>& feature_names();
std::size_t feature_index(std::string_view name);  // ConfigError when unknown
FeatureGroup feature_group(std::size_t feature);
// Half-open [first, last) feature range of a group.
std::pair<std::size_t, std::size_t> group_range(FeatureGroup g);
const char* to_string(FeatureGroup g);

struct MetricsRecord {
  std::string timestamp;
  std::array<double, kFeatureCount> features{};
  std::optional<bool> abnormal;  // ground truth when the source has a label column
};

// Binds source column names to the canonical schema.
struct ColumnMapping {
  std::string timestamp = "timestamp";
  std::array<std::string, kFeatureCount> features;  // defaults to the canonical names
  std::string label = "label";                      // optional in the file
  char delimiter = ',';

  ColumnMapping();
};

enum class RowErrorPolicy { skip, fail };

struct LoadReport {
  std::size_t rows_read = 0;
  std::size_t rows_skipped = 0;      // unparseable rows dropped under the skip policy
  std::size_t cells_interpolated = 0;
  std::size_t rows_dropped_missing = 0;  // rows inside gaps longer than the limit
  std::vector<std::string> diagnostics;  // "line N: ..." messages
};

// Missing cells (empty, "na", "nan", "null") inside runs of at most
// `max_gap` rows are linearly interpolated from the neighbouring rows of the
// same feature; rows in longer or unbounded runs are dropped.
inline constexpr std::size_t kMaxInterpolatedGap = 3;

std::vector<MetricsRecord> read_dataset(std::istream& in, const ColumnMapping& mapping,
                                        RowErrorPolicy policy = RowErrorPolicy::fail,
                                        LoadReport* report = nullptr);
std::vector<MetricsRecord> load_dataset(const std::string& path, const ColumnMapping& mapping,
                                        RowErrorPolicy policy = RowErrorPolicy::fail,
                                        LoadReport* report = nullptr);

// Writes records with the canonical header (timestamp, 26 features, label).
void write_dataset(std::ostream& out, const std::vector<MetricsRecord>& records);

}  // namespace fedgan::data
