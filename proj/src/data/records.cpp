#include "fedgan/data/records.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "fedgan/common/error.hpp"

namespace fedgan::data {
namespace {

constexpr std::array<std::string_view, kFeatureCount> kNames = {
    "cpu_idle",       "cpu_wait",         "cpu_system",          "cpu_stolen",
    "disk_used",      "disk_read_requests", "disk_write_requests", "disk_read_freq",
    "disk_write_freq", "disk_read_rate",  "disk_write_rate",     "disk_busy",
    "load_avg",       "mem_usable_pct",   "mem_usable_mb",       "mem_free_mb",
    "mem_total_mb",   "mem_buffered_mb",  "mem_cached_mb",       "net_in_bytes",
    "net_out_bytes",  "net_in_errors",    "net_out_errors",      "net_in_packets",
    "net_out_packets", "net_dropped"};

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// Splits one line, honouring double-quoted fields.
std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      out.push_back(trim(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

bool is_missing(const std::string& cell) {
  std::string lower;
  for (char c : cell) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return lower.empty() || lower == "na" || lower == "nan" || lower == "null";
}

std::optional<double> parse_number(const std::string& cell) {
  double v = 0;
  const char* first = cell.data();
  const char* last = first + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<bool> parse_label(const std::string& cell) {
  std::string lower;
  for (char c : cell) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "1" || lower == "true" || lower == "abnormal" || lower == "anomaly") return true;
  if (lower == "0" || lower == "false" || lower == "normal") return false;
  return std::nullopt;
}

struct RawRow {
  MetricsRecord record;
  std::array<bool, kFeatureCount> missing{};
};

// Fills short gaps per feature and drops rows that remain incomplete.
std::vector<MetricsRecord> resolve_missing(std::vector<RawRow> rows, LoadReport& report) {
  std::vector<bool> drop(rows.size(), false);
  for (std::size_t j = 0; j < kFeatureCount; ++j) {
    std::size_t i = 0;
    while (i < rows.size()) {
      if (!rows[i].missing[j]) {
        ++i;
        continue;
      }
      std::size_t end = i;
      while (end < rows.size() && rows[end].missing[j]) ++end;
      const std::size_t gap = end - i;
      const bool bounded = i > 0 && end < rows.size();
      if (bounded && gap <= kMaxInterpolatedGap) {
        const double a = rows[i - 1].record.features[j];
        const double b = rows[end].record.features[j];
        for (std::size_t k = i; k < end; ++k) {
          const double frac = static_cast<double>(k - i + 1) / static_cast<double>(gap + 1);
          rows[k].record.features[j] = a + (b - a) * frac;
          ++report.cells_interpolated;
        }
      } else {
        for (std::size_t k = i; k < end; ++k) drop[k] = true;
      }
      i = end;
    }
  }
  std::vector<MetricsRecord> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (drop[i]) {
      ++report.rows_dropped_missing;
    } else {
      out.push_back(std::move(rows[i].record));
    }
  }
  return out;
}

}  // namespace

const std::array<std::string_view, kFeatureCount>& feature_names() { return kNames; }

std::size_t feature_index(std::string_view name) {
  for (std::size_t j = 0; j < kFeatureCount; ++j) {
    if (kNames[j] == name) return j;
  }
  throw ConfigError("unknown feature name '" + std::string(name) + "'");
}

FeatureGroup feature_group(std::size_t j) {
  if (j < 4) return FeatureGroup::cpu;
  if (j < 12) return FeatureGroup::disk;
  if (j < 19) return FeatureGroup::memory;
  return FeatureGroup::network;
}

std::pair<std::size_t, std::size_t> group_range(FeatureGroup g) {
  switch (g) {
    case FeatureGroup::cpu: return {0, 4};
    case FeatureGroup::disk: return {4, 12};
    case FeatureGroup::memory: return {12, 19};
    case FeatureGroup::network: return {19, 26};
  }
  return {0, 0};
}

const char* to_string(FeatureGroup g) {
  switch (g) {
    case FeatureGroup::cpu: return "cpu";
    case FeatureGroup::disk: return "disk";
    case FeatureGroup::memory: return "memory";
    case FeatureGroup::network: return "network";
  }
  return "?";
}

ColumnMapping::ColumnMapping() {
  for (std::size_t j = 0; j < kFeatureCount; ++j) features[j] = std::string(kNames[j]);
}

std::vector<MetricsRecord> read_dataset(std::istream& in, const ColumnMapping& mapping,
                                        RowErrorPolicy policy, LoadReport* report) {
  LoadReport local;
  LoadReport& rep = report != nullptr ? *report : local;
  std::string line;
  if (!std::getline(in, line)) throw FormatError("dataset is empty: a header row is required");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_line(line, mapping.delimiter);
  auto find_col = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] == name) return c;
    }
    return std::nullopt;
  };

  std::array<std::size_t, kFeatureCount> cols{};
  for (std::size_t j = 0; j < kFeatureCount; ++j) {
    auto c = find_col(mapping.features[j]);
    if (!c) {
      throw FormatError("missing mapped column '" + mapping.features[j] + "' for feature " +
                        std::string(kNames[j]));
    }
    cols[j] = *c;
  }
  const auto ts_col = find_col(mapping.timestamp);
  const auto label_col = mapping.label.empty() ? std::nullopt : find_col(mapping.label);

  std::vector<RawRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ++rep.rows_read;
    const auto cells = split_line(line, mapping.delimiter);
    std::string problem;
    RawRow row;
    if (cells.size() != header.size()) {
      problem = "expected " + std::to_string(header.size()) + " fields, found " +
                std::to_string(cells.size());
    } else {
      if (ts_col) row.record.timestamp = cells[*ts_col];
      for (std::size_t j = 0; j < kFeatureCount && problem.empty(); ++j) {
        const std::string& cell = cells[cols[j]];
        if (is_missing(cell)) {
          row.missing[j] = true;
        } else if (auto v = parse_number(cell)) {
          row.record.features[j] = *v;
        } else {
          problem = "column '" + mapping.features[j] + "' has unparseable value '" + cell + "'";
        }
      }
      if (problem.empty() && label_col && !is_missing(cells[*label_col])) {
        row.record.abnormal = parse_label(cells[*label_col]);
        if (!row.record.abnormal) {
          problem = "unrecognized label '" + cells[*label_col] + "'";
        }
      }
    }
    if (!problem.empty()) {
      const std::string msg = "line " + std::to_string(line_no) + ": " + problem;
      if (policy == RowErrorPolicy::fail) throw FormatError(msg);
      rep.diagnostics.push_back(msg);
      ++rep.rows_skipped;
      continue;
    }
    rows.push_back(std::move(row));
  }
  return resolve_missing(std::move(rows), rep);
}

std::vector<MetricsRecord> load_dataset(const std::string& path, const ColumnMapping& mapping,
                                        RowErrorPolicy policy, LoadReport* report) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open dataset '" + path + "'");
  return read_dataset(in, mapping, policy, report);
}

void write_dataset(std::ostream& out, const std::vector<MetricsRecord>& records) {
  out << "timestamp";
  for (auto name : kNames) out << ',' << name;
  out << ",label\n";
  out << std::setprecision(17);
  for (const auto& r : records) {
    out << r.timestamp;
    for (double v : r.features) out << ',' << v;
    out << ',';
    if (r.abnormal) out << (*r.abnormal ? 1 : 0);
    out << '\n';
  }
}

}  // namespace fedgan::data
