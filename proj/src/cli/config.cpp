#include "fedgan/cli/config.hpp"

#include <openssl/evp.h>

#include <boost/property_tree/info_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <set>
#include <sstream>

#include "fedgan/common/error.hpp"

namespace fedgan::cli {

namespace pt = boost::property_tree;
namespace fs = std::filesystem;

namespace {

// Typed access to a property tree that records every problem instead of
// stopping at the first, and remembers which keys were consumed.
class FieldReader {
 public:
  explicit FieldReader(const pt::ptree& root) : root_(root) {}

  template <typename T>
  void read(const std::string& key, T& target) {
    known_.insert(key);
    auto node = root_.get_child_optional(pt::ptree::path_type(key, '.'));
    if (!node) return;
    const std::string text = node->get_value<std::string>();
    if (!node->empty()) {
      error(key, "expected a value, found a block");
      return;
    }
    try {
      target = convert<T>(text);
    } catch (const std::exception& e) {
      error(key, e.what());
    }
  }

  void mark_block(const std::string& key) { known_.insert(key); }

  void error(const std::string& key, const std::string& message) {
    errors_.push_back(key + ": " + message);
  }

  // Runs a validate() and files its ConfigError under `key`.
  void check(const std::string& key, const std::function<void()>& fn) {
    try {
      fn();
    } catch (const ConfigError& e) {
      error(key, e.what());
    } catch (const UsageError& e) {
      error(key, e.what());
    }
  }

  void report_unknown(const pt::ptree& node, const std::string& prefix,
                      const std::set<std::string>& opaque) {
    for (const auto& [name, child] : node) {
      const std::string key = prefix.empty() ? name : prefix + "." + name;
      if (opaque.count(key)) continue;
      if (!known_.count(key)) {
        error(key, "unknown key");
        continue;
      }
      report_unknown(child, key, opaque);
    }
  }

  const std::vector<std::string>& errors() const { return errors_; }

 private:
  template <typename T>
  static T convert(const std::string& s) {
    if constexpr (std::is_same_v<T, std::string>) {
      return s;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (s == "true" || s == "yes" || s == "1") return true;
      if (s == "false" || s == "no" || s == "0") return false;
      throw std::runtime_error("expected true or false, got '" + s + "'");
    } else if constexpr (std::is_floating_point_v<T>) {
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(s, &used);
      } catch (...) {
        used = 0;
      }
      if (used == 0 || used != s.size() || !std::isfinite(v)) {
        throw std::runtime_error("expected a number, got '" + s + "'");
      }
      return static_cast<T>(v);
    } else {
      static_assert(std::is_unsigned_v<T>);
      if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
        throw std::runtime_error("expected a non-negative integer, got '" + s + "'");
      }
      try {
        return static_cast<T>(std::stoull(s));
      } catch (...) {
        throw std::runtime_error("integer out of range: '" + s + "'");
      }
    }
  }

  const pt::ptree& root_;
  std::set<std::string> known_;
  std::vector<std::string> errors_;
};

template <typename E>
void read_enum(FieldReader& r, const std::string& key, E& target,
               const std::function<E(const std::string&)>& parse) {
  std::optional<std::string> text;
  std::string s;
  r.read(key, s);
  if (s.empty()) return;
  try {
    target = parse(s);
  } catch (const std::exception& e) {
    r.error(key, e.what());
  }
}

std::string resolve_path(const std::string& base_dir, const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute()) return p;
  return fs::absolute(fs::path(base_dir) / p).lexically_normal().string();
}

// Repeated keys (typically a block pulled in by #include and then set again)
// are merged: later leaves win and blocks merge recursively. Repeated
// data.files.monitor entries are kept as a list.
void merge_into(pt::ptree& dst, const pt::ptree& src, const std::string& path) {
  for (const auto& [key, child] : src) {
    const std::string child_path = path.empty() ? key : path + "." + key;
    auto existing = dst.find(key);
    if (child_path == "data.files.monitor" || existing == dst.not_found()) {
      pt::ptree fresh;
      fresh.data() = child.data();
      merge_into(fresh, child, child_path);
      dst.push_back({key, fresh});
      continue;
    }
    pt::ptree& target = existing->second;
    if (child.empty()) {
      target = pt::ptree(child.data());
    } else {
      if (!child.data().empty()) target.data() = child.data();
      merge_into(target, child, child_path);
    }
  }
}

pt::ptree merged(const pt::ptree& raw) {
  pt::ptree out;
  merge_into(out, raw, "");
  return out;
}

ExperimentConfig from_tree(const pt::ptree& raw_root, const std::string& base_dir,
                           const Overrides& overrides) {
  pt::ptree root = merged(raw_root);
  for (const auto& [k, v] : overrides) root.put(pt::ptree::path_type(k, '.'), v);
  ExperimentConfig c;
  FieldReader r(root);

  r.read("seed", c.seed);

  r.mark_block("topology");
  r.read("topology.slices", c.topology.slices);
  r.read("topology.monitors_per_slice", c.topology.monitors_per_slice);
  r.read("topology.keep_data_in_slice", c.topology.keep_data_in_slice);

  auto& t = c.training;
  r.mark_block("training");
  read_enum<federation::Mode>(r, "training.mode", t.mode, federation::parse_mode);
  read_enum<models::Variant>(r, "training.variant", t.variant, models::parse_variant);
  r.read("training.iterations", t.iterations);
  r.read("training.critic_iterations", t.critic_iterations);
  r.read("training.local_iterations", t.local_iterations);
  r.read("training.batch_size", t.batch_size);
  r.read("training.penalty", t.penalty);
  r.read("training.clip", t.clip);
  r.read("training.threads", t.threads);
  read_enum<models::NoiseDistribution>(r, "training.noise", t.noise,
                                       models::parse_noise_distribution);
  r.mark_block("training.adam");
  r.read("training.adam.alpha", t.adam.alpha);
  r.read("training.adam.beta1", t.adam.beta1);
  r.read("training.adam.beta2", t.adam.beta2);
  r.read("training.adam.epsilon", t.adam.epsilon);

  auto& m = c.model;
  r.mark_block("model");
  r.read("model.window", m.window);
  r.read("model.latent_dim", m.latent_dim);
  r.read("model.hidden", m.hidden);
  r.read("model.critic_hidden", m.critic_hidden);
  read_enum<models::HeadMode>(r, "model.critic_head", m.critic_head, models::parse_head_mode);

  r.mark_block("data");
  r.read("data.source", c.data_source);
  if (c.data_source != "synthetic" && c.data_source != "files") {
    r.error("data.source", "expected synthetic or files, got '" + c.data_source + "'");
  }
  r.mark_block("data.synthetic");
  r.read("data.synthetic.length", c.synthetic.length);
  r.read("data.synthetic.min_period", c.synthetic.min_period);
  r.read("data.synthetic.max_period", c.synthetic.max_period);
  r.read("data.synthetic.noise", c.synthetic.noise);
  r.read("data.stride", c.dataset.stride);
  r.mark_block("data.split");
  r.read("data.split.train", c.dataset.ratios.train);
  r.read("data.split.val", c.dataset.ratios.val);
  r.read("data.split.test", c.dataset.ratios.test);
  r.mark_block("data.injection");
  r.read("data.injection.rate", c.dataset.anomaly_rate);
  r.read("data.injection.magnitude_min", c.dataset.magnitude_min);
  r.read("data.injection.magnitude_max", c.dataset.magnitude_max);
  std::string row_errors = "skip";
  r.read("data.row_errors", row_errors);
  if (row_errors == "fail") {
    c.row_errors = data::RowErrorPolicy::fail;
  } else if (row_errors != "skip") {
    r.error("data.row_errors", "expected skip or fail, got '" + row_errors + "'");
  }
  std::string column_map;
  r.read("data.column_map", column_map);
  if (!column_map.empty()) {
    try {
      c.columns = load_column_mapping(resolve_path(base_dir, column_map));
    } catch (const std::exception& e) {
      r.error("data.column_map", e.what());
    }
  }
  r.mark_block("data.files");
  if (auto files = root.get_child_optional("data.files")) {
    for (const auto& [name, node] : *files) {
      if (name != "monitor") continue;  // reported as unknown below
      MonitorFile f;
      FieldReader fr(node);
      fr.read("slice", f.slice);
      fr.read("monitor", f.monitor);
      fr.read("path", f.path);
      fr.report_unknown(node, "", {});
      for (const auto& e : fr.errors()) r.error("data.files.monitor." + e.substr(0, e.find(':')),
                                                e.substr(e.find(':') + 2));
      if (f.path.empty()) r.error("data.files.monitor.path", "missing");
      f.path = resolve_path(base_dir, f.path);
      c.files.push_back(f);
    }
  }

  r.mark_block("detection");
  r.read("detection.gamma", c.gamma);
  r.mark_block("detection.inversion");
  r.read("detection.inversion.steps", c.inversion.steps);
  r.read("detection.inversion.learning_rate", c.inversion.learning_rate);
  r.read("detection.inversion.init_scale", c.inversion.init_scale);

  r.mark_block("output");
  r.read("output.dir", c.output_dir);

  r.report_unknown(root, "", {"data.files"});
  if (auto files = root.get_child_optional("data.files")) {
    for (const auto& [name, node] : *files) {
      if (name != "monitor") r.error("data.files." + name, "unknown key");
    }
  }

  // Cross-field checks.
  t.seed = c.seed;
  c.synthetic.seed = c.seed;
  c.dataset.seed = c.seed;
  c.dataset.window = m.window;
  c.inversion.seed = c.seed;
  m.features = data::kFeatureCount;
  r.check("topology", [&] { c.topology.validate(); });
  r.check("training", [&] { t.validate(); });
  r.check("model", [&] { m.validate(); });
  r.check("data.split", [&] { c.dataset.ratios.validate(); });
  if (c.dataset.anomaly_rate < 0.0 || c.dataset.anomaly_rate >= 1.0) {
    r.error("data.injection.rate", "must lie in [0, 1)");
  }
  if (!(c.dataset.magnitude_min > 0.0 && c.dataset.magnitude_max >= c.dataset.magnitude_min)) {
    r.error("data.injection", "magnitudes must satisfy 0 < magnitude_min <= magnitude_max");
  }
  if (c.dataset.stride == 0) r.error("data.stride", "must be >= 1");
  if (!(c.gamma >= 0.0 && c.gamma <= 1.0)) r.error("detection.gamma", "must lie in [0, 1]");
  if (c.topology.keep_data_in_slice && t.mode == federation::Mode::centralized) {
    r.error("training.mode",
            "centralized mode pools raw metrics, which topology.keep_data_in_slice forbids");
  }
  if (c.data_source == "files") {
    const std::size_t expected = c.topology.monitor_count();
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& f : c.files) {
      if (f.slice >= c.topology.slices || f.monitor >= c.topology.monitors_per_slice) {
        r.error("data.files", "monitor (" + std::to_string(f.slice) + ", " +
                                  std::to_string(f.monitor) + ") lies outside the topology");
      } else if (!seen.insert({f.slice, f.monitor}).second) {
        r.error("data.files", "monitor (" + std::to_string(f.slice) + ", " +
                                  std::to_string(f.monitor) + ") is assigned twice");
      }
    }
    if (seen.size() != expected) {
      r.error("data.files", "every one of the " + std::to_string(expected) +
                                " monitors needs exactly one file");
    }
  }

  if (!r.errors().empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : r.errors()) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  // Paths are written resolved so the canonical text loads from any directory.
  // The output directory is left out: where a run is stored does not change it.
  pt::ptree canon_root = root;
  canon_root.erase("output");
  if (!column_map.empty()) {
    canon_root.put("data.column_map", resolve_path(base_dir, column_map));
  }
  if (auto files = canon_root.get_child_optional("data.files")) {
    for (auto& [name, node] : *files) {
      if (auto p = node.get_optional<std::string>("path")) node.put("path", resolve_path(base_dir, *p));
    }
  }
  std::ostringstream canon;
  pt::write_info(canon, canon_root);
  c.resolved_text = canon.str();
  return c;
}

// Inlines `#include "file"` lines, resolving each file against the directory
// of the file that names it.
std::string expand_includes(const std::string& text, const fs::path& base_dir,
                            std::vector<fs::path>& stack) {
  std::istringstream in(text);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line.compare(first, 8, "#include") != 0) {
      out << line << "\n";
      continue;
    }
    const auto open = line.find('"', first + 8);
    const auto close = open == std::string::npos ? open : line.find('"', open + 1);
    if (close == std::string::npos) throw ConfigError("malformed include line: " + line);
    const fs::path target =
        fs::absolute(base_dir / line.substr(open + 1, close - open - 1)).lexically_normal();
    if (std::find(stack.begin(), stack.end(), target) != stack.end()) {
      throw ConfigError("include cycle through " + target.string());
    }
    std::ifstream f(target);
    if (!f) throw ConfigError("cannot open include file " + target.string());
    std::ostringstream body;
    body << f.rdbuf();
    stack.push_back(target);
    out << expand_includes(body.str(), target.parent_path(), stack);
    stack.pop_back();
  }
  return out.str();
}

pt::ptree parse_info_text(const std::string& text, const fs::path& base_dir,
                          std::vector<fs::path> stack) {
  pt::ptree root;
  std::istringstream in(expand_includes(text, base_dir, stack));
  try {
    pt::read_info(in, root);
  } catch (const pt::info_parser_error& e) {
    throw ConfigError(std::string("cannot parse config: ") + e.what());
  }
  return root;
}

}  // namespace

ExperimentConfig load_config(const std::string& path, const Overrides& overrides) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config " + path);
  std::ostringstream body;
  body << f.rdbuf();
  const fs::path abs = fs::absolute(path).lexically_normal();
  const std::string base = abs.parent_path().string();
  return from_tree(parse_info_text(body.str(), base, {abs}), base, overrides);
}

ExperimentConfig parse_config(const std::string& text, const std::string& base_dir,
                              const Overrides& overrides) {
  const std::string base = base_dir.empty() ? "." : base_dir;
  return from_tree(parse_info_text(text, base, {}), base, overrides);
}

data::ColumnMapping load_column_mapping(const std::string& path) {
  pt::ptree root;
  try {
    pt::read_info(path, root);
  } catch (const pt::info_parser_error& e) {
    throw ConfigError(std::string("cannot read column map: ") + e.what());
  }
  data::ColumnMapping m;
  std::vector<std::string> errors;
  for (const auto& [name, node] : root) {
    if (name == "timestamp") {
      m.timestamp = node.get_value<std::string>();
    } else if (name == "label") {
      m.label = node.get_value<std::string>();
    } else if (name == "delimiter") {
      const std::string d = node.get_value<std::string>();
      if (d.size() != 1) {
        errors.push_back("delimiter: expected one character");
      } else {
        m.delimiter = d[0];
      }
    } else if (name == "features") {
      for (const auto& [feature, col] : node) {
        try {
          m.features[data::feature_index(feature)] = col.get_value<std::string>();
        } catch (const std::exception&) {
          errors.push_back("features." + feature + ": unknown feature");
        }
      }
    } else {
      errors.push_back(name + ": unknown key");
    }
  }
  if (!errors.empty()) {
    std::string msg = "invalid column map " + path + ":";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return m;
}

std::string sha1_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha1(), nullptr);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) {
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return os.str();
}

}  // namespace fedgan::cli
