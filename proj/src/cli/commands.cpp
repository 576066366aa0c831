#include "fedgan/cli/commands.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "fedgan/common/error.hpp"
#include "fedgan/federation/report.hpp"
#include "fedgan/models/bundle.hpp"
#include "fedgan/models/oracle_suite.hpp"

namespace fedgan::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) != nullptr) return kExitUsage;
  if (dynamic_cast<const UsageError*>(&e) != nullptr) return kExitUsage;
  return kExitRuntime;
}

Overrides overrides_from(const CommonOptions& o) {
  Overrides out;
  if (o.seed) out.emplace_back("seed", std::to_string(*o.seed));
  if (o.out) out.emplace_back("output.dir", *o.out);
  if (o.threads) out.emplace_back("training.threads", std::to_string(*o.threads));
  if (o.mode) out.emplace_back("training.mode", *o.mode);
  return out;
}

namespace run_files {
std::string monitor_model(std::size_t slice, std::size_t monitor) {
  return "models/monitor_s" + std::to_string(slice) + "_n" + std::to_string(monitor) + ".ck";
}
}  // namespace run_files

// ---------------------------------------------------------------------------
// Manifest

const ManifestFile* Manifest::find(const std::string& path) const {
  for (const auto& f : files) {
    if (f.path == path) return &f;
  }
  return nullptr;
}

void Manifest::record(ManifestFile f) {
  auto it = std::find_if(files.begin(), files.end(),
                         [&](const ManifestFile& e) { return e.path == f.path; });
  if (it != files.end()) {
    *it = std::move(f);
  } else {
    files.push_back(std::move(f));
  }
  std::sort(files.begin(), files.end(),
            [](const ManifestFile& a, const ManifestFile& b) { return a.path < b.path; });
}

std::string manifest_json(const Manifest& m) {
  ordered_json j;
  j["config_path"] = m.config_path;
  j["config_sha1"] = m.config_sha1;
  j["seeds"] = {{"base", m.seed},
                {"training", m.seed},
                {"synthetic", m.seed},
                {"injection", m.seed},
                {"inversion", m.seed}};
  j["artifact_dir"] = m.artifact_dir;
  j["mode"] = m.mode;
  j["variant"] = m.variant;
  j["dataset_sha1"] = m.dataset_sha1;
  j["files"] = ordered_json::array();
  for (const auto& f : m.files) {
    j["files"].push_back({{"path", f.path}, {"sha1", f.sha1}, {"reproducible", f.reproducible}});
  }
  return j.dump(2) + "\n";
}

Manifest parse_manifest(const std::string& text) {
  Manifest m;
  try {
    const auto j = ordered_json::parse(text);
    m.config_path = j.at("config_path").get<std::string>();
    m.config_sha1 = j.at("config_sha1").get<std::string>();
    m.seed = j.at("seeds").at("base").get<std::uint64_t>();
    m.artifact_dir = j.at("artifact_dir").get<std::string>();
    m.mode = j.at("mode").get<std::string>();
    m.variant = j.at("variant").get<std::string>();
    m.dataset_sha1 = j.at("dataset_sha1").get<std::string>();
    for (const auto& f : j.at("files")) {
      m.files.push_back({f.at("path").get<std::string>(), f.at("sha1").get<std::string>(),
                         f.at("reproducible").get<bool>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

// ---------------------------------------------------------------------------
// Hashing and file helpers

namespace {

class Sha1 {
 public:
  Sha1() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha1(), nullptr) != 1) {
      throw std::runtime_error("cannot initialize SHA-1");
    }
  }
  void update(const void* p, std::size_t n) { EVP_DigestUpdate(ctx_.get(), p, n); }
  template <typename T>
  void value(const T& v) {
    update(&v, sizeof(T));
  }
  std::string hex() {
    unsigned char d[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), d, &len);
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) {
      os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(d[i]);
    }
    return os.str();
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& p, const std::string& content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << content;
  if (!out) throw std::runtime_error("write failed for " + p.string());
}

// A run directory opened for reading, with every consumed file checked
// against the hash the manifest recorded for it.
struct RunDir {
  fs::path dir;
  Manifest manifest;
  ExperimentConfig config;

  explicit RunDir(const std::string& path) : dir(path) {
    const fs::path mp = dir / run_files::manifest;
    if (!fs::exists(mp)) {
      throw std::runtime_error(dir.string() + " is not a run directory (no " +
                               run_files::manifest + ")");
    }
    manifest = parse_manifest(read_file(mp));
    const std::string text = verified(run_files::config);
    if (sha1_hex(text) != manifest.config_sha1) {
      throw ProvenanceError("configuration hash differs from the manifest");
    }
    config = parse_config(text, dir.string());
  }

  // Contents of a recorded file; ProvenanceError when unrecorded or altered.
  std::string verified(const std::string& rel) const {
    const ManifestFile* f = manifest.find(rel);
    if (f == nullptr) throw ProvenanceError(rel + " is not recorded in the run manifest");
    const fs::path p = dir / rel;
    if (!fs::exists(p)) throw std::runtime_error("missing artifact " + p.string());
    std::string content = read_file(p);
    if (sha1_hex(content) != f->sha1) {
      throw ProvenanceError(rel + " does not match the hash recorded in the manifest");
    }
    return content;
  }

  void check_path(const std::string& rel) const { (void)verified(rel); }

  models::ModelBundle bundle(std::size_t s, std::size_t n) const {
    const std::string rel = run_files::monitor_model(s, n);
    check_path(rel);
    Checkpoint raw;
    models::ModelBundle b = models::load_bundle((dir / rel).string(), &raw);
    const std::string* sha = raw.find_meta("config_sha1");
    if (sha == nullptr || *sha != manifest.config_sha1) {
      throw ProvenanceError(rel + " was trained under a different configuration");
    }
    return b;
  }

  std::vector<data::WindowedSample> windows(const char* rel) const {
    check_path(rel);
    return data::load_windows((dir / rel).string());
  }

  // Writes an artifact and records it in the manifest (saved by `commit`).
  void write(const std::string& rel, const std::string& content) {
    write_file(dir / rel, content);
    manifest.record({rel, sha1_hex(content), true});
  }

  void commit() const { write_file(dir / run_files::manifest, manifest_json(manifest)); }
};

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::vector<std::vector<std::string>> read_csv_rows(const std::string& text,
                                                    const std::string& expected_header) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != expected_header) {
    throw FormatError("unexpected CSV header '" + line + "'");
  }
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (!line.empty()) rows.push_back(split_csv(line));
  }
  return rows;
}

ordered_json ratio_json(const detection::Ratio& r) {
  ordered_json j{{"numerator", r.numerator}, {"denominator", r.denominator}};
  if (r.defined()) {
    j["value"] = r.value();
  } else {
    j["value"] = nullptr;
    j["undefined_reason"] = r.undefined_reason;
  }
  return j;
}

std::string ratio_cell(const detection::Ratio& r) { return r.defined() ? fmt(r.value()) : ""; }

// Slice and monitor of a window's vm id under the run's topology.
std::pair<std::size_t, std::size_t> monitor_of(const federation::TopologySpec& topo,
                                               std::size_t vm) {
  if (vm >= topo.monitor_count()) {
    throw FormatError("window vm id " + std::to_string(vm) + " lies outside the topology");
  }
  return {vm / topo.monitors_per_slice, vm % topo.monitors_per_slice};
}

// Scores windows with the models of the monitor that produced them; window_id
// is the position in `windows`.
std::vector<detection::ScoredSample> score_by_monitor(
    const RunDir& run, const std::vector<data::WindowedSample>& windows, double gamma) {
  const auto& topo = run.config.topology;
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < windows.size(); ++i) groups[windows[i].vm].push_back(i);
  std::vector<detection::ScoredSample> out(windows.size());
  for (const auto& [vm, idx] : groups) {
    const auto [s, n] = monitor_of(topo, vm);
    const models::ModelBundle b = run.bundle(s, n);
    detection::ScoringModels m{&b.generator, b.encoder ? &*b.encoder : nullptr,
                               &b.critics.at(0), run.config.inversion};
    std::vector<data::WindowedSample> part;
    part.reserve(idx.size());
    for (std::size_t i : idx) part.push_back(windows[i]);
    auto scored = detection::score_windows(part, m, gamma);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      scored[k].window_id = idx[k];
      out[idx[k]] = scored[k];
    }
  }
  return out;
}

constexpr const char* kThresholdHeader =
    "scope,vm,gamma,threshold,mean_normal,mean_abnormal,n_normal,n_abnormal,degenerate";
constexpr const char* kScoreHeader =
    "window_id,vm,fault,truth,score,reconstruction,discrimination,threshold,predicted";

struct Thresholds {
  double gamma = 0.9;
  std::optional<double> pooled;
  std::map<std::size_t, double> by_vm;

  double for_vm(std::size_t vm) const {
    if (pooled) return *pooled;
    auto it = by_vm.find(vm);
    if (it == by_vm.end()) {
      throw std::runtime_error("no threshold calibrated for monitor " + std::to_string(vm));
    }
    return it->second;
  }
};

// std::stod and friends report bad cells as invalid_argument/out_of_range;
// inside artifact files those are format problems.
template <typename F>
auto parsing(const char* what, F&& f) {
  try {
    return f();
  } catch (const FormatError&) {
    throw;
  } catch (const std::logic_error& e) {
    throw FormatError(std::string("malformed ") + what + ": " + e.what());
  }
}

Thresholds parse_thresholds(const std::string& text) {
  return parsing("threshold file", [&] {
    Thresholds t;
    auto rows = read_csv_rows(text, kThresholdHeader);
    if (rows.empty()) throw FormatError("threshold file has no rows");
    for (const auto& r : rows) {
      if (r.size() != 9) throw FormatError("threshold row has the wrong number of cells");
      t.gamma = std::stod(r[2]);
      const double thr = std::stod(r[3]);
      if (r[0] == "pooled") {
        t.pooled = thr;
      } else if (r[0] == "monitor") {
        t.by_vm[std::stoul(r[1])] = thr;
      } else {
        throw FormatError("unknown threshold scope '" + r[0] + "'");
      }
    }
    return t;
  });
}

std::vector<detection::ScoredSample> parse_scores(const std::string& text) {
  return parsing("score file", [&] {
    std::vector<detection::ScoredSample> out;
    for (const auto& r : read_csv_rows(text, kScoreHeader)) {
      if (r.size() != 9) throw FormatError("score row has the wrong number of cells");
      detection::ScoredSample s;
      s.window_id = std::stoul(r[0]);
      s.vm = std::stoul(r[1]);
      s.fault = data::parse_fault_type(r[2]);
      if (!r[3].empty()) s.truth = r[3] == "1";
      s.score = std::stod(r[4]);
      s.reconstruction = std::stod(r[5]);
      s.discrimination = std::stod(r[6]);
      s.predicted = r[8] == "1";
      out.push_back(s);
    }
    return out;
  });
}

ordered_json cost_json(const federation::CostReport& r, const ExperimentConfig& cfg,
                       std::size_t windows_per_monitor) {
  ordered_json j;
  j["mode"] = federation::to_string(r.mode);
  j["variant"] = models::to_string(cfg.training.variant);
  j["topology"] = {{"slices", cfg.topology.slices},
                   {"monitors_per_slice", cfg.topology.monitors_per_slice}};
  j["training"] = {{"iterations", cfg.training.iterations},
                   {"critic_iterations", cfg.training.critic_iterations},
                   {"local_iterations", cfg.training.local_iterations},
                   {"batch_size", cfg.training.batch_size}};
  j["windows_per_monitor"] = windows_per_monitor;
  j["window_values"] = cfg.model.window * data::kFeatureCount;
  j["sizes"] = {{"theta_d", r.sizes.theta_d},
                {"theta_e", r.sizes.theta_e},
                {"theta_g", r.sizes.theta_g}};
  j["links"] = ordered_json::array();
  for (const auto& l : r.links) {
    j["links"].push_back({{"link", federation::to_string(l.link)},
                          {"direction", federation::to_string(l.direction)},
                          {"messages", l.messages},
                          {"bytes", l.bytes},
                          {"payload_bytes", l.payload_bytes}});
  }
  j["aggregation_rounds"] = r.aggregation_rounds;
  j["flops"] = ordered_json::array();
  for (const auto& f : r.flops) {
    j["flops"].push_back(
        {{"node", f.node}, {"measured", f.measured}, {"closed_form", f.closed_form}});
  }
  j["memory_bytes"] = {{"monitor", r.memory.monitor},
                       {"manager", r.memory.manager},
                       {"controller", r.memory.controller}};
  return j;
}

std::string checkpoint_file_sha1(const fs::path& p) { return sha1_hex(read_file(p)); }

}  // namespace

// ---------------------------------------------------------------------------

std::string dataset_sha1(const experiment::ExperimentData& data) {
  Sha1 h;
  auto add = [&](const std::vector<data::WindowedSample>& ws, std::uint8_t part) {
    h.value(part);
    h.value(static_cast<std::uint64_t>(ws.size()));
    for (const auto& w : ws) {
      for (std::size_t d : w.x.shape()) h.value(static_cast<std::uint64_t>(d));
      h.update(w.x.data().data(), w.x.size() * sizeof(double));
      h.value(static_cast<std::uint8_t>(w.abnormal));
      h.value(static_cast<std::uint64_t>(w.vm));
      h.value(static_cast<std::uint64_t>(w.start));
      h.value(static_cast<std::int32_t>(w.fault));
    }
  };
  for (const auto& slice : data.monitors) {
    for (const auto& m : slice) {
      add(m.train, 0);
      add(m.val, 1);
      add(m.test, 2);
    }
  }
  return h.hex();
}

std::vector<std::vector<std::vector<data::MetricsRecord>>> load_records(
    const ExperimentConfig& cfg, std::ostream& log) {
  if (cfg.data_source == "synthetic") {
    return experiment::synthetic_records(cfg.topology, cfg.synthetic);
  }
  std::vector<std::vector<std::vector<data::MetricsRecord>>> out(
      cfg.topology.slices,
      std::vector<std::vector<data::MetricsRecord>>(cfg.topology.monitors_per_slice));
  for (const auto& f : cfg.files) {
    data::LoadReport report;
    out[f.slice][f.monitor] = data::load_dataset(f.path, cfg.columns, cfg.row_errors, &report);
    log << f.path << ": " << report.rows_read << " rows, " << report.rows_skipped
        << " skipped, " << report.cells_interpolated << " cells interpolated, "
        << report.rows_dropped_missing << " dropped in long gaps\n";
    for (const auto& d : report.diagnostics) log << "  " << d << "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// train

std::string cmd_train(const CommonOptions& opts, std::ostream& log) {
  const ExperimentConfig cfg = load_config(opts.config, overrides_from(opts));
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir / "models");
  fs::create_directories(dir / "data");

  const auto records = load_records(cfg, log);
  const experiment::ExperimentData data = experiment::prepare_experiment(cfg.topology, records,
                                                                         cfg.dataset);
  const std::string config_sha = sha1_hex(cfg.resolved_text);
  const std::string data_sha = dataset_sha1(data);
  log << "training " << federation::to_string(cfg.training.mode) << " "
      << models::to_string(cfg.training.variant) << " on " << cfg.topology.slices << "x"
      << cfg.topology.monitors_per_slice << " monitors, " << cfg.training.iterations
      << " iterations\n";
  const federation::TrainingResult result =
      federation::run_training(cfg.topology, cfg.training, cfg.model, data.training());

  Manifest m;
  m.config_path = opts.config;
  m.config_sha1 = config_sha;
  m.seed = cfg.seed;
  m.artifact_dir = dir.string();
  m.mode = federation::to_string(cfg.training.mode);
  m.variant = models::to_string(cfg.training.variant);
  m.dataset_sha1 = data_sha;

  auto put = [&](const std::string& rel, const std::string& content, bool reproducible = true) {
    write_file(dir / rel, content);
    m.record({rel, sha1_hex(content), reproducible});
  };
  put(run_files::config, cfg.resolved_text);

  const std::vector<std::pair<std::string, std::string>> meta{{"config_sha1", config_sha},
                                                              {"dataset_sha1", data_sha}};
  for (std::size_t s = 0; s < cfg.topology.slices; ++s) {
    for (std::size_t n = 0; n < cfg.topology.monitors_per_slice; ++n) {
      const std::string rel = run_files::monitor_model(s, n);
      auto monitor_meta = meta;
      monitor_meta.emplace_back("slice", std::to_string(s));
      monitor_meta.emplace_back("monitor", std::to_string(n));
      models::save_bundle((dir / rel).string(), result.bundle(s, n), monitor_meta);
      m.record({rel, checkpoint_file_sha1(dir / rel), true});
    }
  }
  if (result.global) {
    Checkpoint ck;
    ck.metadata = meta;
    for (const auto& e : result.global->generator) ck.tensors.push_back({"generator/" + e.name, e.value});
    for (const auto& e : result.global->encoder) ck.tensors.push_back({"encoder/" + e.name, e.value});
    save_checkpoint((dir / run_files::global).string(), ck);
    m.record({run_files::global, checkpoint_file_sha1(dir / run_files::global), true});
  }
  data::save_windows((dir / run_files::val).string(), data.all(false), meta);
  m.record({run_files::val, checkpoint_file_sha1(dir / run_files::val), true});
  data::save_windows((dir / run_files::test).string(), data.all(true), meta);
  m.record({run_files::test, checkpoint_file_sha1(dir / run_files::test), true});

  std::ostringstream traces, ledger, timing;
  federation::write_traces_csv(traces, result.traces);
  federation::write_ledger_csv(ledger, result.ledger);
  federation::write_timing_csv(timing, result.ledger);
  put(run_files::traces, traces.str());
  put(run_files::ledger, ledger.str());
  put(run_files::timing, timing.str(), false);

  const auto report = federation::ledger_report(result, cfg.topology, cfg.training,
                                                data.windows_per_monitor());
  put(run_files::costs, cost_json(report, cfg, data.windows_per_monitor()).dump(2) + "\n");
  federation::write_report_text(log, report);

  write_file(dir / run_files::manifest, manifest_json(m));
  log << "wrote run to " << dir.string() << "\n";
  return dir.string();
}

// ---------------------------------------------------------------------------
// calibrate / detect / evaluate

void cmd_calibrate(const std::string& run_dir, std::optional<double> gamma_override, bool pooled,
                   std::ostream& log) {
  RunDir run(run_dir);
  const double gamma = gamma_override.value_or(run.config.gamma);
  detection::DetectionConfig{gamma, 0.0}.validate();
  if (pooled && run.config.training.mode != federation::Mode::centralized) {
    throw UsageError("a pooled threshold is only available for centralized runs");
  }
  const auto val = run.windows(run_files::val);
  const auto scored = score_by_monitor(run, val, gamma);

  std::ostringstream os;
  os << kThresholdHeader << "\n";
  auto row = [&](const char* scope, const std::string& vm, const detection::Calibration& c) {
    os << scope << "," << vm << "," << fmt(gamma) << "," << fmt(c.threshold) << ","
       << fmt(c.mean_normal) << "," << fmt(c.mean_abnormal) << "," << c.n_normal << ","
       << c.n_abnormal << "," << (c.degenerate ? 1 : 0) << "\n";
    log << scope << (vm.empty() ? "" : " " + vm) << ": threshold " << c.threshold
        << " (normal mean " << c.mean_normal << ", abnormal mean " << c.mean_abnormal << ")"
        << (c.degenerate ? " degenerate: class means coincide" : "") << "\n";
  };
  if (pooled) {
    row("pooled", "", detection::calibrate_threshold(scored));
  } else {
    for (const auto& [vm, c] : detection::calibrate_by_vm(scored)) {
      row("monitor", std::to_string(vm), c);
    }
  }
  run.write(run_files::thresholds, os.str());
  run.commit();
}

void cmd_detect(const std::string& run_dir, std::ostream& log) {
  RunDir run(run_dir);
  const Thresholds thr = parse_thresholds(run.verified(run_files::thresholds));
  const auto test = run.windows(run_files::test);
  auto scored = score_by_monitor(run, test, thr.gamma);

  std::ostringstream os;
  os << kScoreHeader << "\n";
  std::size_t flagged = 0;
  for (auto& s : scored) {
    const double t = thr.for_vm(s.vm);
    s.predicted = detection::classify(s, t);
    flagged += s.predicted ? 1 : 0;
    os << s.window_id << "," << s.vm << "," << data::to_string(s.fault) << ","
       << (s.truth ? (*s.truth ? "1" : "0") : "") << "," << fmt(s.score) << ","
       << fmt(s.reconstruction) << "," << fmt(s.discrimination) << "," << fmt(t) << ","
       << (s.predicted ? 1 : 0) << "\n";
  }
  run.write(run_files::scores, os.str());
  run.commit();
  log << "scored " << scored.size() << " test windows, " << flagged << " flagged abnormal\n";
}

void cmd_evaluate(const std::string& run_dir, std::ostream& log) {
  {
    RunDir probe(run_dir);
    if (probe.manifest.find(run_files::scores) == nullptr) cmd_detect(run_dir, log);
  }
  RunDir run(run_dir);
  const auto scored = parse_scores(run.verified(run_files::scores));
  const Thresholds thr = parse_thresholds(run.verified(run_files::thresholds));
  const detection::Metrics m = detection::evaluate(scored);
  const auto recall = detection::per_fault_recall(scored);

  ordered_json j;
  j["config_sha1"] = run.manifest.config_sha1;
  j["gamma"] = thr.gamma;
  j["threshold_scope"] = thr.pooled ? "pooled" : "monitor";
  j["counts"] = {{"tp", m.counts.tp}, {"fp", m.counts.fp}, {"tn", m.counts.tn},
                 {"fn", m.counts.fn}};
  j["precision"] = ratio_json(m.precision);
  j["recall"] = ratio_json(m.recall);
  j["f1"] = ratio_json(m.f1);
  j["accuracy"] = ratio_json(m.accuracy);
  ordered_json faults = ordered_json::object();
  for (const auto& [f, r] : recall) faults[data::to_string(f)] = ratio_json(r);
  j["fault_recall"] = faults;
  run.write(run_files::metrics, j.dump(2) + "\n");
  run.commit();

  auto show = [&](const char* name, const detection::Ratio& r) {
    log << std::left << std::setw(20) << name;
    if (r.defined()) {
      log << std::fixed << std::setprecision(4) << r.value() << std::defaultfloat << " ("
          << r.numerator << "/" << r.denominator << ")\n";
    } else {
      log << "undefined: " << r.undefined_reason << "\n";
    }
  };
  log << "tp " << m.counts.tp << "  fp " << m.counts.fp << "  tn " << m.counts.tn << "  fn "
      << m.counts.fn << "\n";
  show("precision", m.precision);
  show("recall", m.recall);
  show("f1", m.f1);
  show("accuracy", m.accuracy);
  for (const auto& [f, r] : recall) show(data::to_string(f), r);
}

// ---------------------------------------------------------------------------
// compare

void cmd_compare(const CompareOptions& opts, std::ostream& log) {
  std::vector<models::Variant> variants;
  for (const auto& v : opts.variants) variants.push_back(models::parse_variant(v));
  if (variants.empty()) throw UsageError("compare needs at least one variant");

  const ExperimentConfig base = load_config(opts.common.config, overrides_from(opts.common));
  std::vector<std::uint64_t> seeds = opts.seeds;
  if (seeds.empty()) seeds.push_back(base.seed);
  const fs::path dir = base.output_dir;
  fs::create_directories(dir);

  std::ostringstream rows;
  rows << "variant,seed,mode,dataset_sha1,tp,fp,tn,fn,precision,recall,f1,accuracy\n";
  std::map<models::Variant, std::vector<detection::Metrics>> by_variant;
  for (std::uint64_t seed : seeds) {
    CommonOptions seeded = opts.common;
    seeded.seed = seed;
    const ExperimentConfig cfg = load_config(opts.common.config, overrides_from(seeded));
    const auto data = experiment::prepare_experiment(cfg.topology, load_records(cfg, log),
                                                     cfg.dataset);
    const std::string data_sha = dataset_sha1(data);
    for (models::Variant v : variants) {
      federation::TrainingConfig tc = cfg.training;
      tc.variant = v;
      // Baselines train on a single node; the pooled trainer gives every
      // variant the same data, falling back to per-monitor training when
      // raw metrics must stay inside their slice.
      tc.mode = cfg.topology.keep_data_in_slice ? federation::Mode::standalone
                                                : federation::Mode::centralized;
      log << "seed " << seed << " " << models::to_string(v) << " ("
          << federation::to_string(tc.mode) << ")\n";
      const auto trained = federation::run_training(cfg.topology, tc, cfg.model, data.training());
      const auto rep = experiment::detect_and_evaluate(trained, data, cfg.gamma, cfg.inversion);
      const auto& m = rep.metrics;
      rows << models::to_string(v) << "," << seed << "," << federation::to_string(tc.mode) << ","
           << data_sha << "," << m.counts.tp << "," << m.counts.fp << "," << m.counts.tn << ","
           << m.counts.fn << "," << ratio_cell(m.precision) << "," << ratio_cell(m.recall) << ","
           << ratio_cell(m.f1) << "," << ratio_cell(m.accuracy) << "\n";
      by_variant[v].push_back(m);
      log << "  f1 " << ratio_cell(m.f1) << "\n";
    }
  }

  std::ostringstream summary;
  summary << "variant,seeds,mean_precision,mean_recall,mean_f1,mean_accuracy\n";
  for (models::Variant v : variants) {
    const auto& ms = by_variant[v];
    auto mean = [&](auto pick) -> std::string {
      double sum = 0.0;
      for (const auto& m : ms) {
        const detection::Ratio& r = pick(m);
        if (!r.defined()) return "";
        sum += r.value();
      }
      return fmt(sum / static_cast<double>(ms.size()));
    };
    summary << models::to_string(v) << "," << ms.size() << ","
            << mean([](const detection::Metrics& m) -> const detection::Ratio& { return m.precision; })
            << ","
            << mean([](const detection::Metrics& m) -> const detection::Ratio& { return m.recall; })
            << "," << mean([](const detection::Metrics& m) -> const detection::Ratio& { return m.f1; })
            << ","
            << mean([](const detection::Metrics& m) -> const detection::Ratio& { return m.accuracy; })
            << "\n";
  }
  write_file(dir / "compare.csv", rows.str());
  write_file(dir / "compare_summary.csv", summary.str());
  log << summary.str();
}

// ---------------------------------------------------------------------------
// report-costs

void cmd_report_costs(const std::vector<std::string>& run_dirs, const std::string& out_dir,
                      std::ostream& log) {
  if (run_dirs.empty()) throw UsageError("report-costs needs at least one run directory");
  struct Loaded {
    std::string name;
    ordered_json costs;
    std::vector<std::pair<std::size_t, double>> iteration_seconds;
  };
  std::vector<Loaded> runs;
  for (const auto& d : run_dirs) {
    const fs::path dir(d);
    const fs::path costs = dir / run_files::costs;
    if (!fs::exists(costs) || !fs::exists(dir / run_files::ledger)) {
      throw std::runtime_error("no cost ledger in " + dir.string());
    }
    Loaded l;
    l.name = dir.filename().empty() ? dir.parent_path().filename().string()
                                    : dir.filename().string();
    try {
      l.costs = ordered_json::parse(read_file(costs));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("malformed " + costs.string() + ": " + e.what());
    }
    if (fs::exists(dir / run_files::timing)) {
      for (const auto& r : read_csv_rows(read_file(dir / run_files::timing), "kind,key,seconds")) {
        if (r.size() == 3 && r[0] == "iteration") {
          l.iteration_seconds.emplace_back(std::stoul(r[1]), std::stod(r[2]));
        }
      }
    }
    runs.push_back(std::move(l));
  }

  auto link_bytes = [](const ordered_json& c, const std::string& link) {
    std::uint64_t b = 0;
    for (const auto& l : c.at("links")) {
      if (l.at("link").get<std::string>() == link) b += l.at("bytes").get<std::uint64_t>();
    }
    return b;
  };

  std::ostringstream table, time, batch, local, memory;
  table << "run,mode,batch_size,local_iterations,iterations,link,direction,messages,bytes,"
           "payload_bytes\n";
  time << "run,mode,iteration,seconds\n";
  batch << "run,mode,batch_size,monitor_manager_bytes\n";
  local << "run,mode,local_iterations,aggregation_rounds,manager_controller_bytes\n";
  memory << "run,mode,scale,windows_per_monitor,monitor_bytes,manager_bytes,controller_bytes\n";

  for (const auto& r : runs) {
    const auto& c = r.costs;
    const std::string mode = c.at("mode").get<std::string>();
    const auto& tr = c.at("training");
    for (const auto& l : c.at("links")) {
      table << r.name << "," << mode << "," << tr.at("batch_size") << ","
            << tr.at("local_iterations") << "," << tr.at("iterations") << ","
            << l.at("link").get<std::string>() << "," << l.at("direction").get<std::string>()
            << "," << l.at("messages") << "," << l.at("bytes") << "," << l.at("payload_bytes")
            << "\n";
    }
    for (const auto& [it, s] : r.iteration_seconds) {
      time << r.name << "," << mode << "," << it << "," << fmt(s) << "\n";
    }
    batch << r.name << "," << mode << "," << tr.at("batch_size") << ","
          << link_bytes(c, "monitor_manager") << "\n";
    local << r.name << "," << mode << "," << tr.at("local_iterations") << ","
          << c.at("aggregation_rounds") << "," << link_bytes(c, "manager_controller") << "\n";

    // Memory grows with the shard; the series rescales the run's own shard.
    federation::TopologySpec topo;
    topo.slices = c.at("topology").at("slices").get<std::size_t>();
    topo.monitors_per_slice = c.at("topology").at("monitors_per_slice").get<std::size_t>();
    federation::TrainingConfig tc;
    tc.iterations = tr.at("iterations").get<std::size_t>();
    tc.critic_iterations = tr.at("critic_iterations").get<std::size_t>();
    tc.local_iterations = tr.at("local_iterations").get<std::size_t>();
    tc.batch_size = tr.at("batch_size").get<std::size_t>();
    federation::ModelSizes sizes{c.at("sizes").at("theta_d").get<std::uint64_t>(),
                                 c.at("sizes").at("theta_e").get<std::uint64_t>(),
                                 c.at("sizes").at("theta_g").get<std::uint64_t>()};
    const auto windows = c.at("windows_per_monitor").get<std::size_t>();
    const auto values = c.at("window_values").get<std::size_t>();
    for (double scale : {0.25, 0.5, 1.0, 2.0, 4.0}) {
      const auto w = static_cast<std::size_t>(std::llround(scale * static_cast<double>(windows)));
      const auto est = federation::memory_estimate(federation::parse_mode(mode), topo, tc, sizes,
                                                   w, values);
      memory << r.name << "," << mode << "," << scale << "," << w << "," << est.monitor << ","
             << est.manager << "," << est.controller << "\n";
    }
    log << r.name << ": " << mode << ", M=" << tr.at("batch_size")
        << ", L=" << tr.at("local_iterations") << ", monitor-manager bytes "
        << link_bytes(c, "monitor_manager") << ", manager-controller bytes "
        << link_bytes(c, "manager_controller") << ", aggregation rounds "
        << c.at("aggregation_rounds") << "\n";
  }

  const fs::path out(out_dir);
  write_file(out / "cost_table.csv", table.str());
  write_file(out / "time_vs_iterations.csv", time.str());
  write_file(out / "bytes_vs_batch_size.csv", batch.str());
  write_file(out / "bytes_vs_local_iterations.csv", local.str());
  write_file(out / "memory_vs_dataset_size.csv", memory.str());
  log << "wrote cost series to " << out.string() << "\n";
}

// ---------------------------------------------------------------------------
// synth / gradcheck

void cmd_synth(const SynthOptions& opts, std::ostream& log) {
  if (opts.config) {
    Overrides ov;
    if (opts.seed) ov.emplace_back("seed", std::to_string(*opts.seed));
    if (opts.length) ov.emplace_back("data.synthetic.length", std::to_string(*opts.length));
    const ExperimentConfig cfg = load_config(*opts.config, ov);
    const auto records = experiment::synthetic_records(cfg.topology, cfg.synthetic);
    const fs::path dir(opts.out);
    for (std::size_t s = 0; s < records.size(); ++s) {
      for (std::size_t n = 0; n < records[s].size(); ++n) {
        std::ostringstream os;
        data::write_dataset(os, records[s][n]);
        const fs::path p =
            dir / ("monitor_s" + std::to_string(s) + "_n" + std::to_string(n) + ".csv");
        write_file(p, os.str());
        log << "wrote " << records[s][n].size() << " records to " << p.string() << "\n";
      }
    }
    return;
  }
  data::SynthSpec spec;
  if (opts.seed) spec.seed = *opts.seed;
  if (opts.length) spec.length = *opts.length;
  if (spec.length == 0) throw UsageError("synthetic length must be positive");
  const auto records = data::synth_dataset(spec);
  std::ostringstream os;
  data::write_dataset(os, records);
  write_file(opts.out, os.str());
  log << "wrote " << records.size() << " records to " << opts.out << "\n";
}

bool cmd_gradcheck(std::size_t trials, std::uint64_t seed, std::ostream& log) {
  if (trials == 0) throw UsageError("gradcheck needs at least one trial");
  const auto checks = models::run_oracle_suite(trials, seed);
  struct Summary {
    std::size_t count = 0, failed = 0;
    double worst = 0.0;
  };
  std::map<std::string, Summary> by_family;
  for (const auto& c : checks) {
    Summary& s = by_family[c.family + "/" + c.target];
    ++s.count;
    s.worst = std::max(s.worst, c.error);
    if (!c.passed()) {
      ++s.failed;
      log << "FAIL " << c.family << " trial " << c.trial << " " << c.target << ": error "
          << c.error << "\n";
    }
  }
  std::size_t failed = 0;
  for (const auto& [name, s] : by_family) {
    log << std::left << std::setw(24) << name << " checks " << std::setw(4) << s.count
        << " worst relative error " << std::scientific << std::setprecision(3) << s.worst
        << std::defaultfloat << (s.failed ? "  FAILED" : "") << "\n";
    failed += s.failed;
  }
  log << checks.size() << " checks, " << failed << " failed\n";
  return failed == 0;
}

}  // namespace fedgan::cli
