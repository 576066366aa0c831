#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fedgan/cli/commands.hpp"
#include "fedgan/cli/config.hpp"
#include "fedgan/common/error.hpp"

using namespace fedgan;
using namespace fedgan::cli;
namespace fs = std::filesystem;

namespace {

// Fresh scratch directory per test.
fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(::testing::TempDir()) / ("fedgan_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

const char* kTinyConfig = R"(seed 3
topology
{
    slices 2
    monitors_per_slice 1
}
training
{
    mode federated
    iterations 4
    critic_iterations 1
    local_iterations 2
    batch_size 4
    adam
    {
        alpha 0.003
    }
}
model
{
    window 4
    latent_dim 2
    hidden 4
    critic_hidden 4
}
data
{
    source synthetic
    synthetic
    {
        length 160
    }
}
)";

fs::path tiny_config(const fs::path& dir, const std::string& extra = "") {
  const fs::path p = dir / "tiny.info";
  write_text(p, std::string(kTinyConfig) + extra);
  return p;
}

CommonOptions tiny_opts(const fs::path& dir, const std::string& run,
                        const std::string& extra = "") {
  CommonOptions o;
  o.config = tiny_config(dir, extra).string();
  o.out = (dir / run).string();
  return o;
}

std::string full_run(const CommonOptions& o) {
  std::ostringstream log;
  const std::string dir = cmd_train(o, log);
  cmd_calibrate(dir, std::nullopt, false, log);
  cmd_evaluate(dir, log);
  return dir;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

TEST(Config, ListsEveryProblemWithItsKey) {
  try {
    parse_config("training\n{\n  iterations abc\n  typo 1\n}\nmodel\n{\n  window 0\n}\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("training.iterations"), std::string::npos) << msg;
    EXPECT_NE(msg.find("training.typo: unknown key"), std::string::npos) << msg;
    EXPECT_NE(msg.find("model"), std::string::npos) << msg;
  }
}

TEST(Config, UnknownModeNamesTheFourModes) {
  try {
    parse_config("seed 1\n", ".", {{"training.mode", "sideways"}});
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    for (const char* m : {"centralized", "standalone", "distributed", "federated"}) {
      EXPECT_NE(msg.find(m), std::string::npos) << msg;
    }
    EXPECT_EQ(exit_code_for(e), kExitUsage);
  }
}

TEST(Config, IncludedBlocksMergeAndLaterValuesWin) {
  const fs::path dir = scratch("include");
  fs::create_directories(dir / "shared");
  write_text(dir / "shared" / "topo.info", "topology\n{\n  slices 3\n  monitors_per_slice 2\n}\n");
  write_text(dir / "main.info",
             "#include \"shared/topo.info\"\ntopology\n{\n  slices 2\n}\nseed 9\n");
  const ExperimentConfig c = load_config((dir / "main.info").string());
  EXPECT_EQ(c.topology.slices, 2u);
  EXPECT_EQ(c.topology.monitors_per_slice, 2u);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.training.seed, 9u);
}

TEST(Config, IncludeCycleIsAConfigError) {
  const fs::path dir = scratch("cycle");
  write_text(dir / "a.info", "#include \"b.info\"\n");
  write_text(dir / "b.info", "#include \"a.info\"\n");
  EXPECT_THROW(load_config((dir / "a.info").string()), ConfigError);
}

TEST(Config, OverridesBeatFileValues) {
  const ExperimentConfig c =
      parse_config("training\n{\n  threads 1\n}\n", ".", {{"training.threads", "3"}});
  EXPECT_EQ(c.training.threads, 3u);
}

TEST(Config, OutputDirectoryIsNotPartOfTheHash) {
  const ExperimentConfig a = parse_config(kTinyConfig, ".", {{"output.dir", "one"}});
  const ExperimentConfig b = parse_config(kTinyConfig, ".", {{"output.dir", "two"}});
  EXPECT_EQ(a.output_dir, "one");
  EXPECT_EQ(sha1_hex(a.resolved_text), sha1_hex(b.resolved_text));
  const ExperimentConfig c = parse_config(kTinyConfig, ".", {{"seed", "4"}});
  EXPECT_NE(sha1_hex(a.resolved_text), sha1_hex(c.resolved_text));
}

TEST(Config, ResolvedTextReloadsToTheSameConfig) {
  const ExperimentConfig a = parse_config(kTinyConfig);
  const ExperimentConfig b = parse_config(a.resolved_text);
  EXPECT_EQ(a.resolved_text, b.resolved_text);
  EXPECT_EQ(b.training.iterations, 4u);
  EXPECT_EQ(b.model.latent_dim, 2u);
}

TEST(Config, KeepDataInSliceRejectsCentralized) {
  EXPECT_THROW(parse_config("topology\n{\n  keep_data_in_slice true\n}\n", ".",
                            {{"training.mode", "centralized"}}),
               ConfigError);
}

TEST(Config, Sha1KnownVector) {
  EXPECT_EQ(sha1_hex("abc"), "a9993e364706816aba3e25717850c26c9cd0d89d");
  EXPECT_EQ(sha1_hex(""), "da39a3ee5e6b4b0d3255bfef95601890afd80709");
}

// ---------------------------------------------------------------------------
// Manifest

TEST(Manifest, JsonRoundTripKeepsFilesSorted) {
  Manifest m;
  m.config_path = "c.info";
  m.config_sha1 = "abc";
  m.seed = 7;
  m.artifact_dir = "run";
  m.mode = "federated";
  m.variant = "biwgan_gp";
  m.dataset_sha1 = "def";
  m.record({"z.csv", "1", true});
  m.record({"a.csv", "2", false});
  m.record({"z.csv", "3", true});
  ASSERT_EQ(m.files.size(), 2u);
  EXPECT_EQ(m.files[0].path, "a.csv");
  const Manifest back = parse_manifest(manifest_json(m));
  EXPECT_EQ(back.seed, 7u);
  EXPECT_EQ(back.files.size(), 2u);
  EXPECT_EQ(back.find("z.csv")->sha1, "3");
  EXPECT_FALSE(back.find("a.csv")->reproducible);
  EXPECT_THROW(parse_manifest("{}"), FormatError);
}

// ---------------------------------------------------------------------------
// Commands

TEST(Commands, TrainWritesEveryArtifactKindAndRecordsIt) {
  const fs::path dir = scratch("train");
  const std::string run = full_run(tiny_opts(dir, "run"));
  const Manifest m = parse_manifest(read_text(fs::path(run) / run_files::manifest));
  for (const std::string f :
       {run_files::config, run_files::traces, run_files::ledger, run_files::timing,
        run_files::costs, run_files::val, run_files::test, run_files::global,
        run_files::thresholds, run_files::scores, run_files::metrics}) {
    EXPECT_TRUE(fs::exists(fs::path(run) / f)) << f;
    EXPECT_NE(m.find(f), nullptr) << f;
  }
  for (std::size_t s = 0; s < 2; ++s) {
    EXPECT_NE(m.find(run_files::monitor_model(s, 0)), nullptr);
  }
  // Every regular file except the manifest itself is recorded.
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(run)) {
    if (e.is_regular_file() && e.path().filename() != run_files::manifest) ++files;
  }
  EXPECT_EQ(files, m.files.size());
  EXPECT_FALSE(m.find(run_files::timing)->reproducible);
  EXPECT_EQ(m.mode, "federated");
}

TEST(Commands, RerunReproducesArtifactsByteForByte) {
  const fs::path dir = scratch("rerun");
  const std::string a = full_run(tiny_opts(dir, "a"));
  const std::string b = full_run(tiny_opts(dir, "b"));
  const Manifest ma = parse_manifest(read_text(fs::path(a) / run_files::manifest));
  const Manifest mb = parse_manifest(read_text(fs::path(b) / run_files::manifest));
  ASSERT_EQ(ma.files.size(), mb.files.size());
  for (std::size_t i = 0; i < ma.files.size(); ++i) {
    EXPECT_EQ(ma.files[i].path, mb.files[i].path);
    if (ma.files[i].reproducible) {
      EXPECT_EQ(read_text(fs::path(a) / ma.files[i].path),
                read_text(fs::path(b) / mb.files[i].path))
          << ma.files[i].path;
    }
  }
  EXPECT_EQ(ma.config_sha1, mb.config_sha1);
}

TEST(Commands, CalibrateTwiceGivesTheSameFile) {
  const fs::path dir = scratch("calibrate_twice");
  std::ostringstream log;
  const std::string run = cmd_train(tiny_opts(dir, "run"), log);
  cmd_calibrate(run, std::nullopt, false, log);
  const std::string first = read_text(fs::path(run) / run_files::thresholds);
  cmd_calibrate(run, std::nullopt, false, log);
  EXPECT_EQ(first, read_text(fs::path(run) / run_files::thresholds));
}

TEST(Commands, ThresholdsSitBetweenTheClassMeans) {
  const fs::path dir = scratch("thresholds");
  std::ostringstream log;
  const std::string run = cmd_train(tiny_opts(dir, "run"), log);
  cmd_calibrate(run, 0.5, false, log);
  std::istringstream in(read_text(fs::path(run) / run_files::thresholds));
  std::string line;
  std::getline(in, line);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> c;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) c.push_back(cell);
    ASSERT_EQ(c.size(), 9u);
    EXPECT_EQ(c[0], "monitor");
    EXPECT_EQ(std::stod(c[2]), 0.5);
    const double thr = std::stod(c[3]), mn = std::stod(c[4]), ma = std::stod(c[5]);
    EXPECT_DOUBLE_EQ(thr, (mn + ma) / 2.0);
    ++rows;
  }
  EXPECT_EQ(rows, 2u);
}

TEST(Commands, MetricsAreInternallyConsistent) {
  const fs::path dir = scratch("metrics");
  const std::string run = full_run(tiny_opts(dir, "run"));
  const auto j = nlohmann::json::parse(read_text(fs::path(run) / run_files::metrics));
  const auto tp = j["counts"]["tp"].get<std::uint64_t>();
  const auto fp = j["counts"]["fp"].get<std::uint64_t>();
  const auto fn = j["counts"]["fn"].get<std::uint64_t>();
  const auto tn = j["counts"]["tn"].get<std::uint64_t>();
  EXPECT_EQ(j["f1"]["numerator"].get<std::uint64_t>() * (2 * tp + fp + fn),
            j["f1"]["denominator"].get<std::uint64_t>() * 2 * tp);
  EXPECT_EQ(j["accuracy"]["denominator"].get<std::uint64_t>(), tp + fp + fn + tn);
  if (!j["precision"]["value"].is_null() && !j["recall"]["value"].is_null() && tp > 0) {
    const double p = j["precision"]["value"].get<double>();
    const double r = j["recall"]["value"].get<double>();
    EXPECT_NEAR(j["f1"]["value"].get<double>(), 2 * p * r / (p + r), 1e-12);
  }
  EXPECT_EQ(j["fault_recall"].size(), 4u);
}

TEST(Commands, TamperedArtifactIsRefused) {
  const fs::path dir = scratch("tamper");
  std::ostringstream log;
  const std::string run = cmd_train(tiny_opts(dir, "run"), log);
  cmd_calibrate(run, std::nullopt, false, log);
  {
    std::ofstream out(fs::path(run) / run_files::thresholds, std::ios::app);
    out << "monitor,9,0.9,1,0,2,1,1,0\n";
  }
  try {
    cmd_detect(run, log);
    FAIL() << "expected ProvenanceError";
  } catch (const ProvenanceError& e) {
    EXPECT_EQ(exit_code_for(e), kExitRuntime);
  }
}

TEST(Commands, CheckpointFromAnotherConfigIsRefused) {
  const fs::path dir = scratch("foreign");
  std::ostringstream log;
  const std::string a = cmd_train(tiny_opts(dir, "a"), log);
  CommonOptions other = tiny_opts(dir, "b");
  other.seed = 99;
  const std::string b = cmd_train(other, log);
  // Swap in b's checkpoint and fix up the manifest hash so only the
  // embedded configuration hash can catch it.
  const std::string rel = run_files::monitor_model(0, 0);
  fs::copy_file(fs::path(b) / rel, fs::path(a) / rel, fs::copy_options::overwrite_existing);
  Manifest m = parse_manifest(read_text(fs::path(a) / run_files::manifest));
  m.record({rel, sha1_hex(read_text(fs::path(a) / rel)), true});
  write_text(fs::path(a) / run_files::manifest, manifest_json(m));
  EXPECT_THROW(cmd_calibrate(a, std::nullopt, false, log), ProvenanceError);
}

TEST(Commands, MissingAnomaliesFailWithDiagnostic) {
  const fs::path dir = scratch("no_anomalies");
  std::ostringstream log;
  const std::string run = cmd_train(
      tiny_opts(dir, "run", "data\n{\n  injection\n  {\n    rate 0\n  }\n}\n"), log);
  try {
    cmd_calibrate(run, std::nullopt, false, log);
    FAIL() << "expected EvaluationError";
  } catch (const EvaluationError& e) {
    EXPECT_NE(std::string(e.what()).find("no injected anomalies"), std::string::npos);
    EXPECT_EQ(exit_code_for(e), kExitRuntime);
  }
}

TEST(Commands, CentralizedAcceptsManySlicesAndPooledThreshold) {
  const fs::path dir = scratch("centralized");
  CommonOptions o = tiny_opts(dir, "run");
  o.mode = "centralized";
  std::ostringstream log;
  const std::string run = cmd_train(o, log);
  cmd_calibrate(run, std::nullopt, true, log);
  const std::string t = read_text(fs::path(run) / run_files::thresholds);
  EXPECT_NE(t.find("\npooled,"), std::string::npos);
  cmd_evaluate(run, log);
  EXPECT_TRUE(fs::exists(fs::path(run) / run_files::metrics));
}

TEST(Commands, PooledThresholdNeedsCentralizedRun) {
  const fs::path dir = scratch("pooled_usage");
  std::ostringstream log;
  const std::string run = cmd_train(tiny_opts(dir, "run"), log);
  try {
    cmd_calibrate(run, std::nullopt, true, log);
    FAIL() << "expected UsageError";
  } catch (const UsageError& e) {
    EXPECT_EQ(exit_code_for(e), kExitUsage);
  }
}

TEST(Commands, DetectWithoutCalibrationFails) {
  const fs::path dir = scratch("no_calibration");
  std::ostringstream log;
  const std::string run = cmd_train(tiny_opts(dir, "run"), log);
  EXPECT_THROW(cmd_detect(run, log), ProvenanceError);
}

TEST(Commands, ReportCostsNeedsALedger) {
  const fs::path dir = scratch("costs_empty");
  std::ostringstream log;
  fs::create_directories(dir / "empty");
  try {
    cmd_report_costs({(dir / "empty").string()}, (dir / "out").string(), log);
    FAIL() << "expected a runtime error";
  } catch (const std::runtime_error& e) {
    EXPECT_EQ(exit_code_for(e), kExitRuntime);
  }
}

TEST(Commands, ReportCostsSeriesFollowBatchAndAggregationPeriod) {
  const fs::path dir = scratch("costs_series");
  std::ostringstream log;
  auto run_with = [&](const std::string& name, const std::string& extra) {
    return cmd_train(tiny_opts(dir, name, "training\n{\n" + extra + "}\n"), log);
  };
  const std::string m4 = run_with("m4", "  batch_size 4\n");
  const std::string m8 = run_with("m8", "  batch_size 8\n");
  const std::string l1 = run_with("l1", "  local_iterations 1\n");
  const std::string l4 = run_with("l4", "  local_iterations 4\n");
  cmd_report_costs({m4, m8, l1, l4}, (dir / "out").string(), log);

  auto rows = [&](const char* file) {
    std::istringstream in(read_text(dir / "out" / file));
    std::string line;
    std::getline(in, line);
    std::map<std::string, std::vector<std::string>> out;
    while (std::getline(in, line)) {
      std::vector<std::string> c;
      std::istringstream ls(line);
      for (std::string cell; std::getline(ls, cell, ',');) c.push_back(cell);
      out[c[0]] = c;
    }
    return out;
  };
  auto batch = rows("bytes_vs_batch_size.csv");
  EXPECT_LT(std::stoull(batch["m4"][3]), std::stoull(batch["m8"][3]));
  auto local = rows("bytes_vs_local_iterations.csv");
  EXPECT_EQ(local["l1"][3], "4");  // floor(4 / 1)
  EXPECT_EQ(local["l4"][3], "1");  // floor(4 / 4)
  EXPECT_GT(std::stoull(local["l1"][4]), std::stoull(local["l4"][4]));
  auto memory = read_text(dir / "out" / "memory_vs_dataset_size.csv");
  EXPECT_NE(memory.find(",4,"), std::string::npos);
  auto time = read_text(dir / "out" / "time_vs_iterations.csv");
  EXPECT_NE(time.find("m4,federated,3,"), std::string::npos);
}

TEST(Commands, SingleVariantCompareMatchesCentralizedEvaluate) {
  const fs::path dir = scratch("compare");
  CommonOptions o = tiny_opts(dir, "run");
  o.mode = "centralized";
  const std::string run = full_run(o);
  const auto j = nlohmann::json::parse(read_text(fs::path(run) / run_files::metrics));

  CompareOptions c;
  c.common = tiny_opts(dir, "cmp");
  c.variants = {"biwgan_gp"};
  std::ostringstream log;
  cmd_compare(c, log);
  std::istringstream in(read_text(dir / "cmp" / "compare.csv"));
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  std::vector<std::string> cells;
  std::istringstream rs(row);
  for (std::string cell; std::getline(rs, cell, ',');) cells.push_back(cell);
  ASSERT_GE(cells.size(), 8u);
  EXPECT_EQ(cells[0], "biwgan_gp");
  EXPECT_EQ(cells[2], "centralized");
  const Manifest m = parse_manifest(read_text(fs::path(run) / run_files::manifest));
  EXPECT_EQ(cells[3], m.dataset_sha1);
  EXPECT_EQ(std::stoull(cells[4]), j["counts"]["tp"].get<std::uint64_t>());
  EXPECT_EQ(std::stoull(cells[5]), j["counts"]["fp"].get<std::uint64_t>());
  EXPECT_EQ(std::stoull(cells[6]), j["counts"]["tn"].get<std::uint64_t>());
  EXPECT_EQ(std::stoull(cells[7]), j["counts"]["fn"].get<std::uint64_t>());
}

TEST(Commands, CompareRowsShareTheDatasetHashPerSeed) {
  const fs::path dir = scratch("compare_hash");
  CompareOptions c;
  c.common = tiny_opts(dir, "cmp");
  c.variants = {"gan", "wgan", "biwgan_gp"};
  std::ostringstream log;
  cmd_compare(c, log);
  std::istringstream in(read_text(dir / "cmp" / "compare.csv"));
  std::string line;
  std::getline(in, line);
  std::set<std::string> hashes;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream rs(line);
    for (std::string cell; std::getline(rs, cell, ',');) cells.push_back(cell);
    hashes.insert(cells.at(3));
    ++rows;
  }
  EXPECT_EQ(rows, 3u);
  EXPECT_EQ(hashes.size(), 1u);
  EXPECT_TRUE(fs::exists(dir / "cmp" / "compare_summary.csv"));
}

TEST(Commands, CompareRejectsUnknownVariant) {
  const fs::path dir = scratch("compare_bad");
  CompareOptions c;
  c.common = tiny_opts(dir, "cmp");
  c.variants = {"vae"};
  std::ostringstream log;
  EXPECT_THROW(cmd_compare(c, log), ConfigError);
}

TEST(Commands, SynthWritesOneFilePerMonitor) {
  const fs::path dir = scratch("synth");
  SynthOptions s;
  s.config = tiny_config(dir).string();
  s.out = (dir / "data").string();
  s.length = 50;
  std::ostringstream log;
  cmd_synth(s, log);
  EXPECT_TRUE(fs::exists(dir / "data" / "monitor_s0_n0.csv"));
  EXPECT_TRUE(fs::exists(dir / "data" / "monitor_s1_n0.csv"));
  const std::string text = read_text(dir / "data" / "monitor_s1_n0.csv");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 51);

  SynthOptions single;
  single.out = (dir / "one.csv").string();
  single.length = 10;
  cmd_synth(single, log);
  EXPECT_TRUE(fs::exists(dir / "one.csv"));
}

TEST(Commands, FileSourceTrainsOnWrittenRecords) {
  const fs::path dir = scratch("files");
  SynthOptions s;
  s.config = tiny_config(dir).string();
  s.out = (dir / "data").string();
  std::ostringstream log;
  cmd_synth(s, log);
  const std::string files =
      "data\n{\n  source files\n  files\n  {\n"
      "    monitor\n    {\n      slice 0\n      monitor 0\n      path data/monitor_s0_n0.csv\n    }\n"
      "    monitor\n    {\n      slice 1\n      monitor 0\n      path data/monitor_s1_n0.csv\n    }\n"
      "  }\n}\n";
  const std::string from_files = full_run(tiny_opts(dir, "files_run", files));
  const std::string synthetic = full_run(tiny_opts(dir, "synth_run"));
  const Manifest a = parse_manifest(read_text(fs::path(from_files) / run_files::manifest));
  const Manifest b = parse_manifest(read_text(fs::path(synthetic) / run_files::manifest));
  // The CSV round trip keeps the records, so the prepared data is the same.
  EXPECT_EQ(a.dataset_sha1, b.dataset_sha1);
}

TEST(Commands, GradcheckSuitePasses) {
  std::ostringstream log;
  EXPECT_TRUE(cmd_gradcheck(2, 5, log)) << log.str();
  EXPECT_NE(log.str().find("0 failed"), std::string::npos);
}
