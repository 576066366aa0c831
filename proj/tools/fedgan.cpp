// Command-line entry point: train, calibrate, detect, evaluate, compare,
// report-costs, synth and gradcheck.

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

#include "fedgan/cli/commands.hpp"
#include "fedgan/common/error.hpp"

namespace {

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    std::uint64_t v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw fedgan::UsageError("invalid seed '" + item + "'");
    out.push_back(v);
  }
  return out;
}

void add_common(CLI::App* cmd, fedgan::cli::CommonOptions& o) {
  cmd->add_option("--config", o.config, "configuration file")->required();
  cmd->add_option("--seed", o.seed, "override the base seed");
  cmd->add_option("--out", o.out, "override the output directory");
  cmd->add_option("--threads", o.threads, "cap on worker threads");
  cmd->add_option("--mode", o.mode,
                  "override the training mode (centralized, standalone, distributed, federated)");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace fedgan::cli;
  CLI::App app{"Federated multi-discriminator BiWGAN-GP anomaly detection"};
  app.require_subcommand(1);

  CommonOptions train_opts;
  auto* train = app.add_subcommand("train", "train models and write a run directory");
  add_common(train, train_opts);

  std::string run_dir;
  std::optional<double> gamma;
  bool pooled = false;
  auto* calibrate = app.add_subcommand("calibrate", "set detection thresholds on validation data");
  calibrate->add_option("--run", run_dir, "run directory")->required();
  calibrate->add_option("--gamma", gamma, "weight of the reconstruction term in [0, 1]");
  calibrate->add_flag("--pooled", pooled, "one threshold for all monitors (centralized runs)");

  auto* detect = app.add_subcommand("detect", "score and classify the test windows");
  detect->add_option("--run", run_dir, "run directory")->required();
  auto* evaluate = app.add_subcommand("evaluate", "precision, recall, F1 and accuracy");
  evaluate->add_option("--run", run_dir, "run directory")->required();

  CompareOptions compare_opts;
  std::string variants = "gan,bigan,wgan,wgan_gp,biwgan_gp";
  std::string seeds;
  auto* compare = app.add_subcommand("compare", "compare model families on identical data");
  add_common(compare, compare_opts.common);
  compare->add_option("--variants", variants, "comma-separated model families");
  compare->add_option("--seeds", seeds, "comma-separated seeds (default: the configured seed)");

  std::vector<std::string> runs;
  std::string costs_out = "costs";
  auto* report = app.add_subcommand("report-costs", "cost tables and plot-ready series");
  report->add_option("--run", runs, "run directories")->required();
  report->add_option("--out", costs_out, "output directory");

  SynthOptions synth_opts;
  auto* synth = app.add_subcommand("synth", "generate synthetic monitoring data");
  synth->add_option("--config", synth_opts.config, "write one file per configured monitor");
  synth->add_option("--out", synth_opts.out, "output file (or directory with --config)")
      ->required();
  synth->add_option("--seed", synth_opts.seed, "seed");
  synth->add_option("--length", synth_opts.length, "records per monitor");

  std::size_t trials = 20;
  std::uint64_t grad_seed = 1;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient oracle suite");
  gradcheck->add_option("--trials", trials, "random configurations per loss");
  gradcheck->add_option("--seed", grad_seed, "seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train) {
      cmd_train(train_opts, std::cerr);
    } else if (*calibrate) {
      cmd_calibrate(run_dir, gamma, pooled, std::cout);
    } else if (*detect) {
      cmd_detect(run_dir, std::cout);
    } else if (*evaluate) {
      cmd_evaluate(run_dir, std::cout);
    } else if (*compare) {
      std::istringstream in(variants);
      for (std::string v; std::getline(in, v, ',');) {
        if (!v.empty()) compare_opts.variants.push_back(v);
      }
      compare_opts.seeds = parse_seed_list(seeds);
      cmd_compare(compare_opts, std::cerr);
    } else if (*report) {
      cmd_report_costs(runs, costs_out, std::cout);
    } else if (*synth) {
      cmd_synth(synth_opts, std::cerr);
    } else if (*gradcheck) {
      return cmd_gradcheck(trials, grad_seed, std::cout) ? kExitOk : kExitRuntime;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitOk;
}
