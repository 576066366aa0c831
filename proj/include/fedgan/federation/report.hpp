#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fedgan/federation/training.hpp"

namespace fedgan::federation {

struct LinkTotal {
  Link link;
  Direction direction;
  std::uint64_t messages = 0;
  std::uint64_t bytes = 0;
  std::uint64_t payload_bytes = 0;
};

struct FlopLine {
  std::string node;        // e.g. "monitor[0,1]", "manager[0]", "controller"
  double measured = 0.0;   // accumulated while training
  double closed_form = 0.0;
};

struct CostReport {
  Mode mode = Mode::federated;
  ModelSizes sizes;
  std::vector<LinkTotal> links;
  std::uint64_t aggregation_rounds = 0;  // parameter uploads per slice
  std::vector<FlopLine> flops;
  MemoryEstimate memory;
  std::vector<std::pair<std::string, double>> seconds;
};

CostReport ledger_report(const TrainingResult& result, const TopologySpec& topo,
                         const TrainingConfig& cfg, std::size_t windows_per_monitor);

void write_report_text(std::ostream& os, const CostReport& r);

// round,link,direction,messages,bytes,payload_bytes
void write_ledger_csv(std::ostream& os, const CostLedger& ledger);
// iteration,group,d_loss,eg_loss
void write_traces_csv(std::ostream& os, const std::vector<LossTrace>& traces);
// kind,key,seconds with per-phase totals and cumulative time per iteration
// (not reproducible between runs)
void write_timing_csv(std::ostream& os, const CostLedger& ledger);

}  // namespace fedgan::federation
