#include "fedgan/federation/report.hpp"

#include <iomanip>
#include <ostream>

namespace fedgan::federation {

CostReport ledger_report(const TrainingResult& result, const TopologySpec& topo,
                         const TrainingConfig& cfg, std::size_t windows_per_monitor) {
  CostReport r;
  r.mode = result.mode;
  r.sizes = result.sizes;

  std::map<std::pair<Link, Direction>, LinkTotal> totals;
  for (const auto& [key, round] : result.ledger.rounds()) {
    const auto [link, dir, iteration] = key;
    LinkTotal& t = totals[{link, dir}];
    t.link = link;
    t.direction = dir;
    t.messages += round.messages;
    t.bytes += round.bytes;
    t.payload_bytes += round.payload_bytes;
  }
  for (auto& [k, t] : totals) r.links.push_back(t);
  if (topo.slices > 0) {
    r.aggregation_rounds = result.ledger.message_count(MessageType::param_upload) / topo.slices;
  }

  const FlopFormulas f = flop_formulas(topo, cfg, result.sizes);
  for (const auto& [node, measured] : result.ledger.flops) {
    double expected = 0.0;
    if (node.starts_with("monitor")) {
      expected = result.mode == Mode::standalone ? f.standalone_monitor : f.monitor;
    } else if (node.starts_with("manager")) {
      expected = f.manager;
    } else if (result.mode == Mode::centralized) {
      expected = f.centralized;
    } else {
      expected = f.controller;
    }
    r.flops.push_back({node, measured, expected});
  }
  r.memory = memory_estimate(result.mode, topo, cfg, result.sizes, windows_per_monitor,
                             result.arch.window * result.arch.features);
  for (const auto& [phase, s] : result.ledger.seconds) r.seconds.emplace_back(phase, s);
  return r;
}

void write_report_text(std::ostream& os, const CostReport& r) {
  os << "mode " << to_string(r.mode) << "\n";
  os << "parameters |theta_D|=" << r.sizes.theta_d << " |theta_E|=" << r.sizes.theta_e
     << " |theta_G|=" << r.sizes.theta_g << "\n";
  os << "communication\n";
  if (r.links.empty()) os << "  (no messages)\n";
  for (const LinkTotal& t : r.links) {
    os << "  " << std::left << std::setw(20) << to_string(t.link) << std::setw(5)
       << to_string(t.direction) << " messages=" << t.messages << " bytes=" << t.bytes
       << " payload_bytes=" << t.payload_bytes << "\n";
  }
  os << "aggregation rounds " << r.aggregation_rounds << "\n";
  os << "flops (unit constant)\n";
  os << std::setprecision(12);
  for (const FlopLine& l : r.flops) {
    os << "  " << std::left << std::setw(16) << l.node << " measured=" << l.measured
       << " closed_form=" << l.closed_form << "\n";
  }
  os << "memory bytes monitor=" << r.memory.monitor << " manager=" << r.memory.manager
     << " controller=" << r.memory.controller << "\n";
  os << "wall-clock seconds";
  for (const auto& [phase, s] : r.seconds) os << " " << phase << "=" << std::setprecision(4) << s;
  os << "\n";
}

void write_ledger_csv(std::ostream& os, const CostLedger& ledger) {
  os << "round,link,direction,messages,bytes,payload_bytes\n";
  for (const auto& [key, r] : ledger.rounds()) {
    const auto [link, dir, round] = key;
    os << round << ',' << to_string(link) << ',' << to_string(dir) << ',' << r.messages << ','
       << r.bytes << ',' << r.payload_bytes << '\n';
  }
}

void write_traces_csv(std::ostream& os, const std::vector<LossTrace>& traces) {
  os << "iteration,group,d_loss,eg_loss\n" << std::setprecision(17);
  for (const LossTrace& t : traces) {
    os << t.iteration << ',' << t.group << ',' << t.d_loss << ',' << t.eg_loss << '\n';
  }
}

void write_timing_csv(std::ostream& os, const CostLedger& ledger) {
  os << "kind,key,seconds\n";
  for (const auto& [phase, s] : ledger.seconds) os << "phase," << phase << ',' << s << '\n';
  for (std::size_t i = 0; i < ledger.iteration_seconds.size(); ++i) {
    os << "iteration," << i << ',' << ledger.iteration_seconds[i] << '\n';
  }
}

}  // namespace fedgan::federation
