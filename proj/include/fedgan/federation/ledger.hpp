#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

#include "fedgan/federation/config.hpp"
#include "fedgan/federation/wire.hpp"

namespace fedgan::federation {

enum class Link { monitor_manager, manager_controller, monitor_controller };
enum class Direction { up, down };  // up: towards the controller

const char* to_string(Link l);
const char* to_string(Direction d);

struct LinkRound {
  std::uint64_t messages = 0;
  std::uint64_t bytes = 0;
  std::uint64_t payload_bytes = 0;  // bytes excluding headers
};

// Exact byte counts per link, direction and round, plus flop counters that
// accumulate the unit-constant cost model while a run executes.
class CostLedger {
 public:
  void record(Link link, Direction dir, std::uint64_t round, MessageType type,
              std::size_t bytes);

  using Key = std::tuple<Link, Direction, std::uint64_t>;
  const std::map<Key, LinkRound>& rounds() const { return rounds_; }

  std::uint64_t total_bytes(Link link) const;
  std::uint64_t total_payload_bytes(Link link) const;
  std::uint64_t message_count(MessageType type) const;
  bool empty() const { return rounds_.empty(); }

  // Flops per node class; see the report for the matching closed forms.
  std::map<std::string, double> flops;
  // Wall-clock seconds per phase. Not deterministic; kept out of the CSVs
  // that must reproduce bit for bit.
  std::map<std::string, double> seconds;
  // Cumulative wall-clock seconds at the end of each iteration.
  std::vector<double> iteration_seconds;

 private:
  std::map<Key, LinkRound> rounds_;
  std::map<MessageType, std::uint64_t> type_counts_;
};

// In-process transport: encodes every message, charges the ledger, and
// queues the bytes for the addressee.
class MessageBus {
 public:
  explicit MessageBus(CostLedger& ledger) : ledger_(ledger) {}

  void send(Link link, Direction dir, const Header& h, std::span<const double> payload);
  // Pops the oldest message with matching header; ProtocolError when absent.
  std::vector<std::uint8_t> receive(const Header& h);
  std::size_t pending() const;

 private:
  CostLedger& ledger_;
  mutable std::mutex mu_;
  std::vector<std::pair<Header, std::vector<std::uint8_t>>> queue_;
};

struct ModelSizes {
  std::size_t theta_d = 0, theta_e = 0, theta_g = 0;
};

// Closed-form flop totals with unit proportionality constant.
struct FlopFormulas {
  double monitor = 0;             // 4 I (1 + K) M |D|
  double standalone_monitor = 0;  // 4 I K M |D| + 2 I M (|E| + |G|)
  double manager = 0;             // 2 I M N (|E| + |G|)
  double controller = 0;          // S (|E| + |G|) floor(I / L)
  double centralized = 0;         // 2 S I M N (2 K |D| + |E| + |G|)
};

FlopFormulas flop_formulas(const TopologySpec& topo, const TrainingConfig& cfg,
                           const ModelSizes& sizes);

// Resident bytes (parameters, two Adam moments, local data) per node class.
struct MemoryEstimate {
  std::uint64_t monitor = 0, manager = 0, controller = 0;
};

MemoryEstimate memory_estimate(Mode mode, const TopologySpec& topo, const TrainingConfig& cfg,
                               const ModelSizes& sizes, std::size_t windows_per_monitor,
                               std::size_t window_values);

}  // namespace fedgan::federation
