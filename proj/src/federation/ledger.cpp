#include "fedgan/federation/ledger.hpp"

#include <algorithm>

#include "fedgan/common/error.hpp"

namespace fedgan::federation {

const char* to_string(Link l) {
  switch (l) {
    case Link::monitor_manager: return "monitor_manager";
    case Link::manager_controller: return "manager_controller";
    case Link::monitor_controller: return "monitor_controller";
  }
  return "?";
}

const char* to_string(Direction d) { return d == Direction::up ? "up" : "down"; }

void CostLedger::record(Link link, Direction dir, std::uint64_t round, MessageType type,
                        std::size_t bytes) {
  LinkRound& r = rounds_[{link, dir, round}];
  ++r.messages;
  r.bytes += bytes;
  r.payload_bytes += bytes - kHeaderBytes;
  ++type_counts_[type];
}

std::uint64_t CostLedger::total_bytes(Link link) const {
  std::uint64_t total = 0;
  for (const auto& [k, r] : rounds_) {
    if (std::get<0>(k) == link) total += r.bytes;
  }
  return total;
}

std::uint64_t CostLedger::total_payload_bytes(Link link) const {
  std::uint64_t total = 0;
  for (const auto& [k, r] : rounds_) {
    if (std::get<0>(k) == link) total += r.payload_bytes;
  }
  return total;
}

std::uint64_t CostLedger::message_count(MessageType type) const {
  auto it = type_counts_.find(type);
  return it == type_counts_.end() ? 0 : it->second;
}

void MessageBus::send(Link link, Direction dir, const Header& h,
                      std::span<const double> payload) {
  auto bytes = encode_message(h, payload);
  std::lock_guard lock(mu_);
  ledger_.record(link, dir, h.iteration, h.type, bytes.size());
  queue_.emplace_back(h, std::move(bytes));
}

std::vector<std::uint8_t> MessageBus::receive(const Header& h) {
  std::lock_guard lock(mu_);
  auto it = std::find_if(queue_.begin(), queue_.end(),
                         [&](const auto& entry) { return entry.first == h; });
  if (it == queue_.end()) {
    throw ProtocolError(std::string("missing ") + to_string(h.type) + " from slice " +
                        std::to_string(h.slice) + " monitor " + std::to_string(h.monitor) +
                        " at iteration " + std::to_string(h.iteration));
  }
  auto bytes = std::move(it->second);
  queue_.erase(it);
  if (decode_header(bytes) != h) throw ProtocolError("message header corrupted in transit");
  return bytes;
}

std::size_t MessageBus::pending() const {
  std::lock_guard lock(mu_);
  return queue_.size();
}

FlopFormulas flop_formulas(const TopologySpec& topo, const TrainingConfig& cfg,
                           const ModelSizes& s) {
  const double I = static_cast<double>(cfg.iterations);
  const double K = static_cast<double>(cfg.critic_iterations);
  const double M = static_cast<double>(cfg.batch_size);
  const double N = static_cast<double>(topo.monitors_per_slice);
  const double S = static_cast<double>(topo.slices);
  const double D = static_cast<double>(s.theta_d);
  const double EG = static_cast<double>(s.theta_e + s.theta_g);
  const double rounds = static_cast<double>(cfg.iterations / cfg.local_iterations);
  FlopFormulas f;
  f.monitor = 4.0 * I * (1.0 + K) * M * D;
  f.standalone_monitor = 4.0 * I * K * M * D + 2.0 * I * M * EG;
  f.manager = 2.0 * I * M * N * EG;
  f.controller = S * EG * rounds;
  f.centralized = 2.0 * S * I * M * N * (2.0 * K * D + EG);
  return f;
}

MemoryEstimate memory_estimate(Mode mode, const TopologySpec& topo, const TrainingConfig& cfg,
                               const ModelSizes& s, std::size_t windows_per_monitor,
                               std::size_t window_values) {
  // Parameters plus the two Adam moments, 8 bytes per value.
  auto model = [](std::size_t params) { return static_cast<std::uint64_t>(24 * params); };
  const std::uint64_t shard = 8ull * windows_per_monitor * window_values;
  const std::uint64_t batch = 8ull * cfg.batch_size * window_values;
  const std::uint64_t monitors = topo.monitor_count();
  MemoryEstimate m;
  switch (mode) {
    case Mode::centralized:
      m.monitor = shard;
      m.controller = model(s.theta_d + s.theta_e + s.theta_g) + monitors * shard;
      break;
    case Mode::standalone:
      m.monitor = model(s.theta_d + s.theta_e + s.theta_g) + shard;
      break;
    case Mode::distributed:
    case Mode::federated:
      m.monitor = model(s.theta_d) + shard;
      m.manager = model(s.theta_e + s.theta_g) + topo.monitors_per_slice * batch;
      if (mode == Mode::federated) {
        m.controller = 8ull * (s.theta_e + s.theta_g) * (topo.slices + 1);
      }
      break;
  }
  return m;
}

}  // namespace fedgan::federation
