#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fedgan/common/tensor.hpp"
#include "fedgan/models/joint.hpp"

namespace fedgan::federation {

inline constexpr std::uint8_t kWireVersion = 1;
inline constexpr std::size_t kHeaderBytes = 16;

enum class MessageType : std::uint8_t {
  batch_upload = 1,      // monitor -> manager: real batch X_n
  gen_packet = 2,        // manager -> monitor: f_n, z_n, fake X_n
  feedback_packet = 3,   // monitor -> manager: F_E, F_G
  param_upload = 4,      // manager -> controller: theta_G, theta_E
  global_broadcast = 5,  // controller -> manager: aggregated theta_G, theta_E
  initial_model = 6,     // controller -> manager: starting theta_G, theta_E
  data_upload = 7,       // monitor -> controller: raw training windows (centralized)
};

const char* to_string(MessageType t);

// u8 version | u8 type | u16 slice | u32 monitor | u64 iteration, little-endian.
struct Header {
  MessageType type = MessageType::batch_upload;
  std::uint16_t slice = 0;
  std::uint32_t monitor = 0;
  std::uint64_t iteration = 0;
  bool operator==(const Header&) const = default;
};

// A message is a header followed by raw little-endian f64 values whose
// shapes both ends derive from the experiment configuration.
std::vector<std::uint8_t> encode_message(const Header& h, std::span<const double> payload);
Header decode_header(std::span<const std::uint8_t> bytes);
std::vector<double> decode_payload(std::span<const std::uint8_t> bytes, std::size_t count);
std::size_t message_bytes(std::size_t payload_count);

struct GenPacket {
  std::uint64_t iteration = 0;
  std::uint32_t monitor = 0;
  Tensor f;      // [M x latent]
  Tensor z;      // [M x latent]
  Tensor x_bar;  // [M x t x d]

  void validate() const;  // batch sizes agree
  std::vector<double> payload() const;
  static GenPacket from_payload(std::span<const double> values, std::size_t M, std::size_t t,
                                std::size_t d, std::size_t latent);
};

struct FeedbackPacket {
  std::uint64_t iteration = 0;
  std::uint32_t monitor = 0;
  models::JointBatch e;  // d L_EG / d (X, f)
  models::JointBatch g;  // d L_EG / d (fake X, z)

  std::vector<double> payload() const;
  static FeedbackPacket from_payload(std::span<const double> values, std::size_t M,
                                     std::size_t t, std::size_t d, std::size_t latent);
};

}  // namespace fedgan::federation
