#include "fedgan/federation/wire.hpp"

#include <algorithm>

#include "fedgan/common/binary_io.hpp"
#include "fedgan/common/error.hpp"

namespace fedgan::federation {

const char* to_string(MessageType t) {
  switch (t) {
    case MessageType::batch_upload: return "batch_upload";
    case MessageType::gen_packet: return "gen_packet";
    case MessageType::feedback_packet: return "feedback_packet";
    case MessageType::param_upload: return "param_upload";
    case MessageType::global_broadcast: return "global_broadcast";
    case MessageType::initial_model: return "initial_model";
    case MessageType::data_upload: return "data_upload";
  }
  return "?";
}

std::size_t message_bytes(std::size_t payload_count) { return kHeaderBytes + 8 * payload_count; }

std::vector<std::uint8_t> encode_message(const Header& h, std::span<const double> payload) {
  ByteWriter w;
  w.u8(kWireVersion);
  w.u8(static_cast<std::uint8_t>(h.type));
  w.u16(h.slice);
  w.u32(h.monitor);
  w.u64(h.iteration);
  w.f64s(payload);
  return w.take();
}

Header decode_header(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const std::uint8_t version = r.u8();
  if (version != kWireVersion) {
    throw FormatError("unsupported wire version " + std::to_string(version));
  }
  const std::uint8_t type = r.u8();
  if (type < 1 || type > 7) throw FormatError("unknown message type " + std::to_string(type));
  Header h;
  h.type = static_cast<MessageType>(type);
  h.slice = r.u16();
  h.monitor = r.u32();
  h.iteration = r.u64();
  return h;
}

std::vector<double> decode_payload(std::span<const std::uint8_t> bytes, std::size_t count) {
  if (bytes.size() != message_bytes(count)) {
    throw FormatError("message holds " + std::to_string(bytes.size()) + " bytes, expected " +
                      std::to_string(message_bytes(count)));
  }
  ByteReader r(bytes.subspan(kHeaderBytes));
  return r.f64s(count);
}

void GenPacket::validate() const {
  if (f.dim(0) != z.dim(0) || f.dim(0) != x_bar.dim(0)) {
    throw DimensionError("gen packet batch sizes disagree: f " + shape_to_string(f.shape()) +
                         ", z " + shape_to_string(z.shape()) + ", x_bar " +
                         shape_to_string(x_bar.shape()));
  }
}

std::vector<double> GenPacket::payload() const {
  validate();
  std::vector<double> out;
  out.reserve(f.size() + z.size() + x_bar.size());
  for (const Tensor* t : {&f, &z, &x_bar}) out.insert(out.end(), t->data().begin(), t->data().end());
  return out;
}

GenPacket GenPacket::from_payload(std::span<const double> v, std::size_t M, std::size_t t,
                                  std::size_t d, std::size_t latent) {
  const std::size_t nf = M * latent, nx = M * t * d;
  if (v.size() != 2 * nf + nx) throw FormatError("gen packet payload has the wrong length");
  GenPacket p;
  p.f = Tensor({M, latent}, {v.begin(), v.begin() + nf});
  p.z = Tensor({M, latent}, {v.begin() + nf, v.begin() + 2 * nf});
  p.x_bar = Tensor({M, t, d}, {v.begin() + 2 * nf, v.end()});
  return p;
}

std::vector<double> FeedbackPacket::payload() const {
  std::vector<double> out;
  for (const Tensor* t : {&e.data, &e.latent, &g.data, &g.latent}) {
    out.insert(out.end(), t->data().begin(), t->data().end());
  }
  return out;
}

FeedbackPacket FeedbackPacket::from_payload(std::span<const double> v, std::size_t M,
                                            std::size_t t, std::size_t d, std::size_t latent) {
  const std::size_t nx = M * t * d, nz = M * latent;
  if (v.size() != 2 * (nx + nz)) throw FormatError("feedback payload has the wrong length");
  auto part = [&](std::size_t off, std::size_t n) {
    return std::vector<double>(v.begin() + off, v.begin() + off + n);
  };
  FeedbackPacket p;
  p.e = models::JointBatch(Tensor({M, t, d}, part(0, nx)), Tensor({M, latent}, part(nx, nz)),
                           models::Provenance::real);
  p.g = models::JointBatch(Tensor({M, t, d}, part(nx + nz, nx)),
                           Tensor({M, latent}, part(2 * nx + nz, nz)), models::Provenance::fake);
  return p;
}

}  // namespace fedgan::federation
