#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedgan/common/tensor.hpp"

namespace fedgan {

// Named tensors plus free-form key/value metadata, stored in a versioned
// little-endian container:
//   "FEDGANCK" | u32 version | u32 n_meta | (str key, str value)* |
//   u32 n_tensors | (str name, u32 rank, u64 dims[rank], f64 data[])*
struct NamedTensor {
  std::string name;
  Tensor value;
};

struct Checkpoint {
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<NamedTensor> tensors;

  const std::string* find_meta(const std::string& key) const;
  const std::string& meta(const std::string& key) const;  // FormatError when absent
  void set_meta(const std::string& key, std::string value);
  const Tensor& tensor(const std::string& name) const;    // FormatError when absent
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace fedgan
