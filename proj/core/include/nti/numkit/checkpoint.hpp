#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nti/numkit/tensor.hpp"

namespace nti::numkit {

// On-disk layout (all integers and values little-endian):
//   magic "NTICKPT\0" | u32 version | u32 reserved | u64 metadata bytes | metadata (UTF-8)
//   u64 block count | per block: u32 name bytes | name | u32 rank | u64 dims[rank] | f64 values
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointBlock {
  std::string name;
  Tensor value;
};

struct Checkpoint {
  std::string metadata;
  std::vector<CheckpointBlock> blocks;

  const CheckpointBlock* find(const std::string& name) const;
};

std::string encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace nti::numkit
