#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "n3net/image.hpp"
#include "n3net/n3_block.hpp"

namespace n3net {

/// Unreadable or malformed checkpoint file.
class CheckpointError : public IoError {
 public:
  using IoError::IoError;
};

struct Checkpoint {
  /// Plain-text config (ConfigText format).
  std::string header;
  std::vector<NamedTensor> tensors;
};

// Layout:
//   "N3NET-CHECKPOINT 1\n", header text, "end_header\n", then
//   u32 tensor count and per tensor: u32 name length, name bytes, u32 rank,
//   u32 dims[rank], float32 values. All integers and floats little-endian.
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

Checkpoint make_checkpoint(const N3Net& net);
/// Copies stored tensors into `net` by name. Throws std::invalid_argument on
/// a missing tensor or shape mismatch.
void load_parameters(N3Net& net, const Checkpoint& ckpt);

}  // namespace n3net
