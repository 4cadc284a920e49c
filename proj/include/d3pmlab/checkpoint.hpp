#pragma once

#include <filesystem>
#include <string>
#include <utility>

#include "d3pmlab/net.hpp"

namespace d3pmlab {

struct CheckpointMeta {
  std::string kind;  // "d3pm" or "ar"
  int step = 0;
  std::string vocab_hash;     // hex of the vocabulary fingerprint
  std::string schedule_kind;  // "none" for ar checkpoints
  int T = 0;
};

// Container: u64 little-endian header length, JSON header (version, kind,
// step, vocab_hash, schedule_kind, T, net config, tensor shapes), then the
// tensors as little-endian 32-bit floats in header order. Parameters are
// float-representable by construction, so save/load is lossless.
void save_checkpoint(const std::filesystem::path& path, const CheckpointMeta& meta,
                     const NetParams& params);
std::pair<CheckpointMeta, NetParams> load_checkpoint(const std::filesystem::path& path);

std::string hash_hex(std::uint64_t hash);

}  // namespace d3pmlab
