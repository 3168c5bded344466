#pragma once

#include <filesystem>

#include <json.hpp>

#include "smoky/nn/layers.hpp"

namespace smoky::nn {

// Checkpoint layout (all integers little-endian):
//   8 bytes   magic "SMKYCKP1"
//   8 bytes   header length L
//   L bytes   UTF-8 JSON header: caller metadata under "meta" plus
//             "tensors": [{"name": ..., "shape": [...]}, ...]
//   then the float32 payload of every tensor in header order.

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& meta,
                     const StateList& state);

nlohmann::json read_checkpoint_meta(const std::filesystem::path& path);

/// Fills `state` (which must list the same names and shapes, in order) from
/// the file. Throws ConfigError on any structural mismatch.
void load_checkpoint(const std::filesystem::path& path, const StateList& state);

}  // namespace smoky::nn
