// SPDX-License-Identifier: Apache-2.0
#pragma once

// Checkpoint layout (all integers and floats little-endian):
//
//   magic      8 bytes   "RSSLMCK\0"
//   version    u32       1
//   config     u32 layers, u32 units, u32 vocab, u32 max_len, f64 dropout
//   n_arrays   u32
//   n_arrays times:
//     name_len u32, name bytes (no terminator)
//     ndim     u32, dims u64[ndim]
//     data     f64[prod(dims)]
//
// Arrays appear in LmParameters::arrays() order. Round trips are bit exact.

#include <filesystem>

#include "rss/lm/model.hpp"

namespace rss {

inline constexpr char kCheckpointMagic[8] = {'R', 'S', 'S', 'L', 'M', 'C', 'K', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const LmParameters& params, const std::filesystem::path& path);

/// Throws std::runtime_error on a missing file, bad magic/version, or any
/// array whose name or shape disagrees with the stored config.
LmParameters load_checkpoint(const std::filesystem::path& path);

}  // namespace rss
