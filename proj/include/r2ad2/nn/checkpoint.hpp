#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "r2ad2/nn/network.hpp"

namespace r2ad2::nn {

inline constexpr char kCheckpointMagic[8] = {'R', '2', 'A', 'D', '2', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Serialises architecture, batch-norm settings, parameters and running
/// statistics. Byte layout is documented in docs/checkpoint-format.md.
std::string encode_checkpoint(const Network& net);
Network decode_checkpoint(const std::string& bytes);

void save_checkpoint(const Network& net, const std::filesystem::path& path);
Network load_checkpoint(const std::filesystem::path& path);

/// Digest of the encoded checkpoint bytes.
std::uint64_t checkpoint_hash(const Network& net);

}  // namespace r2ad2::nn
