#pragma once

// Checkpoint container (all integers little-endian):
//
//   magic    8 bytes  "WS3DCKPT"
//   version  u32      currently 1
//   meta_len u32, meta bytes (UTF-8 JSON, free-form)
//   count    u32
//   count x { name_len u32, name bytes, ndim u32, dims u64 x ndim,
//             values f64 x prod(dims) (IEEE-754, little-endian) }

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ws3d/nn/graph.hpp"

namespace ws3d::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<double> values;
};

struct Checkpoint {
    std::string meta;
    std::vector<NamedArray> arrays;
};

std::vector<std::byte> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::byte> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Snapshot of the given parameters.
Checkpoint to_checkpoint(std::span<ParamTensor* const> params, std::string meta = {});
/// Copies arrays into parameters by name; throws on missing names or shape
/// mismatches.
void restore(std::span<ParamTensor* const> params, const Checkpoint& ckpt, const std::string& prefix = {});

}  // namespace ws3d::nn
