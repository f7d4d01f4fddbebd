#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "relphormer/tensor.hpp"

namespace relphormer {

// Binary parameter file: magic "RLPH", format version u32, tensor count u32,
// then per tensor: name length u32 + UTF-8 name, rank u32, dims u64 each,
// little-endian f64 payload.
inline constexpr uint32_t kCheckpointVersion = 1;

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, num::Tensor>>& tensors);

std::vector<std::pair<std::string, num::Tensor>> load_checkpoint(const std::string& path);

}  // namespace relphormer
