#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bdet/tensor.hpp"

namespace bdet {

// Tensor file: "TNS4" magic, four little-endian u32 dims, then the raw f32
// payload in row-major (b, c, y, x) order.
void save_tensor(const Tensor4f& t, const std::string& path);
Tensor4f load_tensor(const std::string& path);

// Checkpoint: "BDET" magic, u32 version, u32 entry count, then a table of
// (u32 name length, name bytes, embedded tensor blob) entries.
using NamedTensors = std::vector<std::pair<std::string, Tensor4f>>;
void save_checkpoint(const NamedTensors& tensors, const std::string& path);
NamedTensors load_checkpoint(const std::string& path);

}  // namespace bdet
