#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ltdlab/tensor.hpp"

namespace ltd {

// .ltdt layout, little-endian, no padding:
//   "LTDT" | version u8 | rank u8 (1-4) | reserved u16 = 0 | rank x u32 dims | payload
// Version 1 stores the payload as f32 and widens on load. Version 2 stores f64
// and is used for checkpoints, where parameters must survive bit-exactly.
enum class Precision : std::uint8_t { F32 = 1, F64 = 2 };

std::vector<std::uint8_t> encode_tensor(const Tensor& t, Precision precision = Precision::F32);
Tensor decode_tensor(std::span<const std::uint8_t> bytes);

void save_tensor(const Tensor& t, const std::filesystem::path& path, Precision precision = Precision::F32);
Tensor load_tensor(const std::filesystem::path& path);

/// Rounds every element through f32, giving the tensor a v1 file would load back.
Tensor round_to_f32(const Tensor& t);

}  // namespace ltd
