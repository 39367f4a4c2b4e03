#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "fusereader/tensor.hpp"

namespace fusereader {

// Flat binary tensor container: magic "FTSR", version u16, rank u16, dims as
// u64 little-endian, then the row-major f64 payload (little-endian).
inline constexpr std::uint16_t kTensorFormatVersion = 1;

void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

std::vector<std::uint8_t> tensor_bytes(const Tensor& t);

}  // namespace fusereader
