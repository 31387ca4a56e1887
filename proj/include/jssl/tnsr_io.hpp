#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "jssl/tensor.hpp"

namespace jssl {

/// "TNSR" container: magic, u8 version (1), u8 ndim, ndim little-endian u64
/// extents, then the payload as little-endian f64.
std::vector<std::uint8_t> encode_tensor(const Tensor& t);
Tensor decode_tensor(const std::vector<std::uint8_t>& bytes);

void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

/// Writes `text` to `path`, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace jssl
