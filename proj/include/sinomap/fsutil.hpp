#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sinomap {

/// Append little-endian encodings to a byte buffer.
void put_u32(std::vector<std::uint8_t>& buf, std::uint32_t v);
void put_f64(std::vector<std::uint8_t>& buf, double v);

/// Read little-endian values; `pos` advances. Throws on truncation.
std::uint32_t get_u32(const std::vector<std::uint8_t>& buf, std::size_t& pos);
double get_f64(const std::vector<std::uint8_t>& buf, std::size_t& pos);

/// Whole-file IO; writes go through a temp file + rename so outputs appear
/// atomically.
std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_atomic(const std::string& path, const void* data, std::size_t size);
void write_file_atomic(const std::string& path, const std::string& text);

}  // namespace sinomap
