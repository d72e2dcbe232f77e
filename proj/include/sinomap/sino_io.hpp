#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "sinomap/grid.hpp"

namespace sinomap {

/// What the payload of a sinogram file means.
enum class SinoKind : std::uint32_t {
    Log = 0,     // log-domain line integrals
    Counts = 1,  // measured photon counts (real-valued)
};

struct SinoFile {
    SinoKind kind = SinoKind::Log;
    Grid data;
};

/// Binary layout: "SINO", version u32, kind u32, n_angles u32,
/// n_detectors u32, then row-major little-endian 64-bit floats.
inline constexpr std::uint32_t kSinoFormatVersion = 1;

struct SinoFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SinoBadMagic : SinoFormatError {
    using SinoFormatError::SinoFormatError;
};
struct SinoBadVersion : SinoFormatError {
    using SinoFormatError::SinoFormatError;
};
struct SinoTruncated : SinoFormatError {
    using SinoFormatError::SinoFormatError;
};

SinoFile read_sinogram(const std::string& path);
void write_sinogram(const std::string& path, const Grid& data, SinoKind kind);

/// 16-bit binary PGM preview; values are windowed linearly from [lo, hi]
/// to [0, 65535] and the window is recorded in a header comment.
void write_pgm(const std::string& path, const Grid& g, double lo, double hi);

/// PGM preview windowed to the field's own value range.
void write_pgm(const std::string& path, const Grid& g);

}  // namespace sinomap
