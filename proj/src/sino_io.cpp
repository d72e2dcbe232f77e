#include "sinomap/sino_io.hpp"

#include <cstdio>
#include <cstring>

#include "sinomap/fsutil.hpp"

namespace sinomap {

namespace {
constexpr char kMagic[4] = {'S', 'I', 'N', 'O'};
}

SinoFile read_sinogram(const std::string& path) {
    std::vector<std::uint8_t> bytes = read_file_bytes(path);
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw SinoBadMagic(path + ": not a sinogram file (bad magic)");

    std::size_t pos = 4;
    if (bytes.size() < 20)
        throw SinoTruncated(path + ": truncated header");
    std::uint32_t version = get_u32(bytes, pos);
    if (version != kSinoFormatVersion)
        throw SinoBadVersion(path + ": unsupported format version " + std::to_string(version));
    std::uint32_t kind = get_u32(bytes, pos);
    if (kind > 1)
        throw SinoFormatError(path + ": unknown payload kind " + std::to_string(kind));
    std::uint32_t n_angles = get_u32(bytes, pos);
    std::uint32_t n_detectors = get_u32(bytes, pos);

    std::size_t n = static_cast<std::size_t>(n_angles) * n_detectors;
    if (bytes.size() < pos + 8 * n)
        throw SinoTruncated(path + ": payload truncated (" + std::to_string(bytes.size() - pos) +
                            " of " + std::to_string(8 * n) + " bytes)");
    if (bytes.size() > pos + 8 * n)
        throw SinoFormatError(path + ": trailing bytes after payload");

    SinoFile out;
    out.kind = static_cast<SinoKind>(kind);
    out.data = Grid(n_angles, n_detectors);
    for (std::size_t i = 0; i < n; ++i) out.data[i] = get_f64(bytes, pos);
    return out;
}

void write_sinogram(const std::string& path, const Grid& data, SinoKind kind) {
    std::vector<std::uint8_t> bytes;
    bytes.reserve(20 + 8 * data.size());
    bytes.insert(bytes.end(), kMagic, kMagic + 4);
    put_u32(bytes, kSinoFormatVersion);
    put_u32(bytes, static_cast<std::uint32_t>(kind));
    put_u32(bytes, static_cast<std::uint32_t>(data.rows()));
    put_u32(bytes, static_cast<std::uint32_t>(data.cols()));
    for (std::size_t i = 0; i < data.size(); ++i) put_f64(bytes, data[i]);
    write_file_atomic(path, bytes.data(), bytes.size());
}

void write_pgm(const std::string& path, const Grid& g, double lo, double hi) {
    const double span = hi - lo;
    char header[128];
    int hlen = std::snprintf(header, sizeof(header), "P5\n# window %.17g %.17g\n%zu %zu\n65535\n",
                             lo, hi, g.cols(), g.rows());
    std::vector<std::uint8_t> bytes(header, header + hlen);
    bytes.reserve(hlen + 2 * g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        double t = span > 0.0 ? (g[i] - lo) / span : 0.0;
        t = std::min(std::max(t, 0.0), 1.0);
        auto v = static_cast<std::uint16_t>(t * 65535.0 + 0.5);
        bytes.push_back(static_cast<std::uint8_t>(v >> 8));  // big-endian per PGM
        bytes.push_back(static_cast<std::uint8_t>(v & 0xff));
    }
    write_file_atomic(path, bytes.data(), bytes.size());
    char window[80];
    std::snprintf(window, sizeof(window), "window %.17g %.17g\n", lo, hi);
    write_file_atomic(path + ".window.txt", std::string(window));
}

void write_pgm(const std::string& path, const Grid& g) {
    write_pgm(path, g, g.min_value(), g.max_value());
}

}  // namespace sinomap
