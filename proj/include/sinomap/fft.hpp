#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace sinomap {

/// In-place radix-2 FFT; size must be a power of two.
void fft(std::vector<std::complex<double>>& x);

/// In-place inverse FFT (includes the 1/N scale).
void ifft(std::vector<std::complex<double>>& x);

/// Smallest power of two >= n.
std::size_t next_pow2(std::size_t n);

}  // namespace sinomap
