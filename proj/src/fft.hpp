#pragma once

#include <cstddef>

namespace pwg::detail {

constexpr bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 FFT over split re/im arrays. n must be a power
// of two. sign=-1 computes sum x[j] e^{-2 pi i k j / n}; sign=+1 the
// conjugate kernel (no 1/n scaling).
void fft_complex(double* re, double* im, std::size_t n, int sign);

}  // namespace pwg::detail
