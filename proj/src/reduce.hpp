#pragma once

#include <cmath>
#include <cstddef>

// Deterministic reductions with a fixed 8-lane accumulation pattern. The
// lane structure lets the compiler issue SIMD adds/fmas while keeping the
// combine order independent of optimization level for a given length.

namespace pwg::detail {

inline double combine8(const double acc[8], double tail) {
  return (((acc[0] + acc[1]) + (acc[2] + acc[3])) +
          ((acc[4] + acc[5]) + (acc[6] + acc[7]))) +
         tail;
}

inline double det_sum(const double* x, std::size_t n) {
  double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (int l = 0; l < 8; ++l) acc[l] += x[i + l];
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += x[i];
  return combine8(acc, tail);
}

inline double det_dot(const double* x, const double* y, std::size_t n) {
  double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (int l = 0; l < 8; ++l) acc[l] = std::fma(x[i + l], y[i + l], acc[l]);
  }
  double tail = 0.0;
  for (; i < n; ++i) tail = std::fma(x[i], y[i], tail);
  return combine8(acc, tail);
}

inline double det_sumsq(const double* x, std::size_t n) { return det_dot(x, x, n); }

inline double det_sum_abs(const double* x, std::size_t n) {
  double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (int l = 0; l < 8; ++l) acc[l] += std::fabs(x[i + l]);
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += std::fabs(x[i]);
  return combine8(acc, tail);
}

}  // namespace pwg::detail
