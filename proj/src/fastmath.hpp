#pragma once

#include <bit>
#include <cmath>
#include <cstdint>

// Branch-free f64 exp/log/tanh/sigmoid used by the elementwise kernels.
// Plain libm calls block auto-vectorization and libmvec variants round
// differently from scalar libm, which would make results depend on where an
// element lands relative to a loop's vector epilogue. These are pure
// fma/bit-op sequences, so scalar and SIMD evaluation agree bitwise lane by
// lane. Accuracy: exp ~1 ulp, log ~1e-13 relative.

namespace pwg::detail {

// 1.5 * 2^52; adding it rounds a small double to integer (nearest-even).
inline constexpr double kRoundMagic = 6755399441055744.0;

inline double fast_exp(double x) {
  constexpr double kInvLn2 = 1.4426950408889634074;
  constexpr double kLn2Hi = 6.93147180369123816490e-01;
  constexpr double kLn2Lo = 1.90821492927058770002e-10;
  x = x < -708.0 ? -708.0 : x;
  x = x > 708.0 ? 708.0 : x;
  const double fx = std::fma(x, kInvLn2, kRoundMagic);
  const auto nbits = std::bit_cast<std::uint64_t>(fx);
  const double nf = fx - kRoundMagic;
  double r = std::fma(nf, -kLn2Hi, x);
  r = std::fma(nf, -kLn2Lo, r);
  // exp(r) on [-ln2/2, ln2/2], truncated Taylor, error below 1 ulp
  double p = 1.0 / 6227020800.0;  // 1/13!
  p = std::fma(p, r, 1.0 / 479001600.0);
  p = std::fma(p, r, 1.0 / 39916800.0);
  p = std::fma(p, r, 1.0 / 3628800.0);
  p = std::fma(p, r, 1.0 / 362880.0);
  p = std::fma(p, r, 1.0 / 40320.0);
  p = std::fma(p, r, 1.0 / 5040.0);
  p = std::fma(p, r, 1.0 / 720.0);
  p = std::fma(p, r, 1.0 / 120.0);
  p = std::fma(p, r, 1.0 / 24.0);
  p = std::fma(p, r, 1.0 / 6.0);
  p = std::fma(p, r, 0.5);
  p = std::fma(p, r, 1.0);
  p = std::fma(p, r, 1.0);
  // 2^n assembled from the low mantissa bits of fx (n in [-1022, 1023])
  const double scale = std::bit_cast<double>((nbits + 1023) << 52);
  return p * scale;
}

// Natural log for strictly positive finite x.
inline double fast_log(double x) {
  constexpr double kLn2Hi = 6.93147180369123816490e-01;
  constexpr double kLn2Lo = 1.90821492927058770002e-10;
  constexpr double kSqrt2 = 1.4142135623730951;
  const auto bits = std::bit_cast<std::uint64_t>(x);
  const double e_raw =
      static_cast<double>(static_cast<std::int32_t>((bits >> 52) & 0x7ffULL)) - 1023.0;
  const double m_raw =
      std::bit_cast<double>((bits & 0x000fffffffffffffULL) | 0x3ff0000000000000ULL);
  const bool high = m_raw > kSqrt2;
  const double m = high ? 0.5 * m_raw : m_raw;
  const double e = high ? e_raw + 1.0 : e_raw;
  const double s = (m - 1.0) / (m + 1.0);
  const double z = s * s;
  double p = 1.0 / 15.0;
  p = std::fma(p, z, 1.0 / 13.0);
  p = std::fma(p, z, 1.0 / 11.0);
  p = std::fma(p, z, 1.0 / 9.0);
  p = std::fma(p, z, 1.0 / 7.0);
  p = std::fma(p, z, 1.0 / 5.0);
  p = std::fma(p, z, 1.0 / 3.0);
  const double r = 2.0 * s;
  const double log_m = std::fma(r * z, p, r);
  return std::fma(e, kLn2Hi, log_m) + e * kLn2Lo;
}

inline double fast_sigmoid(double x) {
  x = x < -40.0 ? -40.0 : x;
  x = x > 40.0 ? 40.0 : x;
  return 1.0 / (1.0 + fast_exp(-x));
}

inline double fast_tanh(double x) {
  double a = std::fabs(x);
  a = a > 20.0 ? 20.0 : a;
  const double t = 1.0 - 2.0 / (fast_exp(2.0 * a) + 1.0);
  return std::copysign(t, x);
}

}  // namespace pwg::detail
