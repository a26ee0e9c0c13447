// Copyright 2026 The wfsmc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Scalar elementary functions mirrored lane-for-lane by the AVX2 kernels.
// Everything here has internal linkage: this header is included by
// translation units built with different -m flags, and an ODR-merged copy
// compiled for AVX2 must never leak into the scalar path.

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>

#include "wfsmc/kernels.hpp"

namespace wfsmc::kernels {
namespace {

constexpr double kLog2e = 1.4426950408889634074;
constexpr double kLn2Hi = 6.93147180369123816490e-01;
constexpr double kLn2Lo = 1.90821492927058770002e-10;
constexpr double kExpHi = 709.782712893384;
constexpr double kExpLo = -708.3964185322641;  // log(DBL_MIN); below flushes to 0
constexpr double kSqrt2 = 1.41421356237309504880;
constexpr double kHalfPi = 1.57079632679489661923;
constexpr double kDblMin = std::numeric_limits<double>::min();
constexpr double kTwo54 = 18014398509481984.0;
// 2^52 + 2^51: adding it to a small integer-valued double exposes the
// integer in the low mantissa bits (and vice versa).
constexpr double kRoundMagic = 6755399441055744.0;

// 1/k!, k = 13..0
constexpr double kExpPoly[14] = {
    1.0 / 6227020800.0, 1.0 / 479001600.0, 1.0 / 39916800.0,
    1.0 / 3628800.0,    1.0 / 362880.0,    1.0 / 40320.0,
    1.0 / 5040.0,       1.0 / 720.0,       1.0 / 120.0,
    1.0 / 24.0,         1.0 / 6.0,         0.5,
    1.0,                1.0};

// 1/(2k+1), k = 11..0
constexpr double kLogPoly[12] = {1.0 / 23.0, 1.0 / 21.0, 1.0 / 19.0,
                                 1.0 / 17.0, 1.0 / 15.0, 1.0 / 13.0,
                                 1.0 / 11.0, 1.0 / 9.0,  1.0 / 7.0,
                                 1.0 / 5.0,  1.0 / 3.0,  1.0};

// sin: (-1)^k/(2k+1)!, k = 8..1 ; cos: (-1)^k/(2k)!, k = 9..1
constexpr double kSinPoly[8] = {
    1.0 / 355687428096000.0, -1.0 / 1307674368000.0, 1.0 / 6227020800.0,
    -1.0 / 39916800.0,       1.0 / 362880.0,         -1.0 / 5040.0,
    1.0 / 120.0,             -1.0 / 6.0};
constexpr double kCosPoly[9] = {
    -1.0 / 6402373705728000.0, 1.0 / 20922789888000.0, -1.0 / 87178291200.0,
    1.0 / 479001600.0,         -1.0 / 3628800.0,       1.0 / 40320.0,
    -1.0 / 720.0,              1.0 / 24.0,             -0.5};

inline double exp_scalar(double x) noexcept {
  if (x != x) return x;
  if (x > kExpHi) return std::numeric_limits<double>::infinity();
  if (x < kExpLo) return 0.0;
  const double n = std::nearbyint(x * kLog2e);
  double r = std::fma(-n, kLn2Hi, x);
  r = std::fma(-n, kLn2Lo, r);
  double p = kExpPoly[0];
  for (int k = 1; k < 14; ++k) p = std::fma(p, r, kExpPoly[k]);
  // Split 2^n in two factors so n = 1024 stays representable.
  const auto ni = std::bit_cast<std::int64_t>(n + kRoundMagic) -
                  std::bit_cast<std::int64_t>(kRoundMagic);
  const std::int64_t n1 = ni >> 1;
  const std::int64_t n2 = ni - n1;
  const double s1 = std::bit_cast<double>((n1 + 1023) << 52);
  const double s2 = std::bit_cast<double>((n2 + 1023) << 52);
  return (p * s1) * s2;
}

inline double log_scalar(double x) noexcept {
  if (x != x) return x;
  if (x < 0.0) return std::numeric_limits<double>::quiet_NaN();
  if (x == 0.0) return -std::numeric_limits<double>::infinity();
  if (x == std::numeric_limits<double>::infinity()) return x;
  double bias = 0.0;
  if (x < kDblMin) {
    x *= kTwo54;
    bias = 54.0;
  }
  const auto bits = std::bit_cast<std::uint64_t>(x);
  const auto e_int = static_cast<std::int64_t>(bits >> 52) - 1023;
  double m = std::bit_cast<double>((bits & 0x000FFFFFFFFFFFFFull) |
                                   0x3FF0000000000000ull);
  double e = std::bit_cast<double>(
                 std::bit_cast<std::int64_t>(kRoundMagic) + e_int) -
             kRoundMagic;
  e = e - bias;
  if (m > kSqrt2) {
    m = m * 0.5;
    e = e + 1.0;
  }
  const double f = (m - 1.0) / (m + 1.0);
  const double s = f * f;
  double p = kLogPoly[0];
  for (int k = 1; k < 12; ++k) p = std::fma(p, s, kLogPoly[k]);
  const double lm = (2.0 * f) * p;
  return std::fma(e, kLn2Hi, std::fma(e, kLn2Lo, lm));
}

// sin and cos of 2*pi*u for u in [0, 1).
inline void sincos_2pi_scalar(double u, double& s_out, double& c_out) noexcept {
  const double t = 4.0 * u;
  const double q = std::nearbyint(t);
  const double x = t - q;
  const double th = x * kHalfPi;
  const double t2 = th * th;
  double ps = kSinPoly[0];
  for (int k = 1; k < 8; ++k) ps = std::fma(ps, t2, kSinPoly[k]);
  const double sn = std::fma(th * t2, ps, th);
  double pc = kCosPoly[0];
  for (int k = 1; k < 9; ++k) pc = std::fma(pc, t2, kCosPoly[k]);
  const double cs = std::fma(t2, pc, 1.0);
  const int quadrant = static_cast<int>(q) & 3;
  switch (quadrant) {
    case 0: s_out = sn; c_out = cs; break;
    case 1: s_out = cs; c_out = -sn; break;
    case 2: s_out = -sn; c_out = -cs; break;
    default: s_out = -cs; c_out = sn; break;
  }
}

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline PhiloxBlock philox_scalar(PhiloxBlock c, PhiloxKey key) noexcept {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key.k0 += kPhiloxW0;
      key.k1 += kPhiloxW1;
    }
    const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * c.v[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * c.v[2];
    c = PhiloxBlock{{static_cast<std::uint32_t>(p1 >> 32) ^ c.v[1] ^ key.k0,
                     static_cast<std::uint32_t>(p1),
                     static_cast<std::uint32_t>(p0 >> 32) ^ c.v[3] ^ key.k1,
                     static_cast<std::uint32_t>(p0)}};
  }
  return c;
}

// [0, 1) with 52 random mantissa bits.
inline double unit_from_words(std::uint32_t hi, std::uint32_t lo) noexcept {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
  return std::bit_cast<double>((bits >> 12) | 0x3FF0000000000000ull) - 1.0;
}

inline void normal_pair_scalar(const PhiloxBlock& w, double& z0,
                               double& z1) noexcept {
  const double u1 = 1.0 - unit_from_words(w.v[0], w.v[1]);
  const double u2 = unit_from_words(w.v[2], w.v[3]);
  const double r = std::sqrt(-2.0 * log_scalar(u1));
  double sn = 0.0;
  double cs = 0.0;
  sincos_2pi_scalar(u2, sn, cs);
  z0 = r * cs;
  z1 = r * sn;
}

inline double local_vol_scalar(double price, const LocalVolTable& curve,
                               bool& out_of_range) noexcept {
  const std::size_t last = curve.size - 1;
  out_of_range = !(price >= curve.knots[0] && price <= curve.knots[last]);
  std::size_t idx = 0;
  for (std::size_t k = 1; k < last; ++k) idx += (curve.knots[k] <= price) ? 1 : 0;
  return std::fma(curve.slopes[idx], price - curve.knots[idx], curve.vols[idx]);
}

}  // namespace
}  // namespace wfsmc::kernels
