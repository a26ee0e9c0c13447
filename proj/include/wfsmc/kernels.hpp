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

/// \file kernels.hpp
/// Data-parallel inner loops of the particle engine.
///
/// Every kernel exists as a scalar reference implementation and, on x86-64,
/// as an AVX2/FMA variant. The variants perform the same IEEE operations in
/// the same order, so their outputs are bitwise identical; the test suite
/// checks this. The active table is chosen once at startup from CPUID and
/// can be overridden with `WFSMC_SIMD=scalar|avx2` or `select()`.

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace wfsmc::kernels {

struct PhiloxKey {
  std::uint32_t k0 = 0;
  std::uint32_t k1 = 0;
};

/// Philox4x32-10 block function (Random123 reference semantics).
struct PhiloxBlock {
  std::uint32_t v[4];
};
PhiloxBlock philox4x32_10(PhiloxBlock counter, PhiloxKey key) noexcept;

/// Counter layout for a run of standard normals: particle `first + i`
/// uses counter (first + i, step, lane, tag). One block yields two normals.
struct NormalStream {
  PhiloxKey key;
  std::uint32_t first_particle = 0;
  std::uint32_t step = 0;
  std::uint32_t lane = 0;
  std::uint32_t tag = 0;
};

/// Piecewise-linear volatility curve in price space, pre-digested for
/// branch-free evaluation: segment `i` covers [knots[i], knots[i+1]].
struct LocalVolTable {
  const double* knots = nullptr;
  const double* vols = nullptr;
  const double* slopes = nullptr;
  std::size_t size = 0;
};

/// acc += offset + target_coef*(s - target_mean)^2 + ref_coef*(s - ref_mean)^2,
/// i.e. log N(s; target) - log N(s; ref) with coefficients folded in.
struct GaussianRatio {
  double target_mean = 0.0;
  double target_coef = 0.0;
  double ref_mean = 0.0;
  double ref_coef = 0.0;
  double offset = 0.0;

  static GaussianRatio from_moments(double target_mean, double target_sd,
                                    double ref_mean, double ref_sd);
};

struct KernelTable {
  std::string_view name;
  void (*normals)(const NormalStream& stream, std::size_t count, double* first,
                  double* second);
  void (*euler_constant)(double* s, const double* z, std::size_t n,
                         double drift, double diffusion);
  /// Returns the number of prices that fell outside the knot range.
  std::size_t (*euler_local)(double* s, const double* z, std::size_t n,
                             const LocalVolTable& curve, double neg_half_dt,
                             double sqrt_dt);
  void (*gaussian_log_ratio)(const double* s, double* acc, std::size_t n,
                             const GaussianRatio& ratio);
  /// acc[i] = -inf wherever s[i] is not strictly inside (lo, hi).
  void (*band_log_indicator)(const double* s, double* acc, std::size_t n,
                             double lo, double hi);
  double (*sum_exp_shifted)(const double* x, std::size_t n, double shift);
  void (*exp_shifted)(const double* x, double* out, std::size_t n,
                      double shift);
  void (*exp)(const double* x, double* out, std::size_t n);
  void (*log)(const double* x, double* out, std::size_t n);
};

enum class SimdLevel { scalar, avx2 };

const KernelTable& scalar_table() noexcept;
/// nullptr when not compiled in or when the CPU lacks AVX2+FMA.
const KernelTable* avx2_table() noexcept;

const KernelTable& active() noexcept;
SimdLevel active_level() noexcept;
SimdLevel best_available() noexcept;
/// Throws std::runtime_error if the level is unavailable on this machine.
void select(SimdLevel level);
std::string_view level_name(SimdLevel level) noexcept;

// Reference elementary functions shared by all variants.
double exp_ref(double x) noexcept;
double log_ref(double x) noexcept;
void sincos_2pi_ref(double u, double& sin_out, double& cos_out) noexcept;

}  // namespace wfsmc::kernels
