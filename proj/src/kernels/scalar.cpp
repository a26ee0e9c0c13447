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

#include <cmath>
#include <limits>

#include "scalar_math.hpp"
#include "wfsmc/kernels.hpp"

namespace wfsmc::kernels {
namespace {

void normals(const NormalStream& st, std::size_t count, double* first,
             double* second) {
  for (std::size_t i = 0; i < count; ++i) {
    const PhiloxBlock ctr{{st.first_particle + static_cast<std::uint32_t>(i),
                           st.step, st.lane, st.tag}};
    double z0 = 0.0;
    double z1 = 0.0;
    normal_pair_scalar(philox_scalar(ctr, st.key), z0, z1);
    first[i] = z0;
    if (second != nullptr) second[i] = z1;
  }
}

void euler_constant(double* s, const double* z, std::size_t n, double drift,
                    double diffusion) {
  for (std::size_t i = 0; i < n; ++i) s[i] = s[i] + std::fma(diffusion, z[i], drift);
}

std::size_t euler_local(double* s, const double* z, std::size_t n,
                        const LocalVolTable& curve, double neg_half_dt,
                        double sqrt_dt) {
  std::size_t bad = 0;
  for (std::size_t i = 0; i < n; ++i) {
    bool oob = false;
    const double sig = local_vol_scalar(exp_scalar(s[i]), curve, oob);
    bad += oob ? 1 : 0;
    const double drift = neg_half_dt * (sig * sig);
    s[i] = s[i] + std::fma(sig * sqrt_dt, z[i], drift);
  }
  return bad;
}

void gaussian_log_ratio(const double* s, double* acc, std::size_t n,
                        const GaussianRatio& g) {
  for (std::size_t i = 0; i < n; ++i) {
    const double a = s[i] - g.target_mean;
    const double b = s[i] - g.ref_mean;
    acc[i] = acc[i] + std::fma(g.target_coef, a * a,
                               std::fma(g.ref_coef, b * b, g.offset));
  }
}

void band_log_indicator(const double* s, double* acc, std::size_t n, double lo,
                        double hi) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    if (!(lo < s[i] && s[i] < hi)) acc[i] = kNegInf;
  }
}

// Four interleaved partial sums, combined pairwise: the AVX2 lane order.
double sum_exp_shifted(const double* x, std::size_t n, double shift) {
  double lane[4] = {0.0, 0.0, 0.0, 0.0};
  const std::size_t n4 = n & ~std::size_t{3};
  for (std::size_t i = 0; i < n4; i += 4) {
    for (std::size_t k = 0; k < 4; ++k) lane[k] += exp_scalar(x[i + k] - shift);
  }
  double total = (lane[0] + lane[1]) + (lane[2] + lane[3]);
  for (std::size_t i = n4; i < n; ++i) total += exp_scalar(x[i] - shift);
  return total;
}

void exp_shifted(const double* x, double* out, std::size_t n, double shift) {
  for (std::size_t i = 0; i < n; ++i) out[i] = exp_scalar(x[i] - shift);
}

void vexp(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = exp_scalar(x[i]);
}

void vlog(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = log_scalar(x[i]);
}

}  // namespace

const KernelTable& scalar_table() noexcept {
  static const KernelTable table{"scalar",           normals,
                                 euler_constant,     euler_local,
                                 gaussian_log_ratio, band_log_indicator,
                                 sum_exp_shifted,    exp_shifted,
                                 vexp,               vlog};
  return table;
}

PhiloxBlock philox4x32_10(PhiloxBlock counter, PhiloxKey key) noexcept {
  return philox_scalar(counter, key);
}

double exp_ref(double x) noexcept { return exp_scalar(x); }
double log_ref(double x) noexcept { return log_scalar(x); }
void sincos_2pi_ref(double u, double& sin_out, double& cos_out) noexcept {
  sincos_2pi_scalar(u, sin_out, cos_out);
}

GaussianRatio GaussianRatio::from_moments(double target_mean, double target_sd,
                                          double ref_mean, double ref_sd) {
  GaussianRatio g;
  g.target_mean = target_mean;
  g.target_coef = -0.5 / (target_sd * target_sd);
  g.ref_mean = ref_mean;
  g.ref_coef = 0.5 / (ref_sd * ref_sd);
  g.offset = std::log(ref_sd) - std::log(target_sd);
  return g;
}

}  // namespace wfsmc::kernels
