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

// AVX2/FMA kernels. Compiled with -mavx2 -mfma; only reachable after the
// dispatcher has confirmed CPU support. Each function processes four
// doubles per iteration and hands the tail to the scalar reference code,
// so results match scalar_table() bit for bit.

#include <immintrin.h>

#include <limits>

#include "dispatch_internal.hpp"
#include "scalar_math.hpp"

namespace wfsmc::kernels {
namespace {

[[gnu::always_inline]] inline __m256d bcast(double v) { return _mm256_set1_pd(v); }

[[gnu::always_inline]] inline __m256d neg(__m256d v) {
  return _mm256_xor_pd(v, bcast(-0.0));
}

[[gnu::always_inline]] inline __m256d round_nearest(__m256d v) {
  return _mm256_round_pd(v, _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
}

// Integer-valued double (|v| < 2^51) to int64 lanes.
[[gnu::always_inline]] inline __m256i to_int64(__m256d v) {
  const __m256d magic = bcast(kRoundMagic);
  return _mm256_sub_epi64(_mm256_castpd_si256(_mm256_add_pd(v, magic)),
                          _mm256_castpd_si256(magic));
}

[[gnu::always_inline]] inline __m256d pow2(__m256i n) {
  return _mm256_castsi256_pd(
      _mm256_slli_epi64(_mm256_add_epi64(n, _mm256_set1_epi64x(1023)), 52));
}

inline __m256d exp4(__m256d x) {
  const __m256d nan_mask = _mm256_cmp_pd(x, x, _CMP_UNORD_Q);
  const __m256d hi_mask = _mm256_cmp_pd(x, bcast(kExpHi), _CMP_GT_OQ);
  const __m256d lo_mask = _mm256_cmp_pd(x, bcast(kExpLo), _CMP_LT_OQ);
  const __m256d xc =
      _mm256_max_pd(_mm256_min_pd(x, bcast(kExpHi)), bcast(kExpLo));
  const __m256d n = round_nearest(_mm256_mul_pd(xc, bcast(kLog2e)));
  __m256d r = _mm256_fnmadd_pd(n, bcast(kLn2Hi), xc);
  r = _mm256_fnmadd_pd(n, bcast(kLn2Lo), r);
  __m256d p = bcast(kExpPoly[0]);
  for (int k = 1; k < 14; ++k) p = _mm256_fmadd_pd(p, r, bcast(kExpPoly[k]));
  const __m256d n1 = _mm256_floor_pd(_mm256_mul_pd(n, bcast(0.5)));
  const __m256d n2 = _mm256_sub_pd(n, n1);
  __m256d res = _mm256_mul_pd(_mm256_mul_pd(p, pow2(to_int64(n1))),
                              pow2(to_int64(n2)));
  res = _mm256_blendv_pd(res, bcast(std::numeric_limits<double>::infinity()),
                         hi_mask);
  res = _mm256_blendv_pd(res, _mm256_setzero_pd(), lo_mask);
  return _mm256_blendv_pd(res, x, nan_mask);
}

inline __m256d log4(__m256d x) {
  const __m256d nan_mask = _mm256_cmp_pd(x, x, _CMP_UNORD_Q);
  const __m256d neg_mask = _mm256_cmp_pd(x, _mm256_setzero_pd(), _CMP_LT_OQ);
  const __m256d zero_mask = _mm256_cmp_pd(x, _mm256_setzero_pd(), _CMP_EQ_OQ);
  const __m256d inf_mask = _mm256_cmp_pd(
      x, bcast(std::numeric_limits<double>::infinity()), _CMP_EQ_OQ);
  const __m256d sub_mask = _mm256_cmp_pd(x, bcast(kDblMin), _CMP_LT_OQ);
  const __m256d xs = _mm256_blendv_pd(x, _mm256_mul_pd(x, bcast(kTwo54)), sub_mask);
  const __m256d bias = _mm256_blendv_pd(_mm256_setzero_pd(), bcast(54.0), sub_mask);

  const __m256i bits = _mm256_castpd_si256(xs);
  const __m256i e_int =
      _mm256_sub_epi64(_mm256_srli_epi64(bits, 52), _mm256_set1_epi64x(1023));
  __m256d m = _mm256_castsi256_pd(_mm256_or_si256(
      _mm256_and_si256(bits, _mm256_set1_epi64x(0x000FFFFFFFFFFFFFll)),
      _mm256_set1_epi64x(0x3FF0000000000000ll)));
  const __m256d magic = bcast(kRoundMagic);
  __m256d e = _mm256_sub_pd(
      _mm256_castsi256_pd(_mm256_add_epi64(_mm256_castpd_si256(magic), e_int)),
      magic);
  e = _mm256_sub_pd(e, bias);
  const __m256d big = _mm256_cmp_pd(m, bcast(kSqrt2), _CMP_GT_OQ);
  m = _mm256_blendv_pd(m, _mm256_mul_pd(m, bcast(0.5)), big);
  e = _mm256_blendv_pd(e, _mm256_add_pd(e, bcast(1.0)), big);

  const __m256d one = bcast(1.0);
  const __m256d f = _mm256_div_pd(_mm256_sub_pd(m, one), _mm256_add_pd(m, one));
  const __m256d s = _mm256_mul_pd(f, f);
  __m256d p = bcast(kLogPoly[0]);
  for (int k = 1; k < 12; ++k) p = _mm256_fmadd_pd(p, s, bcast(kLogPoly[k]));
  const __m256d lm = _mm256_mul_pd(_mm256_mul_pd(bcast(2.0), f), p);
  __m256d res = _mm256_fmadd_pd(e, bcast(kLn2Hi), _mm256_fmadd_pd(e, bcast(kLn2Lo), lm));

  res = _mm256_blendv_pd(res, bcast(std::numeric_limits<double>::infinity()), inf_mask);
  res = _mm256_blendv_pd(res, bcast(-std::numeric_limits<double>::infinity()), zero_mask);
  res = _mm256_blendv_pd(res, bcast(std::numeric_limits<double>::quiet_NaN()), neg_mask);
  return _mm256_blendv_pd(res, x, nan_mask);
}

inline void sincos_2pi4(__m256d u, __m256d& s_out, __m256d& c_out) {
  const __m256d t = _mm256_mul_pd(bcast(4.0), u);
  const __m256d q = round_nearest(t);
  const __m256d x = _mm256_sub_pd(t, q);
  const __m256d th = _mm256_mul_pd(x, bcast(kHalfPi));
  const __m256d t2 = _mm256_mul_pd(th, th);
  __m256d ps = bcast(kSinPoly[0]);
  for (int k = 1; k < 8; ++k) ps = _mm256_fmadd_pd(ps, t2, bcast(kSinPoly[k]));
  const __m256d sn = _mm256_fmadd_pd(_mm256_mul_pd(th, t2), ps, th);
  __m256d pc = bcast(kCosPoly[0]);
  for (int k = 1; k < 9; ++k) pc = _mm256_fmadd_pd(pc, t2, bcast(kCosPoly[k]));
  const __m256d cs = _mm256_fmadd_pd(t2, pc, bcast(1.0));

  const __m256i quad = _mm256_and_si256(to_int64(q), _mm256_set1_epi64x(3));
  const __m256d q1 = _mm256_castsi256_pd(_mm256_cmpeq_epi64(quad, _mm256_set1_epi64x(1)));
  const __m256d q2 = _mm256_castsi256_pd(_mm256_cmpeq_epi64(quad, _mm256_set1_epi64x(2)));
  const __m256d q3 = _mm256_castsi256_pd(_mm256_cmpeq_epi64(quad, _mm256_set1_epi64x(3)));
  __m256d so = sn;
  __m256d co = cs;
  so = _mm256_blendv_pd(so, cs, q1);
  co = _mm256_blendv_pd(co, neg(sn), q1);
  so = _mm256_blendv_pd(so, neg(sn), q2);
  co = _mm256_blendv_pd(co, neg(cs), q2);
  so = _mm256_blendv_pd(so, neg(cs), q3);
  co = _mm256_blendv_pd(co, sn, q3);
  s_out = so;
  c_out = co;
}

// Philox4x32-10 on four counters; each 64-bit lane holds one 32-bit word.
inline void philox4(__m256i& c0, __m256i& c1, __m256i& c2, __m256i& c3,
                    PhiloxKey key) {
  const __m256i m0 = _mm256_set1_epi64x(kPhiloxM0);
  const __m256i m1 = _mm256_set1_epi64x(kPhiloxM1);
  const __m256i lo_mask = _mm256_set1_epi64x(0xFFFFFFFFll);
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key.k0 += kPhiloxW0;
      key.k1 += kPhiloxW1;
    }
    const __m256i p0 = _mm256_mul_epu32(m0, c0);
    const __m256i p1 = _mm256_mul_epu32(m1, c2);
    const __m256i k0 = _mm256_set1_epi64x(key.k0);
    const __m256i k1 = _mm256_set1_epi64x(key.k1);
    const __m256i n0 = _mm256_xor_si256(_mm256_xor_si256(_mm256_srli_epi64(p1, 32), c1), k0);
    const __m256i n1 = _mm256_and_si256(p1, lo_mask);
    const __m256i n2 = _mm256_xor_si256(_mm256_xor_si256(_mm256_srli_epi64(p0, 32), c3), k1);
    const __m256i n3 = _mm256_and_si256(p0, lo_mask);
    c0 = n0;
    c1 = n1;
    c2 = n2;
    c3 = n3;
  }
}

inline __m256d unit_from_words4(__m256i hi, __m256i lo) {
  const __m256i bits = _mm256_or_si256(_mm256_slli_epi64(hi, 32), lo);
  const __m256i mant = _mm256_or_si256(_mm256_srli_epi64(bits, 12),
                                       _mm256_set1_epi64x(0x3FF0000000000000ll));
  return _mm256_sub_pd(_mm256_castsi256_pd(mant), bcast(1.0));
}

void normals(const NormalStream& st, std::size_t count, double* first,
             double* second) {
  std::size_t i = 0;
  const __m256i c1 = _mm256_set1_epi64x(st.step);
  const __m256i c2 = _mm256_set1_epi64x(st.lane);
  const __m256i c3 = _mm256_set1_epi64x(st.tag);
  for (; i + 4 <= count; i += 4) {
    const std::uint32_t base = st.first_particle + static_cast<std::uint32_t>(i);
    __m256i w0 = _mm256_set_epi64x(static_cast<std::uint32_t>(base + 3),
                                   static_cast<std::uint32_t>(base + 2),
                                   static_cast<std::uint32_t>(base + 1), base);
    __m256i w1 = c1;
    __m256i w2 = c2;
    __m256i w3 = c3;
    philox4(w0, w1, w2, w3, st.key);
    const __m256d u1 = _mm256_sub_pd(bcast(1.0), unit_from_words4(w0, w1));
    const __m256d u2 = unit_from_words4(w2, w3);
    const __m256d r = _mm256_sqrt_pd(_mm256_mul_pd(bcast(-2.0), log4(u1)));
    __m256d sn;
    __m256d cs;
    sincos_2pi4(u2, sn, cs);
    _mm256_storeu_pd(first + i, _mm256_mul_pd(r, cs));
    if (second != nullptr) _mm256_storeu_pd(second + i, _mm256_mul_pd(r, sn));
  }
  for (; i < count; ++i) {
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
  std::size_t i = 0;
  const __m256d dr = bcast(drift);
  const __m256d df = bcast(diffusion);
  for (; i + 4 <= n; i += 4) {
    const __m256d sv = _mm256_loadu_pd(s + i);
    const __m256d zv = _mm256_loadu_pd(z + i);
    _mm256_storeu_pd(s + i, _mm256_add_pd(sv, _mm256_fmadd_pd(df, zv, dr)));
  }
  for (; i < n; ++i) s[i] = s[i] + std::fma(diffusion, z[i], drift);
}

std::size_t euler_local(double* s, const double* z, std::size_t n,
                        const LocalVolTable& curve, double neg_half_dt,
                        double sqrt_dt) {
  std::size_t bad = 0;
  std::size_t i = 0;
  const std::size_t last = curve.size - 1;
  const __m256d first_knot = bcast(curve.knots[0]);
  const __m256d last_knot = bcast(curve.knots[last]);
  for (; i + 4 <= n; i += 4) {
    const __m256d sv = _mm256_loadu_pd(s + i);
    const __m256d price = exp4(sv);
    const __m256d in_range =
        _mm256_and_pd(_mm256_cmp_pd(price, first_knot, _CMP_GE_OQ),
                      _mm256_cmp_pd(price, last_knot, _CMP_LE_OQ));
    bad += 4 - static_cast<std::size_t>(__builtin_popcount(_mm256_movemask_pd(in_range)));
    __m256i idx = _mm256_setzero_si256();
    for (std::size_t k = 1; k < last; ++k) {
      const __m256d le = _mm256_cmp_pd(bcast(curve.knots[k]), price, _CMP_LE_OQ);
      idx = _mm256_sub_epi64(idx, _mm256_castpd_si256(le));
    }
    const __m256d slope = _mm256_i64gather_pd(curve.slopes, idx, 8);
    const __m256d knot = _mm256_i64gather_pd(curve.knots, idx, 8);
    const __m256d vol = _mm256_i64gather_pd(curve.vols, idx, 8);
    const __m256d sig = _mm256_fmadd_pd(slope, _mm256_sub_pd(price, knot), vol);
    const __m256d drift = _mm256_mul_pd(bcast(neg_half_dt), _mm256_mul_pd(sig, sig));
    const __m256d zv = _mm256_loadu_pd(z + i);
    const __m256d step = _mm256_fmadd_pd(_mm256_mul_pd(sig, bcast(sqrt_dt)), zv, drift);
    _mm256_storeu_pd(s + i, _mm256_add_pd(sv, step));
  }
  for (; i < n; ++i) {
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
  std::size_t i = 0;
  const __m256d tm = bcast(g.target_mean);
  const __m256d tc = bcast(g.target_coef);
  const __m256d rm = bcast(g.ref_mean);
  const __m256d rc = bcast(g.ref_coef);
  const __m256d off = bcast(g.offset);
  for (; i + 4 <= n; i += 4) {
    const __m256d sv = _mm256_loadu_pd(s + i);
    const __m256d a = _mm256_sub_pd(sv, tm);
    const __m256d b = _mm256_sub_pd(sv, rm);
    const __m256d v = _mm256_fmadd_pd(tc, _mm256_mul_pd(a, a),
                                      _mm256_fmadd_pd(rc, _mm256_mul_pd(b, b), off));
    _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), v));
  }
  for (; i < n; ++i) {
    const double a = s[i] - g.target_mean;
    const double b = s[i] - g.ref_mean;
    acc[i] = acc[i] + std::fma(g.target_coef, a * a,
                               std::fma(g.ref_coef, b * b, g.offset));
  }
}

void band_log_indicator(const double* s, double* acc, std::size_t n, double lo,
                        double hi) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  std::size_t i = 0;
  const __m256d lov = bcast(lo);
  const __m256d hiv = bcast(hi);
  for (; i + 4 <= n; i += 4) {
    const __m256d sv = _mm256_loadu_pd(s + i);
    const __m256d inside = _mm256_and_pd(_mm256_cmp_pd(lov, sv, _CMP_LT_OQ),
                                         _mm256_cmp_pd(sv, hiv, _CMP_LT_OQ));
    _mm256_storeu_pd(acc + i, _mm256_blendv_pd(bcast(kNegInf), _mm256_loadu_pd(acc + i), inside));
  }
  for (; i < n; ++i) {
    if (!(lo < s[i] && s[i] < hi)) acc[i] = kNegInf;
  }
}

double sum_exp_shifted(const double* x, std::size_t n, double shift) {
  const std::size_t n4 = n & ~std::size_t{3};
  __m256d acc = _mm256_setzero_pd();
  const __m256d sh = bcast(shift);
  for (std::size_t i = 0; i < n4; i += 4) {
    acc = _mm256_add_pd(acc, exp4(_mm256_sub_pd(_mm256_loadu_pd(x + i), sh)));
  }
  alignas(32) double lane[4];
  _mm256_store_pd(lane, acc);
  double total = (lane[0] + lane[1]) + (lane[2] + lane[3]);
  for (std::size_t i = n4; i < n; ++i) total += exp_scalar(x[i] - shift);
  return total;
}

void exp_shifted(const double* x, double* out, std::size_t n, double shift) {
  std::size_t i = 0;
  const __m256d sh = bcast(shift);
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, exp4(_mm256_sub_pd(_mm256_loadu_pd(x + i), sh)));
  }
  for (; i < n; ++i) out[i] = exp_scalar(x[i] - shift);
}

void vexp(const double* x, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, exp4(_mm256_loadu_pd(x + i)));
  for (; i < n; ++i) out[i] = exp_scalar(x[i]);
}

void vlog(const double* x, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, log4(_mm256_loadu_pd(x + i)));
  for (; i < n; ++i) out[i] = log_scalar(x[i]);
}

}  // namespace

const KernelTable& avx2_table_impl() noexcept {
  static const KernelTable table{"avx2",             normals,
                                 euler_constant,     euler_local,
                                 gaussian_log_ratio, band_log_indicator,
                                 sum_exp_shifted,    exp_shifted,
                                 vexp,               vlog};
  return table;
}

}  // namespace wfsmc::kernels
