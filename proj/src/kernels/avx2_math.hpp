// Apache License, Version 2.0, refer to LICENSE.txt

// AVX2 double-precision exp/log following the classic Cephes rational
// approximations (the same coefficient sets used by Eigen and avx_mathfun).
// Relative error is a few ulp over the ranges exercised here; exp underflows
// cleanly to 0 below -708.39 and saturates above 709.43.  log is defined for
// positive finite inputs.

#pragma once

#include <cmath>
#include <immintrin.h>

namespace polyirt::kernels::avx2detail {

inline __m256d exp_pd(__m256d x) {
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
  const __m256d c1 = _mm256_set1_pd(6.93145751953125e-1);
  const __m256d c2 = _mm256_set1_pd(1.42860682030941723212e-6);
  const __m256d p0 = _mm256_set1_pd(1.26177193074810590878e-4);
  const __m256d p1 = _mm256_set1_pd(3.02994407707441961300e-2);
  const __m256d p2 = _mm256_set1_pd(9.99999999999999999910e-1);
  const __m256d q0 = _mm256_set1_pd(3.00198505138664455042e-6);
  const __m256d q1 = _mm256_set1_pd(2.52448340349684104192e-3);
  const __m256d q2 = _mm256_set1_pd(2.27265548208155028766e-1);
  const __m256d q3 = _mm256_set1_pd(2.00000000000000000005e0);
  const __m256d max_x = _mm256_set1_pd(709.43);
  const __m256d min_x = _mm256_set1_pd(-708.39);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d half = _mm256_set1_pd(0.5);

  const __m256d too_small = _mm256_cmp_pd(x, min_x, _CMP_LT_OQ);
  const __m256d too_big = _mm256_cmp_pd(x, max_x, _CMP_GT_OQ);
  x = _mm256_min_pd(_mm256_max_pd(x, min_x), max_x);

  // n = round(x / ln2), remainder reduced with a two-part ln2.
  const __m256d n = _mm256_floor_pd(_mm256_fmadd_pd(log2e, x, half));
  x = _mm256_fnmadd_pd(n, c1, x);
  x = _mm256_fnmadd_pd(n, c2, x);

  const __m256d xx = _mm256_mul_pd(x, x);
  __m256d px = _mm256_fmadd_pd(p0, xx, p1);
  px = _mm256_fmadd_pd(px, xx, p2);
  px = _mm256_mul_pd(px, x);
  __m256d qx = _mm256_fmadd_pd(q0, xx, q1);
  qx = _mm256_fmadd_pd(qx, xx, q2);
  qx = _mm256_fmadd_pd(qx, xx, q3);
  __m256d r = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
  r = _mm256_fmadd_pd(_mm256_set1_pd(2.0), r, one);

  // Scale by 2^n through the exponent field; |n| <= 1022 after clamping.
  __m256i n64 = _mm256_cvtepi32_epi64(_mm256_cvtpd_epi32(n));
  n64 = _mm256_slli_epi64(_mm256_add_epi64(n64, _mm256_set1_epi64x(1023)), 52);
  r = _mm256_mul_pd(r, _mm256_castsi256_pd(n64));

  r = _mm256_blendv_pd(r, _mm256_setzero_pd(), too_small);
  r = _mm256_blendv_pd(r, _mm256_set1_pd(HUGE_VAL), too_big);
  return r;
}

inline __m256d log_pd(__m256d x) {
  const __m256d p0 = _mm256_set1_pd(1.01875663804580931796e-4);
  const __m256d p1 = _mm256_set1_pd(4.97494994976747001425e-1);
  const __m256d p2 = _mm256_set1_pd(4.70579119878881725854e0);
  const __m256d p3 = _mm256_set1_pd(1.44989225341610930846e1);
  const __m256d p4 = _mm256_set1_pd(1.79368678507819816313e1);
  const __m256d p5 = _mm256_set1_pd(7.70838733755885391666e0);
  const __m256d z0 = _mm256_set1_pd(1.12873587189167450590e1);
  const __m256d z1 = _mm256_set1_pd(4.52279145837532221105e1);
  const __m256d z2 = _mm256_set1_pd(8.29875266912776603211e1);
  const __m256d z3 = _mm256_set1_pd(7.11544750618563894466e1);
  const __m256d z4 = _mm256_set1_pd(2.31251620126765340583e1);
  const __m256d ln2_hi = _mm256_set1_pd(0.693359375);
  const __m256d ln2_lo = _mm256_set1_pd(-2.121944400546905827679e-4);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d half = _mm256_set1_pd(0.5);
  const __m256d sqrth = _mm256_set1_pd(0.70710678118654752440);

  // Split x = m * 2^e with m in [0.5, 1).
  const __m256i bits = _mm256_castpd_si256(x);
  const __m256i exp_bits = _mm256_srli_epi64(
      _mm256_and_si256(bits, _mm256_set1_epi64x(0x7ff0000000000000LL)), 52);
  const __m256i mant_bits = _mm256_or_si256(
      _mm256_and_si256(bits, _mm256_set1_epi64x(0x000fffffffffffffLL)),
      _mm256_set1_epi64x(0x3fe0000000000000LL));
  const __m256d m = _mm256_castsi256_pd(mant_bits);

  // int64 -> double for the small exponent values (magic-number trick).
  const __m256i magic = _mm256_set1_epi64x(0x4338000000000000LL);
  __m256d e = _mm256_sub_pd(
      _mm256_castsi256_pd(_mm256_add_epi64(
          _mm256_sub_epi64(exp_bits, _mm256_set1_epi64x(1022)), magic)),
      _mm256_castsi256_pd(magic));

  const __m256d small_m = _mm256_cmp_pd(m, sqrth, _CMP_LT_OQ);
  e = _mm256_sub_pd(e, _mm256_and_pd(small_m, one));
  const __m256d m_adj = _mm256_blendv_pd(m, _mm256_add_pd(m, m), small_m);
  const __m256d t = _mm256_sub_pd(m_adj, one);

  const __m256d t2 = _mm256_mul_pd(t, t);
  __m256d p = _mm256_fmadd_pd(p0, t, p1);
  p = _mm256_fmadd_pd(p, t, p2);
  p = _mm256_fmadd_pd(p, t, p3);
  p = _mm256_fmadd_pd(p, t, p4);
  p = _mm256_fmadd_pd(p, t, p5);
  __m256d q = _mm256_add_pd(t, z0);
  q = _mm256_fmadd_pd(q, t, z1);
  q = _mm256_fmadd_pd(q, t, z2);
  q = _mm256_fmadd_pd(q, t, z3);
  q = _mm256_fmadd_pd(q, t, z4);

  __m256d y = _mm256_mul_pd(_mm256_mul_pd(t, t2), _mm256_div_pd(p, q));
  y = _mm256_fmadd_pd(e, ln2_lo, y);
  y = _mm256_fnmadd_pd(half, t2, y);
  __m256d r = _mm256_add_pd(t, y);
  r = _mm256_fmadd_pd(e, ln2_hi, r);
  return r;
}

}  // namespace polyirt::kernels::avx2detail
