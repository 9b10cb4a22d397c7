// Apache License, Version 2.0, refer to LICENSE.txt

#include <cmath>
#include <limits>

#include "polyirt/kernels.hpp"

#if defined(POLYIRT_HAVE_AVX2_TU)

#include "avx2_math.hpp"

namespace polyirt::kernels::avx2 {

namespace {

constexpr int kMaxCats = 32;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

using avx2detail::exp_pd;
using avx2detail::log_pd;

// Shared softmax tail once the per-category log weights for a group of four
// cells sit in wbuf (category-major, 4 lanes per category).
inline void finish_group(const double* wbuf, __m256d mx, int m,
                         const std::int32_t* y, double* out) {
  __m256d acc = _mm256_setzero_pd();
  for (int k = 0; k < m; ++k) {
    const __m256d w = _mm256_load_pd(wbuf + 4 * k);
    acc = _mm256_add_pd(acc, exp_pd(_mm256_sub_pd(w, mx)));
  }
  const __m256d lse = _mm256_add_pd(mx, log_pd(acc));
  alignas(32) double lse_a[4];
  alignas(32) double mx_a[4];
  _mm256_store_pd(lse_a, lse);
  _mm256_store_pd(mx_a, mx);
  for (int l = 0; l < 4; ++l) {
    out[l] = std::isfinite(mx_a[l]) ? wbuf[4 * y[l] + l] - lse_a[l] : kNegInf;
  }
}

}  // namespace

bool compiled() { return true; }

void gauss_cell_loglik(const double* z, const std::int32_t* y, std::size_t n,
                       const GaussTable& q, double* out) {
  const int m = q.m();
  if (m > kMaxCats) {
    scalar::gauss_cell_loglik(z, y, n, q, out);
    return;
  }
  alignas(32) double wbuf[kMaxCats * 4];
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d zv = _mm256_loadu_pd(z + i);
    __m256d mx = _mm256_set1_pd(kNegInf);
    for (int k = 0; k < m; ++k) {
      const __m256d d = _mm256_sub_pd(zv, _mm256_set1_pd(q.mean[k]));
      const __m256d w = _mm256_fnmadd_pd(_mm256_mul_pd(d, d),
                                         _mm256_set1_pd(q.inv_two_var[k]),
                                         _mm256_set1_pd(q.log_norm[k]));
      _mm256_store_pd(wbuf + 4 * k, w);
      mx = _mm256_max_pd(mx, w);
    }
    finish_group(wbuf, mx, m, y + i, out + i);
  }
  if (i < n) scalar::gauss_cell_loglik(z + i, y + i, n - i, q, out + i);
}

void affine_cell_loglik(const double* theta, const std::int32_t* y,
                        std::size_t n, const AffineTable& q, double* out) {
  const int m = q.m();
  if (m > kMaxCats) {
    scalar::affine_cell_loglik(theta, y, n, q, out);
    return;
  }
  alignas(32) double wbuf[kMaxCats * 4];
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d tv = _mm256_loadu_pd(theta + i);
    __m256d mx = _mm256_set1_pd(kNegInf);
    for (int k = 0; k < m; ++k) {
      const __m256d w = _mm256_fmadd_pd(_mm256_set1_pd(q.slope[k]), tv,
                                        _mm256_set1_pd(q.offset[k]));
      _mm256_store_pd(wbuf + 4 * k, w);
      mx = _mm256_max_pd(mx, w);
    }
    finish_group(wbuf, mx, m, y + i, out + i);
  }
  if (i < n) scalar::affine_cell_loglik(theta + i, y + i, n - i, q, out + i);
}

void exp4(const double* in, double* out) {
  _mm256_storeu_pd(out, exp_pd(_mm256_loadu_pd(in)));
}

void log4(const double* in, double* out) {
  _mm256_storeu_pd(out, log_pd(_mm256_loadu_pd(in)));
}

}  // namespace polyirt::kernels::avx2

#endif  // POLYIRT_HAVE_AVX2_TU
