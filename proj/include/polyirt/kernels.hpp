// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

// Arithmetic inner loops of the likelihood evaluations.  Every kernel has a
// scalar reference implementation; the hot ones (Gaussian-mixture softmax and
// affine softmax) additionally have AVX2 variants compiled in a separate
// translation unit and selected at runtime.  The probit kernel stays scalar:
// it is dominated by erfc, which we keep at library accuracy.
//
// Category indices are 0-based everywhere in this namespace.

namespace polyirt::kernels {

// Per-question table for the Gaussian-mixture likelihood:
//   lw_k(z) = log_norm[k] - (z - mean[k])^2 * inv_two_var[k]
//   log P(y | z) = lw_y(z) - logsumexp_k lw_k(z)
struct GaussTable {
  std::vector<double> mean;
  std::vector<double> log_norm;
  std::vector<double> inv_two_var;

  int m() const { return static_cast<int>(mean.size()); }
  static GaussTable build(const std::vector<double>& means,
                          const std::vector<double>& vars);
};

// Per-question table for exponential-family categorical likelihoods:
//   lw_k(theta) = slope[k] * theta + offset[k]
// Covers both the per-category-discrimination and the cumulative-threshold
// parameterizations (the cumulative sums fold into slope/offset).
struct AffineTable {
  std::vector<double> slope;
  std::vector<double> offset;

  int m() const { return static_cast<int>(slope.size()); }
};

// Per-question table for the ordered-bin probit likelihood.  Label y owns the
// latent interval (lo[y], hi[y]]; the interval assignment already reflects
// any label permutation.
struct ProbitTable {
  std::vector<double> lo;
  std::vector<double> hi;

  int m() const { return static_cast<int>(lo.size()); }
};

// Batch log-likelihood: out[i] = log P(y[i] | x[i]) for i in [0, n).
void gauss_cell_loglik(const double* z, const std::int32_t* y, std::size_t n,
                       const GaussTable& q, double* out);
void affine_cell_loglik(const double* theta, const std::int32_t* y,
                        std::size_t n, const AffineTable& q, double* out);
void probit_cell_loglik(const double* z, const std::int32_t* y, std::size_t n,
                        const ProbitTable& q, double* out);

// Full category distribution at a single predictor value.  probs must have
// room for q.m() entries; logp, when non-null, receives the log
// probabilities computed without leaving log space.
void gauss_probs(double z, const GaussTable& q, double* probs,
                 double* logp = nullptr);
void affine_probs(double theta, const AffineTable& q, double* probs,
                  double* logp = nullptr);
void probit_probs(double z, const ProbitTable& q, double* probs,
                  double* logp = nullptr);

double log_sum_exp(const double* v, int m);

// Standard normal CDF via erfc; absolute error below 1e-14.
double normal_cdf(double x);

// log P(lo < X <= hi) for standard normal X, stable when both edges sit far
// in the same tail (where the CDF difference underflows).
double log_normal_interval(double lo, double hi);

// Runtime kernel selection.  The environment variable POLYIRT_SIMD
// ("scalar", "avx2", "auto") overrides autodetection once at startup.
enum class Backend { Scalar, Avx2 };
Backend active_backend();
const char* backend_name();
bool avx2_supported();
// Returns false (and leaves the backend unchanged) if the request cannot be
// honored on this CPU/build.
bool set_backend(Backend backend);

// Scalar reference implementations, exposed for equivalence tests.
namespace scalar {
void gauss_cell_loglik(const double* z, const std::int32_t* y, std::size_t n,
                       const GaussTable& q, double* out);
void affine_cell_loglik(const double* theta, const std::int32_t* y,
                        std::size_t n, const AffineTable& q, double* out);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
bool compiled();
void gauss_cell_loglik(const double* z, const std::int32_t* y, std::size_t n,
                       const GaussTable& q, double* out);
void affine_cell_loglik(const double* theta, const std::int32_t* y,
                        std::size_t n, const AffineTable& q, double* out);
// Vectorized exp/log over 4 lanes, exposed for accuracy tests.
void exp4(const double* in, double* out);
void log4(const double* in, double* out);
}  // namespace avx2
#endif

}  // namespace polyirt::kernels
