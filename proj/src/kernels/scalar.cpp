// Apache License, Version 2.0, refer to LICENSE.txt

#include <algorithm>
#include <cmath>
#include <limits>

#include "polyirt/kernels.hpp"

namespace polyirt::kernels {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;
constexpr double kInvSqrt2 = 0.70710678118654752440084436210485;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

GaussTable GaussTable::build(const std::vector<double>& means,
                             const std::vector<double>& vars) {
  GaussTable t;
  const std::size_t m = means.size();
  t.mean = means;
  t.log_norm.resize(m);
  t.inv_two_var.resize(m);
  for (std::size_t k = 0; k < m; ++k) {
    t.log_norm[k] = -0.5 * (kLogTwoPi + std::log(vars[k]));
    t.inv_two_var[k] = 0.5 / vars[k];
  }
  return t;
}

double log_sum_exp(const double* v, int m) {
  double mx = kNegInf;
  for (int k = 0; k < m; ++k) mx = std::max(mx, v[k]);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (int k = 0; k < m; ++k) s += std::exp(v[k] - mx);
  return mx + std::log(s);
}

double normal_cdf(double x) {
  return 0.5 * std::erfc(-x * kInvSqrt2);
}

namespace {

// log of the standard normal upper tail for large positive x, via the Mills
// ratio series Q(x) = phi(x)/x * (1 - 1/x^2 + 3/x^4 - 15/x^6).
double log_upper_tail_far(double x) {
  const double ix2 = 1.0 / (x * x);
  const double series = 1.0 - ix2 * (1.0 - ix2 * (3.0 - 15.0 * ix2));
  return -0.5 * x * x - 0.5 * kLogTwoPi - std::log(x) + std::log(series);
}

double log_upper_tail(double x) {
  if (x < 8.0) return std::log(0.5 * std::erfc(x * kInvSqrt2));
  return log_upper_tail_far(x);
}

}  // namespace

double log_normal_interval(double lo, double hi) {
  // P = Phi(hi) - Phi(lo), expressed through the tail nearer to the interval
  // so the subtraction never cancels catastrophically.
  if (lo >= hi) return kNegInf;
  if (lo >= 0.0) {
    // Both edges in the upper tail: P = Q(lo) - Q(hi).
    const double qlo = 0.5 * std::erfc(lo * kInvSqrt2);
    const double qhi = std::isinf(hi) ? 0.0 : 0.5 * std::erfc(hi * kInvSqrt2);
    const double p = qlo - qhi;
    if (p > 0.0) return std::log(p);
    // CDF difference underflowed; the mass is dominated by the nearer edge.
    const double llo = log_upper_tail(lo);
    if (std::isinf(hi)) return llo;
    const double lhi = log_upper_tail(hi);
    const double d = lhi - llo;
    return llo + std::log1p(-(d > -700.0 ? std::exp(d) : 0.0));
  }
  if (hi <= 0.0) return log_normal_interval(-hi, -lo);
  // Edges straddle zero; the probability is large and safe to form directly.
  const double p = 1.0 - 0.5 * std::erfc(hi * kInvSqrt2) -
                   0.5 * std::erfc(-lo * kInvSqrt2);
  return std::log(p);
}

namespace scalar {

void gauss_cell_loglik(const double* z, const std::int32_t* y, std::size_t n,
                       const GaussTable& q, double* out) {
  const int m = q.m();
  double lw[64];
  double* w = lw;
  std::vector<double> heap;
  if (m > 64) {
    heap.resize(m);
    w = heap.data();
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double zi = z[i];
    double mx = kNegInf;
    for (int k = 0; k < m; ++k) {
      const double d = zi - q.mean[k];
      w[k] = q.log_norm[k] - d * d * q.inv_two_var[k];
      mx = std::max(mx, w[k]);
    }
    if (!std::isfinite(mx)) {
      out[i] = kNegInf;
      continue;
    }
    double s = 0.0;
    for (int k = 0; k < m; ++k) s += std::exp(w[k] - mx);
    out[i] = w[y[i]] - mx - std::log(s);
  }
}

void affine_cell_loglik(const double* theta, const std::int32_t* y,
                        std::size_t n, const AffineTable& q, double* out) {
  const int m = q.m();
  double lw[64];
  double* w = lw;
  std::vector<double> heap;
  if (m > 64) {
    heap.resize(m);
    w = heap.data();
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double ti = theta[i];
    double mx = kNegInf;
    for (int k = 0; k < m; ++k) {
      w[k] = q.slope[k] * ti + q.offset[k];
      mx = std::max(mx, w[k]);
    }
    if (!std::isfinite(mx)) {
      out[i] = kNegInf;
      continue;
    }
    double s = 0.0;
    for (int k = 0; k < m; ++k) s += std::exp(w[k] - mx);
    out[i] = w[y[i]] - mx - std::log(s);
  }
}

}  // namespace scalar

void probit_cell_loglik(const double* z, const std::int32_t* y, std::size_t n,
                        const ProbitTable& q, double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    const int k = y[i];
    out[i] = log_normal_interval(q.lo[k] - z[i], q.hi[k] - z[i]);
  }
}

namespace {

void softmax_from_logweights(const double* w, int m, double* probs,
                             double* logp) {
  double mx = kNegInf;
  for (int k = 0; k < m; ++k) mx = std::max(mx, w[k]);
  if (!std::isfinite(mx)) {
    for (int k = 0; k < m; ++k) probs[k] = 1.0 / m;
    if (logp)
      for (int k = 0; k < m; ++k) logp[k] = -std::log(static_cast<double>(m));
    return;
  }
  double s = 0.0;
  for (int k = 0; k < m; ++k) {
    probs[k] = std::exp(w[k] - mx);
    s += probs[k];
  }
  const double inv = 1.0 / s;
  const double lse = mx + std::log(s);
  for (int k = 0; k < m; ++k) probs[k] *= inv;
  if (logp)
    for (int k = 0; k < m; ++k) logp[k] = w[k] - lse;
}

}  // namespace

void gauss_probs(double z, const GaussTable& q, double* probs, double* logp) {
  const int m = q.m();
  std::vector<double> w(m);
  for (int k = 0; k < m; ++k) {
    const double d = z - q.mean[k];
    w[k] = q.log_norm[k] - d * d * q.inv_two_var[k];
  }
  softmax_from_logweights(w.data(), m, probs, logp);
}

void affine_probs(double theta, const AffineTable& q, double* probs,
                  double* logp) {
  const int m = q.m();
  std::vector<double> w(m);
  for (int k = 0; k < m; ++k) w[k] = q.slope[k] * theta + q.offset[k];
  softmax_from_logweights(w.data(), m, probs, logp);
}

void probit_probs(double z, const ProbitTable& q, double* probs,
                  double* logp) {
  const int m = q.m();
  double s = 0.0;
  for (int k = 0; k < m; ++k) {
    const double llo = q.lo[k] - z;
    const double lhi = q.hi[k] - z;
    double p;
    if (llo >= 0.0) {
      const double qlo = 0.5 * std::erfc(llo * kInvSqrt2);
      const double qhi = std::isinf(lhi) ? 0.0 : 0.5 * std::erfc(lhi * kInvSqrt2);
      p = qlo - qhi;
    } else if (lhi <= 0.0) {
      const double qlo = std::isinf(llo) ? 0.0 : 0.5 * std::erfc(-llo * kInvSqrt2);
      const double qhi = 0.5 * std::erfc(-lhi * kInvSqrt2);
      p = qhi - qlo;
    } else {
      p = 1.0 - 0.5 * std::erfc(lhi * kInvSqrt2) - 0.5 * std::erfc(-llo * kInvSqrt2);
    }
    probs[k] = std::max(p, 0.0);
    s += probs[k];
  }
  const double inv = 1.0 / s;
  for (int k = 0; k < m; ++k) probs[k] *= inv;
  if (logp) {
    const double ls = std::log(s);
    for (int k = 0; k < m; ++k)
      logp[k] = log_normal_interval(q.lo[k] - z, q.hi[k] - z) - ls;
  }
}

}  // namespace polyirt::kernels
