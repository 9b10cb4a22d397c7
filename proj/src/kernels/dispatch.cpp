// Apache License, Version 2.0, refer to LICENSE.txt

#include <atomic>
#include <cstdlib>
#include <cstring>

#include "polyirt/kernels.hpp"

namespace polyirt::kernels {

namespace {

using GaussFn = void (*)(const double*, const std::int32_t*, std::size_t,
                         const GaussTable&, double*);
using AffineFn = void (*)(const double*, const std::int32_t*, std::size_t,
                          const AffineTable&, double*);

struct Table {
  GaussFn gauss;
  AffineFn affine;
  Backend backend;
};

bool cpu_has_avx2() {
#if defined(POLYIRT_HAVE_AVX2_TU)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Table make_table(Backend b) {
#if defined(POLYIRT_HAVE_AVX2_TU)
  if (b == Backend::Avx2)
    return {&avx2::gauss_cell_loglik, &avx2::affine_cell_loglik, b};
#endif
  (void)b;
  return {&scalar::gauss_cell_loglik, &scalar::affine_cell_loglik,
          Backend::Scalar};
}

Backend startup_backend() {
  const char* env = std::getenv("POLYIRT_SIMD");
  if (env != nullptr) {
    if (std::strcmp(env, "scalar") == 0) return Backend::Scalar;
    if (std::strcmp(env, "avx2") == 0 && cpu_has_avx2()) return Backend::Avx2;
    if (std::strcmp(env, "auto") != 0) return Backend::Scalar;
  }
  return cpu_has_avx2() ? Backend::Avx2 : Backend::Scalar;
}

Table& table() {
  static Table t = make_table(startup_backend());
  return t;
}

}  // namespace

bool avx2_supported() { return cpu_has_avx2(); }

Backend active_backend() { return table().backend; }

const char* backend_name() {
  return table().backend == Backend::Avx2 ? "avx2" : "scalar";
}

bool set_backend(Backend backend) {
  if (backend == Backend::Avx2 && !cpu_has_avx2()) return false;
  table() = make_table(backend);
  return true;
}

void gauss_cell_loglik(const double* z, const std::int32_t* y, std::size_t n,
                       const GaussTable& q, double* out) {
  table().gauss(z, y, n, q, out);
}

void affine_cell_loglik(const double* theta, const std::int32_t* y,
                        std::size_t n, const AffineTable& q, double* out) {
  table().affine(theta, y, n, q, out);
}

}  // namespace polyirt::kernels
