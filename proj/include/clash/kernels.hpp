#pragma once

#include <cstddef>
#include <cstdint>

// Hot inner loops behind function-pointer tables. Two variants exist:
// a scalar reference and an AVX2 implementation picked at runtime.
//
// Every kernel is specified so that the variants agree bit-for-bit:
//   - integer kernels are trivially exact;
//   - f64 elementwise kernels use one IEEE mul/add per element (FP
//     contraction is disabled project-wide);
//   - f64 reductions are defined as four interleaved partial sums over
//     residue classes i mod 4, combined as (s0+s1)+(s2+s3), which both
//     variants implement literally.
// Equivalence is asserted exactly in tests/test_kernels.cpp.

namespace clash::kern {

struct Kernels {
  const char* name;

  // f64 elementwise, out may alias neither/either input except where noted.
  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  void (*sub)(const double* a, const double* b, double* out, std::size_t n);
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  void (*scale)(double a, const double* x, double* out, std::size_t n);
  // y[i] += a * x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  void (*leaky_relu)(double slope, const double* x, double* out, std::size_t n);
  // dx[i] += g[i] * (x[i] > 0 ? 1 : slope)
  void (*leaky_relu_bwd)(double slope, const double* x, const double* g,
                         double* dx, std::size_t n);

  // f64 reductions (canonical 4-lane order, see above).
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum)(const double* x, std::size_t n);

  // i32 distance-transform helpers.
  // dst[i] = min(dst[i], src[i] + 1)
  void (*edt_relax)(const std::int32_t* src, std::int32_t* dst, std::size_t n);
  // out[i] = (x0 + i - v)^2 + fv for i in [0, n)
  void (*edt_fill_parabola)(std::int32_t x0, std::int32_t v, std::int32_t fv,
                            std::int32_t* out, std::size_t n);
};

// Scalar reference; always available.
const Kernels& scalar();

// AVX2 variant, or nullptr when the CPU lacks AVX2.
const Kernels* avx2();

// Best variant for this CPU (cached after first call).
const Kernels& active();

// Override the active table; pass nullptr to restore auto-detection.
// Used by tests and the --no-simd flag.
void force(const Kernels* k);

}  // namespace clash::kern
