#include "clash/kernels.hpp"

// Reference kernels. These define the semantics the SIMD variants must
// reproduce exactly; keep them boring.

namespace clash::kern {
namespace {

void add_s(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_s(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_s(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_s(double a, const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i];
}

void axpy_s(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void leaky_relu_s(double slope, const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : slope * x[i];
}

void leaky_relu_bwd_s(double slope, const double* x, const double* g,
                      double* dx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dx[i] += g[i] * (x[i] > 0.0 ? 1.0 : slope);
}

// Four interleaved accumulators; the combine order (s0+s1)+(s2+s3) is part
// of the kernel contract.
double dot_s(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (std::size_t j = 0; i + j < n; ++j) {
    (j == 0 ? s0 : j == 1 ? s1 : s2) += a[i + j] * b[i + j];
  }
  return (s0 + s1) + (s2 + s3);
}

double sum_s(const double* x, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += x[i];
    s1 += x[i + 1];
    s2 += x[i + 2];
    s3 += x[i + 3];
  }
  for (std::size_t j = 0; i + j < n; ++j) {
    (j == 0 ? s0 : j == 1 ? s1 : s2) += x[i + j];
  }
  return (s0 + s1) + (s2 + s3);
}

void edt_relax_s(const std::int32_t* src, std::int32_t* dst, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const std::int32_t c = src[i] + 1;
    if (c < dst[i]) dst[i] = c;
  }
}

void edt_fill_parabola_s(std::int32_t x0, std::int32_t v, std::int32_t fv,
                         std::int32_t* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const std::int32_t d = x0 + static_cast<std::int32_t>(i) - v;
    out[i] = d * d + fv;
  }
}

}  // namespace

const Kernels& scalar() {
  static const Kernels k = {
      "scalar",      add_s,  sub_s,       mul_s,
      scale_s,       axpy_s, leaky_relu_s, leaky_relu_bwd_s,
      dot_s,         sum_s,  edt_relax_s, edt_fill_parabola_s,
  };
  return k;
}

}  // namespace clash::kern
