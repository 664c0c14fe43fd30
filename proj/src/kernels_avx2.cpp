#include "clash/kernels.hpp"

// AVX2 variants. This TU is the only one compiled with -mavx2; callers go
// through the dispatch table so the binary still runs on non-AVX2 hosts.
//
// No FMA anywhere: the scalar reference rounds mul and add separately, and
// the equivalence tests assert bit-identical results.

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>

namespace clash::kern {
namespace {

void add_v(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_v(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_v(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_v(double a, const double* x, double* out, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) out[i] = a * x[i];
}

void axpy_v(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d p0 = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    const __m256d p1 = _mm256_mul_pd(va, _mm256_loadu_pd(x + i + 4));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), p0));
    _mm256_storeu_pd(y + i + 4, _mm256_add_pd(_mm256_loadu_pd(y + i + 4), p1));
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d p = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), p));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void leaky_relu_v(double slope, const double* x, double* out, std::size_t n) {
  const __m256d vs = _mm256_set1_pd(slope);
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    const __m256d neg = _mm256_mul_pd(vs, v);
    const __m256d pos_mask = _mm256_cmp_pd(v, zero, _CMP_GT_OQ);
    _mm256_storeu_pd(out + i, _mm256_blendv_pd(neg, v, pos_mask));
  }
  for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : slope * x[i];
}

void leaky_relu_bwd_v(double slope, const double* x, const double* g,
                      double* dx, std::size_t n) {
  const __m256d vs = _mm256_set1_pd(slope);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    const __m256d pos_mask = _mm256_cmp_pd(v, zero, _CMP_GT_OQ);
    const __m256d factor = _mm256_blendv_pd(vs, one, pos_mask);
    const __m256d p = _mm256_mul_pd(_mm256_loadu_pd(g + i), factor);
    _mm256_storeu_pd(dx + i, _mm256_add_pd(_mm256_loadu_pd(dx + i), p));
  }
  for (; i < n; ++i) dx[i] += g[i] * (x[i] > 0.0 ? 1.0 : slope);
}

// The vector lanes are exactly the scalar reference's four interleaved
// accumulators; the tail and final combine below replicate its order, so the
// result is bit-identical, not merely close.
double dot_v(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                           _mm256_loadu_pd(b + i)));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  for (std::size_t j = 0; i + j < n; ++j) {
    lanes[j > 2 ? 2 : j] += a[i + j] * b[i + j];
  }
  const double s01 = lanes[0] + lanes[1];
  const double s23 = lanes[2] + lanes[3];
  return s01 + s23;
}

double sum_v(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  for (std::size_t j = 0; i + j < n; ++j) {
    lanes[j > 2 ? 2 : j] += x[i + j];
  }
  const double s01 = lanes[0] + lanes[1];
  const double s23 = lanes[2] + lanes[3];
  return s01 + s23;
}

void edt_relax_v(const std::int32_t* src, std::int32_t* dst, std::size_t n) {
  const __m256i one = _mm256_set1_epi32(1);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256i c = _mm256_add_epi32(
        _mm256_loadu_si256(reinterpret_cast<const __m256i*>(src + i)), one);
    const __m256i d =
        _mm256_loadu_si256(reinterpret_cast<const __m256i*>(dst + i));
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(dst + i),
                        _mm256_min_epi32(d, c));
  }
  for (; i < n; ++i) {
    const std::int32_t c = src[i] + 1;
    if (c < dst[i]) dst[i] = c;
  }
}

void edt_fill_parabola_v(std::int32_t x0, std::int32_t v, std::int32_t fv,
                         std::int32_t* out, std::size_t n) {
  const __m256i step = _mm256_set1_epi32(8);
  const __m256i vfv = _mm256_set1_epi32(fv);
  __m256i d = _mm256_add_epi32(_mm256_set1_epi32(x0 - v),
                               _mm256_setr_epi32(0, 1, 2, 3, 4, 5, 6, 7));
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256i sq = _mm256_mullo_epi32(d, d);
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(out + i),
                        _mm256_add_epi32(sq, vfv));
    d = _mm256_add_epi32(d, step);
  }
  for (; i < n; ++i) {
    const std::int32_t di = x0 + static_cast<std::int32_t>(i) - v;
    out[i] = di * di + fv;
  }
}

}  // namespace

const Kernels* avx2() {
  if (!__builtin_cpu_supports("avx2")) return nullptr;
  static const Kernels k = {
      "avx2",        add_v,  sub_v,       mul_v,
      scale_v,       axpy_v, leaky_relu_v, leaky_relu_bwd_v,
      dot_v,         sum_v,  edt_relax_v, edt_fill_parabola_v,
  };
  return &k;
}

}  // namespace clash::kern

#else  // non-x86

namespace clash::kern {
const Kernels* avx2() { return nullptr; }
}  // namespace clash::kern

#endif
