#include <bit>
#include <cstdint>
#include <vector>

#include "clash/kernels.hpp"
#include "clash/rng.hpp"
#include "doctest.h"

using clash::Rng;
using clash::kern::Kernels;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo = -2.0,
                               double hi = 2.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

bool bits_equal(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

bool bits_equal(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!bits_equal(a[i], b[i])) return false;
  return true;
}

// Sizes chosen to exercise empty input, sub-lane tails, exact lane multiples
// and long runs.
const std::size_t kSizes[] = {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 31, 100, 1025};

}  // namespace

TEST_CASE("scalar kernels compute the documented elementwise results") {
  Rng rng(42);
  const Kernels& k = clash::kern::scalar();
  for (std::size_t n : kSizes) {
    auto a = random_vec(rng, n);
    auto b = random_vec(rng, n);
    std::vector<double> out(n, 0.0);

    k.add(a.data(), b.data(), out.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(bits_equal(out[i], a[i] + b[i]));

    k.sub(a.data(), b.data(), out.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(bits_equal(out[i], a[i] - b[i]));

    k.mul(a.data(), b.data(), out.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(bits_equal(out[i], a[i] * b[i]));

    k.scale(0.37, a.data(), out.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(bits_equal(out[i], 0.37 * a[i]));

    auto y = b;
    k.axpy(-1.25, a.data(), y.data(), n);
    for (std::size_t i = 0; i < n; ++i)
      CHECK(bits_equal(y[i], b[i] + -1.25 * a[i]));

    k.leaky_relu(0.1, a.data(), out.data(), n);
    for (std::size_t i = 0; i < n; ++i)
      CHECK(bits_equal(out[i], a[i] > 0.0 ? a[i] : 0.1 * a[i]));

    auto dx = random_vec(rng, n);
    auto dx_ref = dx;
    k.leaky_relu_bwd(0.1, a.data(), b.data(), dx.data(), n);
    for (std::size_t i = 0; i < n; ++i)
      dx_ref[i] += b[i] * (a[i] > 0.0 ? 1.0 : 0.1);
    CHECK(bits_equal(dx, dx_ref));
  }
}

TEST_CASE("scalar reductions follow the four-accumulator contract") {
  Rng rng(7);
  const Kernels& k = clash::kern::scalar();
  for (std::size_t n : kSizes) {
    auto a = random_vec(rng, n);
    auto b = random_vec(rng, n);

    double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
      s0 += a[i] * b[i];
      s1 += a[i + 1] * b[i + 1];
      s2 += a[i + 2] * b[i + 2];
      s3 += a[i + 3] * b[i + 3];
    }
    for (std::size_t j = 0; i + j < n; ++j)
      (j == 0 ? s0 : j == 1 ? s1 : s2) += a[i + j] * b[i + j];
    CHECK(bits_equal(k.dot(a.data(), b.data(), n), (s0 + s1) + (s2 + s3)));

    s0 = s1 = s2 = s3 = 0;
    i = 0;
    for (; i + 4 <= n; i += 4) {
      s0 += a[i];
      s1 += a[i + 1];
      s2 += a[i + 2];
      s3 += a[i + 3];
    }
    for (std::size_t j = 0; i + j < n; ++j)
      (j == 0 ? s0 : j == 1 ? s1 : s2) += a[i + j];
    CHECK(bits_equal(k.sum(a.data(), n), (s0 + s1) + (s2 + s3)));
  }

  // Integer-valued doubles sum exactly, so the value itself is pinned too.
  std::vector<double> ones(1003, 1.0);
  CHECK(k.sum(ones.data(), ones.size()) == 1003.0);
  CHECK(k.dot(ones.data(), ones.data(), ones.size()) == 1003.0);
}

TEST_CASE("scalar integer kernels match their formulas") {
  Rng rng(11);
  const Kernels& k = clash::kern::scalar();
  for (std::size_t n : kSizes) {
    std::vector<std::int32_t> src(n), dst(n);
    for (auto& v : src) v = static_cast<std::int32_t>(rng.uniform_int(1 << 20));
    for (auto& v : dst) v = static_cast<std::int32_t>(rng.uniform_int(1 << 20));
    auto expect = dst;
    for (std::size_t i = 0; i < n; ++i)
      expect[i] = std::min(expect[i], src[i] + 1);
    k.edt_relax(src.data(), dst.data(), n);
    CHECK(dst == expect);

    std::vector<std::int32_t> out(n, -1);
    const std::int32_t x0 = 3, v = 10, fv = 25;
    k.edt_fill_parabola(x0, v, fv, out.data(), n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::int32_t d = x0 + static_cast<std::int32_t>(i) - v;
      CHECK(out[i] == d * d + fv);
    }
  }
}

TEST_CASE("avx2 kernels are bit-identical to scalar") {
  const Kernels* vk = clash::kern::avx2();
  if (!vk) {
    MESSAGE("avx2 unavailable on this host; dispatch falls back to scalar");
    CHECK(&clash::kern::active() == &clash::kern::scalar());
    return;
  }
  const Kernels& sk = clash::kern::scalar();
  Rng rng(1234);
  for (std::size_t n : kSizes) {
    auto a = random_vec(rng, n, -3.0, 3.0);
    auto b = random_vec(rng, n, -3.0, 3.0);
    std::vector<double> so(n, 0.0), vo(n, 0.0);

    sk.add(a.data(), b.data(), so.data(), n);
    vk->add(a.data(), b.data(), vo.data(), n);
    CHECK(bits_equal(so, vo));

    sk.sub(a.data(), b.data(), so.data(), n);
    vk->sub(a.data(), b.data(), vo.data(), n);
    CHECK(bits_equal(so, vo));

    sk.mul(a.data(), b.data(), so.data(), n);
    vk->mul(a.data(), b.data(), vo.data(), n);
    CHECK(bits_equal(so, vo));

    sk.scale(1.0 / 3.0, a.data(), so.data(), n);
    vk->scale(1.0 / 3.0, a.data(), vo.data(), n);
    CHECK(bits_equal(so, vo));

    auto ys = b, yv = b;
    sk.axpy(0.77, a.data(), ys.data(), n);
    vk->axpy(0.77, a.data(), yv.data(), n);
    CHECK(bits_equal(ys, yv));

    sk.leaky_relu(0.01, a.data(), so.data(), n);
    vk->leaky_relu(0.01, a.data(), vo.data(), n);
    CHECK(bits_equal(so, vo));

    auto ds = random_vec(rng, n);
    auto dv = ds;
    sk.leaky_relu_bwd(0.01, a.data(), b.data(), ds.data(), n);
    vk->leaky_relu_bwd(0.01, a.data(), b.data(), dv.data(), n);
    CHECK(bits_equal(ds, dv));

    CHECK(bits_equal(sk.dot(a.data(), b.data(), n),
                     vk->dot(a.data(), b.data(), n)));
    CHECK(bits_equal(sk.sum(a.data(), n), vk->sum(a.data(), n)));

    std::vector<std::int32_t> src(n), d1(n), d2(n);
    for (auto& v : src) v = static_cast<std::int32_t>(rng.uniform_int(1 << 20));
    for (std::size_t i = 0; i < n; ++i)
      d1[i] = d2[i] = static_cast<std::int32_t>(rng.uniform_int(1 << 20));
    sk.edt_relax(src.data(), d1.data(), n);
    vk->edt_relax(src.data(), d2.data(), n);
    CHECK(d1 == d2);

    std::vector<std::int32_t> p1(n), p2(n);
    sk.edt_fill_parabola(-2, 5, 9, p1.data(), n);
    vk->edt_fill_parabola(-2, 5, 9, p2.data(), n);
    CHECK(p1 == p2);
  }
}

TEST_CASE("force() overrides dispatch") {
  const Kernels& sk = clash::kern::scalar();
  clash::kern::force(&sk);
  CHECK(&clash::kern::active() == &sk);
  clash::kern::force(nullptr);
}
