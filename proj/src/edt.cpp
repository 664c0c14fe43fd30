#include "clash/edt.hpp"

#include <cmath>

#include "clash/errors.hpp"
#include "clash/kernels.hpp"

namespace clash {

namespace {

// Column-pass sentinel: far enough that a sentinel parabola can never beat a
// finite one inside the grid (max finite value < 2*16384^2 << kInf^2), yet
// kInf^2 still fits comfortably in the int64 envelope arithmetic.
constexpr std::int32_t kInf = 1 << 20;

// Rational with non-negative denominator; den == 0 encodes sign(num) * inf.
struct Rat {
  std::int64_t num;
  std::int64_t den;
};

// a/b < c/d with b,d >= 0 and never both zero on the paths we use.
bool rat_less(const Rat& a, const Rat& b) {
  return a.num * b.den < b.num * a.den;
}

// Smallest integer >= num/den, den > 0.
std::int64_t rat_ceil(const Rat& r) {
  if (r.num >= 0) return (r.num + r.den - 1) / r.den;
  return -((-r.num) / r.den);
}

}  // namespace

std::vector<std::int32_t> edt_squared(const PixelClassMap& classes) {
  const int h = classes.height, w = classes.width;
  if (h < 1 || w < 1 || h > kMaxEdtDim || w > kMaxEdtDim)
    throw ContractError("edt_squared: dimensions out of range");
  if (classes.classes.size() != std::size_t(h) * w)
    throw ContractError("edt_squared: class grid size mismatch");

  // Pass 1: per-column vertical distance to the nearest boundary pixel.
  // Rows are relaxed as whole arrays so the kernel vectorizes across x.
  std::vector<std::int32_t> g(std::size_t(h) * w);
  bool any_boundary = false;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const bool b = classes.classes[i] == PixelClass::Boundary;
    any_boundary |= b;
    g[i] = b ? 0 : kInf;
  }
  if (!any_boundary)
    throw EmptyBoundaryError("edt_squared: map has no boundary pixels");

  const kern::Kernels& k = kern::active();
  for (int y = 1; y < h; ++y)
    k.edt_relax(&g[std::size_t(y - 1) * w], &g[std::size_t(y) * w], w);
  for (int y = h - 2; y >= 0; --y)
    k.edt_relax(&g[std::size_t(y + 1) * w], &g[std::size_t(y) * w], w);

  // Pass 2: per-row lower envelope of the parabolas x -> (x-v)^2 + g(v)^2.
  // Intersections are kept as exact rationals; every comparison is a
  // cross-multiplication, so the result is bit-exact, not approximate.
  std::vector<std::int32_t> out(std::size_t(h) * w);
  std::vector<int> v(w);         // parabola vertices in the envelope
  std::vector<Rat> z(w + 1);     // envelope segment boundaries
  std::vector<std::int64_t> f(w);
  for (int y = 0; y < h; ++y) {
    const std::int32_t* grow = &g[std::size_t(y) * w];
    for (int x = 0; x < w; ++x)
      f[x] = std::int64_t(grow[x]) * grow[x];

    int kk = 0;
    v[0] = 0;
    z[0] = {-1, 0};
    z[1] = {+1, 0};
    for (int q = 1; q < w; ++q) {
      // Intersection of parabola q with the current envelope tail.
      Rat s{f[q] + std::int64_t(q) * q - (f[v[kk]] + std::int64_t(v[kk]) * v[kk]),
            2 * std::int64_t(q - v[kk])};
      while (!rat_less(z[kk], s)) {
        --kk;
        s = {f[q] + std::int64_t(q) * q -
                 (f[v[kk]] + std::int64_t(v[kk]) * v[kk]),
             2 * std::int64_t(q - v[kk])};
      }
      ++kk;
      v[kk] = q;
      z[kk] = s;
      z[kk + 1] = {+1, 0};
    }

    // Fill each envelope segment's integer range in one vectorized call.
    std::int32_t* orow = &out[std::size_t(y) * w];
    for (int seg = 0; seg <= kk; ++seg) {
      std::int64_t lo = z[seg].den == 0 ? 0 : rat_ceil(z[seg]);
      std::int64_t hi =
          z[seg + 1].den == 0 ? w - 1 : rat_ceil(z[seg + 1]) - 1;
      if (lo < 0) lo = 0;
      if (hi > w - 1) hi = w - 1;
      if (lo > hi) continue;
      // A boundary exists somewhere, so pass 1 left every row with at
      // least one finite column and no sentinel parabola can win here.
      k.edt_fill_parabola(static_cast<std::int32_t>(lo), v[seg],
                          static_cast<std::int32_t>(f[v[seg]]), orow + lo,
                          std::size_t(hi - lo + 1));
    }
  }
  return out;
}

BiDtFrame bi_dt(const SilhouetteFrame& frame) {
  const PixelClassMap classes = classify_pixels(frame);
  const std::vector<std::int32_t> sq = edt_squared(classes);
  BiDtFrame out;
  out.height = frame.height;
  out.width = frame.width;
  out.dist.resize(sq.size());
  for (std::size_t i = 0; i < sq.size(); ++i)
    out.dist[i] = std::sqrt(double(sq[i]));
  return out;
}

}  // namespace clash
