#include <cmath>
#include <cstdint>
#include <vector>

#include "clash/edt.hpp"
#include "clash/errors.hpp"
#include "clash/rng.hpp"
#include "doctest.h"

using clash::PixelClass;
using clash::PixelClassMap;
using clash::SilhouetteFrame;

namespace {

// O(n^2) all-pairs oracle: exact integer minimum over boundary pixels.
std::vector<std::int32_t> brute_force(const PixelClassMap& m) {
  std::vector<std::int32_t> out(m.classes.size(), 0);
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      std::int64_t best = -1;
      for (int by = 0; by < m.height; ++by) {
        for (int bx = 0; bx < m.width; ++bx) {
          if (m.at(by, bx) != PixelClass::Boundary) continue;
          const std::int64_t d = std::int64_t(y - by) * (y - by) +
                                 std::int64_t(x - bx) * (x - bx);
          if (best < 0 || d < best) best = d;
        }
      }
      out[std::size_t(y) * m.width + x] = std::int32_t(best);
    }
  }
  return out;
}

PixelClassMap map_with_boundary(int h, int w, std::initializer_list<int> b) {
  PixelClassMap m;
  m.height = h;
  m.width = w;
  m.classes.assign(std::size_t(h) * w, PixelClass::Background);
  for (int i : b) m.classes[std::size_t(i)] = PixelClass::Boundary;
  return m;
}

}  // namespace

TEST_CASE("single central boundary pixel") {
  const auto m = map_with_boundary(3, 3, {4});
  const auto d = clash::edt_squared(m);
  CHECK(d == std::vector<std::int32_t>{2, 1, 2, 1, 0, 1, 2, 1, 2});
}

TEST_CASE("all-boundary map is all zeros") {
  PixelClassMap m;
  m.height = 4;
  m.width = 5;
  m.classes.assign(20, PixelClass::Boundary);
  for (auto v : clash::edt_squared(m)) CHECK(v == 0);
}

TEST_CASE("empty boundary raises") {
  PixelClassMap m;
  m.height = 3;
  m.width = 3;
  m.classes.assign(9, PixelClass::Background);
  CHECK_THROWS_AS(clash::edt_squared(m), clash::EmptyBoundaryError);
}

TEST_CASE("random maps match the brute-force oracle bit for bit") {
  clash::Rng rng(2024);
  for (int trial = 0; trial < 80; ++trial) {
    const int h = 1 + int(rng.uniform_int(32));
    const int w = 1 + int(rng.uniform_int(32));
    PixelClassMap m;
    m.height = h;
    m.width = w;
    m.classes.assign(std::size_t(h) * w, PixelClass::Background);
    // Sparse boundaries stress long envelope segments; dense ones stress
    // the pop path. Sweep the density.
    const double density = 0.01 + 0.4 * rng.uniform();
    bool any = false;
    for (auto& c : m.classes) {
      if (rng.bernoulli(density)) {
        c = PixelClass::Boundary;
        any = true;
      }
    }
    if (!any) m.classes[rng.uniform_int(m.classes.size())] = PixelClass::Boundary;

    const auto fast = clash::edt_squared(m);
    const auto slow = brute_force(m);
    REQUIRE(fast == slow);
  }
}

TEST_CASE("bi_dt of a single foreground pixel") {
  SilhouetteFrame f;
  f.height = 3;
  f.width = 4;
  f.mask.assign(12, 0);
  f.mask[5] = 1;  // (1,1)
  const auto bd = clash::bi_dt(f);
  CHECK(bd.dist[5] == 0.0);
  CHECK(bd.dist[0] == doctest::Approx(std::sqrt(2.0)));
  CHECK(bd.dist[4] == 1.0);
  CHECK(bd.dist[7] == 2.0);
}

TEST_CASE("bi_dt of centered square: diagonal neighbor of a corner") {
  SilhouetteFrame f;
  f.height = 9;
  f.width = 9;
  f.mask.assign(81, 0);
  for (int y = 2; y <= 6; ++y)
    for (int x = 2; x <= 6; ++x) f.mask[std::size_t(y) * 9 + x] = 1;
  const auto bd = clash::bi_dt(f);
  // (1,1) is diagonally adjacent to the square's (2,2) corner.
  CHECK(bd.dist[std::size_t(1) * 9 + 1] == std::sqrt(2.0));
}

TEST_CASE("bi_dt distance is zero exactly on the boundary") {
  clash::Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    SilhouetteFrame f;
    f.height = 8 + int(rng.uniform_int(8));
    f.width = 8 + int(rng.uniform_int(8));
    f.mask.assign(std::size_t(f.height) * f.width, 0);
    for (auto& v : f.mask) v = rng.bernoulli(0.4) ? 1 : 0;
    bool any = false;
    for (auto v : f.mask) any |= v != 0;
    if (!any) f.mask[0] = 1;

    const auto classes = clash::classify_pixels(f);
    const auto bd = clash::bi_dt(f);
    for (std::size_t i = 0; i < bd.dist.size(); ++i) {
      const bool is_b = classes.classes[i] == PixelClass::Boundary;
      CHECK((bd.dist[i] == 0.0) == is_b);
    }
  }
}

TEST_CASE("no foreground means no boundary") {
  SilhouetteFrame f;
  f.height = 4;
  f.width = 4;
  f.mask.assign(16, 0);
  CHECK_THROWS_AS(clash::bi_dt(f), clash::EmptyBoundaryError);
}
