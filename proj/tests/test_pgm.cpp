#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "clash/errors.hpp"
#include "clash/pgm.hpp"
#include "clash/silhouette.hpp"
#include "doctest.h"

namespace {

std::vector<std::uint8_t> pgm_bytes(const std::string& header,
                                    std::initializer_list<int> px) {
  std::vector<std::uint8_t> b(header.begin(), header.end());
  for (int v : px) b.push_back(static_cast<std::uint8_t>(v));
  return b;
}

}  // namespace

TEST_CASE("threshold maps >=128 to foreground") {
  const auto b = pgm_bytes("P5 2 2 255\n", {0, 255, 127, 128});
  const auto f = clash::load_pgm(b.data(), b.size());
  CHECK(f.height == 2);
  CHECK(f.width == 2);
  CHECK(f.mask == std::vector<std::uint8_t>{0, 1, 0, 1});
}

TEST_CASE("all-zero image is all background") {
  const auto b = pgm_bytes("P5 3 2 255\n", {0, 0, 0, 0, 0, 0});
  const auto f = clash::load_pgm(b.data(), b.size());
  for (auto v : f.mask) CHECK(v == 0);
}

TEST_CASE("header comments are skipped") {
  const auto b = pgm_bytes("P5 # cam0\n2 1 # wide\n255\n", {200, 10});
  const auto f = clash::load_pgm(b.data(), b.size());
  CHECK(f.mask == std::vector<std::uint8_t>{1, 0});
}

TEST_CASE("ASCII PGM is rejected") {
  const auto b = pgm_bytes("P2 2 2 255\n", {0, 0, 0, 0});
  CHECK_THROWS_AS(clash::load_pgm(b.data(), b.size()), clash::FormatError);
}

TEST_CASE("format errors carry byte offsets") {
  const auto trunc = pgm_bytes("P5 4 4 255\n", {1, 2, 3});
  try {
    clash::load_pgm(trunc.data(), trunc.size());
    FAIL("expected FormatError");
  } catch (const clash::FormatError& e) {
    CHECK(e.byte_offset() == trunc.size());
  }

  const auto zero = pgm_bytes("P5 0 2 255\n", {});
  CHECK_THROWS_AS(clash::load_pgm(zero.data(), zero.size()),
                  clash::FormatError);

  const auto big = pgm_bytes("P5 2 2 65535\n", {0, 0, 0, 0});
  CHECK_THROWS_AS(clash::load_pgm(big.data(), big.size()), clash::FormatError);

  const auto junk = pgm_bytes("P5 2 x 255\n", {0, 0, 0, 0});
  try {
    clash::load_pgm(junk.data(), junk.size());
    FAIL("expected FormatError");
  } catch (const clash::FormatError& e) {
    CHECK(e.byte_offset() == 5);  // the 'x'
  }
}

TEST_CASE("file round trip preserves masks") {
  clash::SilhouetteFrame f;
  f.height = 3;
  f.width = 4;
  f.mask = {0, 1, 1, 0, 1, 0, 0, 1, 1, 1, 0, 0};

  const std::string path = "roundtrip_test.pgm";
  clash::save_pgm_file(path, clash::frame_to_gray(f));
  const auto back = clash::load_pgm_file_frame(path);
  CHECK(back.mask == f.mask);
  CHECK(back.height == f.height);
  CHECK(back.width == f.width);
  std::remove(path.c_str());
}
