#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "clash/dstf.hpp"
#include "clash/errors.hpp"
#include "clash/metrics.hpp"
#include "clash/rng.hpp"
#include "clash/walker.hpp"
#include "doctest.h"

using clash::SilhouetteFrame;
using clash::SilhouetteSequence;

namespace {

SilhouetteFrame binary_frame(int h, int w, double ones_fraction,
                             clash::Rng& rng) {
  SilhouetteFrame f;
  f.height = h;
  f.width = w;
  f.mask.resize(std::size_t(h) * w);
  for (auto& v : f.mask) v = rng.bernoulli(ones_fraction) ? 1 : 0;
  return f;
}

}  // namespace

TEST_CASE("image entropy hits the textbook values") {
  SilhouetteFrame half;
  half.height = 2;
  half.width = 2;
  half.mask = {0, 0, 1, 1};
  CHECK(clash::image_entropy(half, 256) == doctest::Approx(1.0));

  SilhouetteFrame flat;
  flat.height = 2;
  flat.width = 2;
  flat.mask = {1, 1, 1, 1};
  CHECK(clash::image_entropy(flat, 256) == 0.0);

  const double four[] = {-0.9, -0.4, 0.1, 0.6};
  CHECK(clash::image_entropy(four, 4, 4, -1.0, 1.0) == doctest::Approx(2.0));
}

TEST_CASE("entropy bounds and permutation invariance") {
  clash::Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> vals(100);
    for (auto& v : vals) v = rng.uniform(-1.0, 1.0);
    const int bins = 2 + int(rng.uniform_int(62));
    const double e = clash::image_entropy(vals.data(), vals.size(), bins,
                                          -1.0, 1.0);
    CHECK(e >= 0.0);
    CHECK(e <= std::log2(double(bins)) + 1e-12);

    auto shuffled = vals;
    for (std::size_t i = shuffled.size(); i > 1; --i)
      std::swap(shuffled[i - 1], shuffled[rng.uniform_int(i)]);
    CHECK(clash::image_entropy(shuffled.data(), shuffled.size(), bins, -1.0,
                               1.0) == e);
  }
}

TEST_CASE("two-bin entropy equals the Bernoulli entropy") {
  clash::Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const auto f = binary_frame(8, 8, rng.uniform(), rng);
    double ones = 0;
    for (auto v : f.mask) ones += v;
    const double p = ones / double(f.mask.size());
    double expect = 0.0;
    if (p > 0.0 && p < 1.0)
      expect = -p * std::log2(p) - (1 - p) * std::log2(1 - p);
    CHECK(clash::image_entropy(f, 2) == doctest::Approx(expect));
  }
}

TEST_CASE("non-finite values are a data error") {
  const double bad[] = {0.0, std::nan("")};
  CHECK_THROWS_AS(clash::image_entropy(bad, 2, 16, -1.0, 1.0),
                  clash::NumericError);
  CHECK_THROWS_AS(clash::image_entropy(bad, 1, 1, -1.0, 1.0),
                  clash::ContractError);  // bins < 2
}

TEST_CASE("entropy ratio is 1 for a field identical to its silhouette") {
  clash::Rng rng(8);
  SilhouetteSequence sil;
  clash::DstfSequence dstf;
  for (int t = 0; t < 4; ++t) {
    auto f = binary_frame(6, 6, 0.4, rng);
    clash::DstfFrame d;
    d.height = f.height;
    d.width = f.width;
    d.field.assign(f.mask.begin(), f.mask.end());
    sil.frames.push_back(std::move(f));
    dstf.frames.push_back(std::move(d));
  }
  CHECK(clash::entropy_ratio(sil, dstf, 256) == doctest::Approx(1.0));
}

TEST_CASE("all-constant silhouettes cannot be a ratio baseline") {
  SilhouetteSequence sil;
  SilhouetteFrame f;
  f.height = 3;
  f.width = 3;
  f.mask.assign(9, 1);
  sil.frames.push_back(f);
  clash::DstfSequence dstf;
  clash::DstfFrame d;
  d.height = 3;
  d.width = 3;
  d.field.assign(9, 0.5);
  dstf.frames.push_back(d);
  CHECK_THROWS_AS(clash::entropy_ratio(sil, dstf, 256), clash::ContractError);
}

TEST_CASE("DSTF carries more entropy than the silhouette on the corpus") {
  clash::CorpusSpec spec;
  spec.ids = 2;
  spec.seqs_per_id = 2;
  const auto corpus = clash::make_corpus(spec);
  for (const auto& seq : corpus) {
    const auto d = clash::transform_sequence(seq, clash::DegeneratePolicy::Error);
    CHECK(clash::entropy_ratio(seq, d, 256) > 1.0);
  }
}

TEST_CASE("geni endpoint and midpoint probabilities") {
  SilhouetteSequence seq;
  for (int t = 0; t < 4; ++t) {
    SilhouetteFrame f;
    f.height = 1;
    f.width = 3;
    // Pixel 0 always on, pixel 1 on half the time, pixel 2 never.
    f.mask = {1, std::uint8_t(t < 2 ? 1 : 0), 0};
    seq.frames.push_back(f);
  }
  const auto g = clash::geni(seq);
  CHECK(g.entropy[0] == 0.0);
  CHECK(g.entropy[1] == doctest::Approx(1.0));
  CHECK(g.entropy[2] == 0.0);

  const auto img = clash::geni_to_gray(g);
  CHECK(img.px[0] == 0);
  CHECK(img.px[1] == 255);
}

TEST_CASE("geni is invariant under whole-sequence inversion") {
  clash::WalkerParams p;
  auto seq = clash::synth_walker(p, 10, 16, 12, 3);
  const auto g = clash::geni(seq);
  for (auto& f : seq.frames)
    for (auto& v : f.mask) v ^= 1;
  const auto gi = clash::geni(seq);
  for (std::size_t i = 0; i < g.entropy.size(); ++i)
    CHECK(gi.entropy[i] == doctest::Approx(g.entropy[i]));
}

TEST_CASE("walker limbs are the pixels of interest") {
  clash::WalkerParams p;
  p.limb_amplitude = 3.0;
  const auto seq = clash::synth_walker(p, 16, 16, 12, 1);
  const auto g = clash::geni(seq);
  // Torso interior rows sit near the top; swing region near the feet.
  double torso = 0.0, swing = 0.0;
  int tn = 0, sn = 0;
  for (int y = 3; y <= 6; ++y)
    for (int x = 4; x <= 7; ++x) torso += g.entropy[std::size_t(y) * 12 + x], ++tn;
  for (int y = 11; y <= 14; ++y)
    for (int x = 2; x <= 9; ++x) swing += g.entropy[std::size_t(y) * 12 + x], ++sn;
  CHECK(swing / sn > torso / tn);
}

TEST_CASE("frame difference counts changed pixels") {
  SilhouetteSequence seq;
  SilhouetteFrame a;
  a.height = 2;
  a.width = 3;
  a.mask = {0, 1, 0, 1, 0, 1};
  auto b = a;
  b.mask[0] ^= 1;
  b.mask[4] ^= 1;
  seq.frames = {a, b};

  const auto d0 = clash::frame_difference(seq, 1);
  CHECK(d0.changed_fraction == doctest::Approx(2.0 / 6.0));

  seq.frames = {a, a};
  const auto d1 = clash::frame_difference(seq, 1);
  CHECK(d1.changed_fraction == 0.0);
  for (double v : d1.abs_diff) CHECK(v == 0.0);

  CHECK_THROWS_AS(clash::frame_difference(seq, 0), clash::ContractError);
  CHECK_THROWS_AS(clash::frame_difference(seq, 2), clash::ContractError);
}

TEST_CASE("metrics csv has one row per frame plus a mean row") {
  clash::WalkerParams p;
  const auto seq = clash::synth_walker(p, 6, 16, 12, 12);
  const auto d = clash::transform_sequence(seq, clash::DegeneratePolicy::Error);
  const std::string path = "metrics_test.csv";
  clash::write_metrics_csv(path, seq, d, 256);

  std::ifstream in(path);
  std::string line;
  int rows = 0;
  std::string last;
  while (std::getline(in, line)) {
    ++rows;
    last = line;
  }
  CHECK(rows == 1 + 6 + 1);  // header + frames + mean
  CHECK(last.substr(0, 5) == "mean,");
  std::filesystem::remove(path);
}
