#include <set>

#include "clash/errors.hpp"
#include "clash/walker.hpp"
#include "doctest.h"

using clash::SilhouetteSequence;
using clash::WalkerParams;

TEST_CASE("walker is deterministic") {
  WalkerParams p;
  p.noise_prob = 0.2;
  const auto a = clash::synth_walker(p, 12, 16, 12, 77);
  const auto b = clash::synth_walker(p, 12, 16, 12, 77);
  REQUIRE(a.frames.size() == b.frames.size());
  for (std::size_t t = 0; t < a.frames.size(); ++t)
    CHECK(a.frames[t].mask == b.frames[t].mask);
}

TEST_CASE("no motion sources means identical frames") {
  WalkerParams p;
  p.limb_amplitude = 0.0;
  p.noise_prob = 0.0;
  const auto seq = clash::synth_walker(p, 6, 16, 12, 1);
  for (std::size_t t = 1; t < seq.frames.size(); ++t)
    CHECK(seq.frames[t].mask == seq.frames[0].mask);
}

TEST_CASE("noise-free walker is periodic in the stride") {
  WalkerParams p;
  p.stride_period = 8;
  const auto seq = clash::synth_walker(p, 16, 16, 12, 5);
  for (int t = 0; t < 8; ++t)
    CHECK(seq.frames[t].mask == seq.frames[t + 8].mask);
}

TEST_CASE("oversized geometry is rejected") {
  WalkerParams p;
  p.torso_ry = 40.0;
  CHECK_THROWS_AS(clash::synth_walker(p, 4, 16, 12, 1), clash::ContractError);

  WalkerParams wide;
  wide.limb_amplitude = 50.0;
  CHECK_THROWS_AS(clash::synth_walker(wide, 4, 16, 12, 1),
                  clash::ContractError);

  WalkerParams bad_period;
  bad_period.stride_period = 1;
  CHECK_THROWS_AS(clash::synth_walker(bad_period, 4, 16, 12, 1),
                  clash::ContractError);
}

TEST_CASE("every frame has at least one foreground pixel") {
  WalkerParams p;
  p.noise_prob = 0.5;
  const auto seq = clash::synth_walker(p, 20, 16, 12, 3);
  for (const auto& f : seq.frames) {
    int fg = 0;
    for (auto v : f.mask) fg += v;
    CHECK(fg >= 1);
  }
}

TEST_CASE("corpus covers ids and never repeats a clip") {
  clash::CorpusSpec spec;
  const auto corpus = clash::make_corpus(spec);
  REQUIRE(corpus.size() == std::size_t(spec.ids * spec.seqs_per_id));

  std::set<std::string> subjects;
  std::set<std::vector<std::uint8_t>> flattened;
  for (const auto& seq : corpus) {
    subjects.insert(seq.subject_id);
    REQUIRE(int(seq.frames.size()) == spec.frames);
    std::vector<std::uint8_t> flat;
    for (const auto& f : seq.frames) {
      CHECK(f.height == spec.height);
      CHECK(f.width == spec.width);
      flat.insert(flat.end(), f.mask.begin(), f.mask.end());
    }
    flattened.insert(std::move(flat));
  }
  CHECK(subjects.size() == std::size_t(spec.ids));
  // Phase/shape jitter must keep gallery and probe clips distinct.
  CHECK(flattened.size() == corpus.size());
}
