#include <algorithm>
#include <cstring>
#include <set>
#include <string>
#include <vector>

#include "clash/dataset.hpp"
#include "clash/errors.hpp"
#include "clash/walker.hpp"
#include "doctest.h"

using clash::ContractError;
using clash::CorpusSpec;
using clash::NormMode;
using clash::Rng;
using clash::ad::Shape;

namespace {

clash::data::GaitDataset small_corpus(int ids = 4, int seqs = 4,
                                      int frames = 12) {
  CorpusSpec spec;
  spec.ids = ids;
  spec.seqs_per_id = seqs;
  spec.frames = frames;
  spec.height = 16;
  spec.width = 12;
  spec.seed = 21;
  return clash::data::build_dataset(clash::make_corpus(spec),
                                    NormMode::PerFrame);
}

}  // namespace

TEST_CASE("build_dataset assigns sorted labels and aligned streams") {
  const auto data = small_corpus();
  CHECK(data.samples.size() == 16);
  CHECK(data.num_classes == 4);
  CHECK(data.h == 16);
  CHECK(data.w == 12);
  for (const auto& s : data.samples) {
    CHECK(s.label == std::stoi(s.subject_id.substr(1)));
    CHECK(s.sil.size() == std::size_t(s.t * s.h * s.w));
    CHECK(s.dstf.size() == s.sil.size());
    for (double v : s.sil) CHECK((v == 0.0 || v == 1.0));
    for (double v : s.dstf) {
      CHECK(v <= 1.0);
      CHECK(v >= -1.0);
    }
  }
  // Signed field: foreground pixels carry positive values, background
  // non-positive, frame by frame.
  const auto& s = data.samples[0];
  for (std::size_t i = 0; i < s.sil.size(); ++i) {
    if (s.sil[i] == 1.0)
      CHECK(s.dstf[i] >= 0.0);
    else
      CHECK(s.dstf[i] <= 0.0);
  }
}

TEST_CASE("of_label finds exactly the samples of one identity") {
  const auto data = small_corpus();
  for (int label = 0; label < 4; ++label) {
    const auto idx = data.of_label(label);
    CHECK(idx.size() == 4);
    for (auto i : idx) CHECK(data.samples[i].label == label);
  }
  CHECK(data.of_label(99).empty());
}

TEST_CASE("split_dataset is per-identity, exhaustive, and deterministic") {
  const auto data = small_corpus();
  const auto [train, val] = clash::data::split_dataset(data, 0.5, 9);
  CHECK(train.samples.size() + val.samples.size() == data.samples.size());
  for (int label = 0; label < 4; ++label) {
    CHECK(train.of_label(label).size() == 2);
    CHECK(val.of_label(label).size() == 2);
  }
  const auto [train2, val2] = clash::data::split_dataset(data, 0.5, 9);
  REQUIRE(train2.samples.size() == train.samples.size());
  for (std::size_t i = 0; i < train.samples.size(); ++i) {
    CHECK(train.samples[i].subject_id == train2.samples[i].subject_id);
    CHECK(train.samples[i].view_id == train2.samples[i].view_id);
  }
}

TEST_CASE("split keeps the extra sequence on the training side") {
  const auto data = small_corpus(3, 5);
  const auto [train, val] = clash::data::split_dataset(data, 0.5, 9);
  for (int label = 0; label < 3; ++label) {
    CHECK(train.of_label(label).size() == 3);  // floor(0.5*5)=2 to val
    CHECK(val.of_label(label).size() == 2);
  }
}

TEST_CASE("split rejects identities with fewer than two sequences") {
  const auto data = small_corpus(2, 1);
  CHECK_THROWS_WITH_AS(clash::data::split_dataset(data, 0.5, 9).first,
                       doctest::Contains("s00"), ContractError);
}

TEST_CASE("split rejects out-of-range fractions") {
  const auto data = small_corpus();
  CHECK_THROWS_AS(clash::data::split_dataset(data, 0.0, 9), ContractError);
  CHECK_THROWS_AS(clash::data::split_dataset(data, 1.0, 9), ContractError);
}

TEST_CASE("protocol split portions each identity") {
  const auto data = small_corpus(4, 6);
  const auto proto = clash::data::split_protocol(data, 1, 2, 13);
  for (int label = 0; label < 4; ++label) {
    CHECK(proto.gallery.of_label(label).size() == 1);
    CHECK(proto.probe.of_label(label).size() == 2);
    CHECK(proto.train.of_label(label).size() == 3);
  }
  const auto tight = small_corpus(2, 4);
  CHECK_THROWS_AS(clash::data::split_protocol(tight, 1, 2, 13),
                  ContractError);
}

TEST_CASE("sample_batch draws P identities with K contiguous clips") {
  const auto data = small_corpus();
  Rng rng(3);
  const auto batch = clash::data::sample_batch(data, 3, 2, 8, rng);
  CHECK(batch.sil.shape == Shape{{6, 1, 8, 16, 12}});
  CHECK(batch.dstf.shape == Shape{{6, 1, 8, 16, 12}});
  REQUIRE(batch.labels.size() == 6);
  std::set<int> ids;
  for (int i = 0; i < 3; ++i) {
    CHECK(batch.labels[std::size_t(2 * i)] ==
          batch.labels[std::size_t(2 * i + 1)]);
    ids.insert(batch.labels[std::size_t(2 * i)]);
  }
  CHECK(ids.size() == 3);  // identities are distinct
}

TEST_CASE("a full-length clip reproduces the stored sequence") {
  const auto data = small_corpus();
  Rng rng(5);
  const auto batch = clash::data::sample_batch(data, 1, 1, 12, rng);
  const int label = batch.labels[0];
  // Window start is forced to zero, so the clip equals one of the
  // identity's sequences verbatim.
  bool matched = false;
  for (auto i : data.of_label(label)) {
    const auto& s = data.samples[i];
    if (std::memcmp(batch.sil.ptr(), s.sil.data(),
                    s.sil.size() * sizeof(double)) == 0 &&
        std::memcmp(batch.dstf.ptr(), s.dstf.data(),
                    s.dstf.size() * sizeof(double)) == 0)
      matched = true;
  }
  CHECK(matched);
}

TEST_CASE("sample_batch validates P against the identity count") {
  const auto data = small_corpus(2, 4);
  Rng rng(3);
  CHECK_THROWS_AS(clash::data::sample_batch(data, 5, 1, 8, rng),
                  ContractError);
  CHECK_THROWS_AS(clash::data::sample_batch(data, 1, 1, 999, rng),
                  ContractError);
}

TEST_CASE("sequence_windows tiles a sample into disjoint clips") {
  const auto data = small_corpus();
  const auto& s = data.samples[2];
  const auto wins = clash::data::sequence_windows(s, 4);
  CHECK(wins.sil.shape == Shape{{3, 1, 4, 16, 12}});
  CHECK(wins.labels == std::vector<int>(3, s.label));
  const std::int64_t clip_sz = 4 * 16 * 12;
  for (std::int64_t i = 0; i < 3; ++i)
    CHECK(std::memcmp(wins.sil.ptr() + i * clip_sz,
                      s.sil.data() + i * clip_sz,
                      std::size_t(clip_sz) * sizeof(double)) == 0);
  CHECK_THROWS_AS(clash::data::sequence_windows(s, 13), ContractError);
}
