#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "clash/dstf.hpp"
#include "clash/rng.hpp"
#include "clash/silhouette.hpp"
#include "clash/tensor.hpp"

namespace clash::data {

// One sequence with both descriptor streams materialized as dense doubles.
struct GaitSample {
  int label = 0;  // 0-based identity index (class id)
  std::string subject_id;
  std::string view_id;
  std::int64_t t = 0, h = 0, w = 0;
  std::vector<double> sil;   // t*h*w, values in {0,1}
  std::vector<double> dstf;  // t*h*w, values in [-1,1]
};

struct GaitDataset {
  std::vector<GaitSample> samples;
  std::int64_t num_classes = 0;
  std::int64_t h = 0, w = 0;

  std::vector<std::size_t> of_label(int label) const;
};

// Computes the DSTF stream per sequence (zero-filling degenerate frames to
// keep the two streams frame-aligned) and assigns class ids by sorted
// subject label.
GaitDataset build_dataset(const std::vector<SilhouetteSequence>& seqs,
                          NormMode norm);

// Per-identity random split; val receives clamp(floor(frac*n), 1, n-1)
// sequences, so train keeps the extra on odd counts. Identities with fewer
// than 2 sequences are a contract error naming the identity.
std::pair<GaitDataset, GaitDataset> split_dataset(const GaitDataset& all,
                                                  double val_fraction,
                                                  std::uint64_t seed);

// Evaluation protocol split: per identity, `gallery_n` sequences to the
// gallery, `probe_n` to the probe set, the rest to train.
struct ProtocolSplit {
  GaitDataset train, gallery, probe;
};
ProtocolSplit split_protocol(const GaitDataset& all, int gallery_n,
                             int probe_n, std::uint64_t seed);

struct ClipBatch {
  ad::Tensor sil;   // (P*K,1,clip,H,W)
  ad::Tensor dstf;  // same shape
  std::vector<int> labels;
};

// P distinct identities, K random clips each (sequences drawn with
// replacement), contiguous windows of clip_len frames.
ClipBatch sample_batch(const GaitDataset& data, int p, int k,
                       std::int64_t clip_len, Rng& rng);

// Disjoint-window clip tensors covering one sample, for evaluation.
ClipBatch sequence_windows(const GaitSample& sample, std::int64_t clip_len);

}  // namespace clash::data
