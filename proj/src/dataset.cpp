#include "clash/dataset.hpp"

#include <algorithm>
#include <cstring>

#include "clash/errors.hpp"

namespace clash::data {

using ad::Shape;
using ad::Tensor;

std::vector<std::size_t> GaitDataset::of_label(int label) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (samples[i].label == label) out.push_back(i);
  return out;
}

GaitDataset build_dataset(const std::vector<SilhouetteSequence>& seqs,
                          NormMode norm) {
  if (seqs.empty()) throw ContractError("dataset: no sequences");
  std::vector<std::string> subjects;
  for (const auto& s : seqs) subjects.push_back(s.subject_id);
  std::sort(subjects.begin(), subjects.end());
  subjects.erase(std::unique(subjects.begin(), subjects.end()),
                 subjects.end());

  GaitDataset out;
  out.num_classes = std::int64_t(subjects.size());
  for (const auto& seq : seqs) {
    if (seq.frames.empty())
      throw ContractError("dataset: empty sequence for subject '" +
                          seq.subject_id + "'");
    GaitSample s;
    s.subject_id = seq.subject_id;
    s.view_id = seq.view_id;
    s.label = int(std::lower_bound(subjects.begin(), subjects.end(),
                                   seq.subject_id) -
                  subjects.begin());
    s.t = std::int64_t(seq.frames.size());
    s.h = seq.frames[0].height;
    s.w = seq.frames[0].width;
    if (out.h == 0) {
      out.h = s.h;
      out.w = s.w;
    } else if (out.h != s.h || out.w != s.w) {
      throw ContractError("dataset: mixed frame sizes");
    }
    s.sil.resize(std::size_t(s.t * s.h * s.w));
    for (std::int64_t t = 0; t < s.t; ++t) {
      const auto& f = seq.frames[std::size_t(t)];
      for (std::int64_t i = 0; i < s.h * s.w; ++i)
        s.sil[std::size_t(t * s.h * s.w + i)] = double(f.mask[std::size_t(i)]);
    }
    // ZeroFill keeps the streams frame-aligned even on degenerate frames.
    const DstfSequence d =
        transform_sequence(seq, DegeneratePolicy::ZeroFill, norm);
    s.dstf.resize(std::size_t(s.t * s.h * s.w));
    for (std::int64_t t = 0; t < s.t; ++t)
      std::copy(d.frames[std::size_t(t)].field.begin(),
                d.frames[std::size_t(t)].field.end(),
                s.dstf.begin() + t * s.h * s.w);
    out.samples.push_back(std::move(s));
  }
  return out;
}

namespace {

// Deterministic per-identity shuffle of the sample indices for `label`.
std::vector<std::size_t> shuffled_of_label(const GaitDataset& all, int label,
                                           std::uint64_t seed) {
  std::vector<std::size_t> idx = all.of_label(label);
  Rng rng(seed_combine(seed, std::uint64_t(label)));
  for (std::size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[std::size_t(rng.uniform_int(i))]);
  return idx;
}

GaitDataset like(const GaitDataset& all) {
  GaitDataset d;
  d.num_classes = all.num_classes;
  d.h = all.h;
  d.w = all.w;
  return d;
}

}  // namespace

std::pair<GaitDataset, GaitDataset> split_dataset(const GaitDataset& all,
                                                  double val_fraction,
                                                  std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0))
    throw ContractError("split: val_fraction must lie in (0,1)");
  GaitDataset train = like(all), val = like(all);
  for (int label = 0; label < int(all.num_classes); ++label) {
    const auto idx = shuffled_of_label(all, label, seed);
    if (idx.size() < 2)
      throw ContractError(
          "split: identity '" +
          (idx.empty() ? std::to_string(label)
                       : all.samples[idx[0]].subject_id) +
          "' has " + std::to_string(idx.size()) + " sequence(s); need >= 2");
    std::size_t n_val =
        std::size_t(double(idx.size()) * val_fraction);  // floor: train keeps the extra
    n_val = std::clamp<std::size_t>(n_val, 1, idx.size() - 1);
    for (std::size_t i = 0; i < idx.size(); ++i)
      (i < n_val ? val : train).samples.push_back(all.samples[idx[i]]);
  }
  return {std::move(train), std::move(val)};
}

ProtocolSplit split_protocol(const GaitDataset& all, int gallery_n,
                             int probe_n, std::uint64_t seed) {
  if (gallery_n < 1 || probe_n < 1)
    throw ContractError("protocol split: gallery and probe need >= 1 each");
  ProtocolSplit out{like(all), like(all), like(all)};
  for (int label = 0; label < int(all.num_classes); ++label) {
    const auto idx = shuffled_of_label(all, label, seed_combine(seed, 0x9001));
    if (idx.size() < std::size_t(gallery_n + probe_n) + 2)
      throw ContractError("protocol split: identity '" +
                          (idx.empty() ? std::to_string(label)
                                       : all.samples[idx[0]].subject_id) +
                          "' has too few sequences for the protocol");
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto& s = all.samples[idx[i]];
      if (i < std::size_t(gallery_n))
        out.gallery.samples.push_back(s);
      else if (i < std::size_t(gallery_n + probe_n))
        out.probe.samples.push_back(s);
      else
        out.train.samples.push_back(s);
    }
  }
  return out;
}

namespace {

void copy_clip(const GaitSample& s, std::int64_t start, std::int64_t clip,
               double* sil_dst, double* dstf_dst) {
  const std::int64_t plane = s.h * s.w;
  std::memcpy(sil_dst, s.sil.data() + start * plane,
              std::size_t(clip * plane) * sizeof(double));
  std::memcpy(dstf_dst, s.dstf.data() + start * plane,
              std::size_t(clip * plane) * sizeof(double));
}

}  // namespace

ClipBatch sample_batch(const GaitDataset& data, int p, int k,
                       std::int64_t clip_len, Rng& rng) {
  if (p < 1 || k < 1) throw ContractError("batch: P and K must be positive");
  if (std::int64_t(data.num_classes) < p)
    throw ContractError("batch: fewer identities than P");

  // P distinct identities via partial Fisher-Yates over the label range.
  std::vector<int> labels(std::size_t(data.num_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = int(i);
  for (int i = 0; i < p; ++i) {
    const std::size_t j =
        std::size_t(i) +
        std::size_t(rng.uniform_int(std::uint64_t(labels.size() - std::size_t(i))));
    std::swap(labels[std::size_t(i)], labels[j]);
  }

  const std::int64_t b = std::int64_t(p) * k;
  ClipBatch batch;
  batch.sil = Tensor::zeros(Shape{{b, 1, clip_len, data.h, data.w}});
  batch.dstf = Tensor::zeros(Shape{{b, 1, clip_len, data.h, data.w}});
  const std::int64_t clip_sz = clip_len * data.h * data.w;
  for (int pi = 0; pi < p; ++pi) {
    const auto idx = data.of_label(labels[std::size_t(pi)]);
    if (idx.empty()) throw ContractError("batch: identity without sequences");
    for (int ki = 0; ki < k; ++ki) {
      const GaitSample& s =
          data.samples[idx[std::size_t(rng.uniform_int(idx.size()))]];
      if (s.t < clip_len)
        throw ContractError("batch: sequence shorter than the clip length");
      const std::int64_t start = std::int64_t(
          rng.uniform_int(std::uint64_t(s.t - clip_len + 1)));
      const std::int64_t bi = std::int64_t(pi) * k + ki;
      copy_clip(s, start, clip_len, batch.sil.ptr() + bi * clip_sz,
                batch.dstf.ptr() + bi * clip_sz);
      batch.labels.push_back(s.label);
    }
  }
  return batch;
}

ClipBatch sequence_windows(const GaitSample& sample, std::int64_t clip_len) {
  if (sample.t < clip_len)
    throw ContractError("windows: sequence shorter than the clip length");
  const std::int64_t n = sample.t / clip_len;
  ClipBatch batch;
  batch.sil = Tensor::zeros(Shape{{n, 1, clip_len, sample.h, sample.w}});
  batch.dstf = Tensor::zeros(Shape{{n, 1, clip_len, sample.h, sample.w}});
  const std::int64_t clip_sz = clip_len * sample.h * sample.w;
  for (std::int64_t i = 0; i < n; ++i) {
    copy_clip(sample, i * clip_len, clip_len, batch.sil.ptr() + i * clip_sz,
              batch.dstf.ptr() + i * clip_sz);
    batch.labels.push_back(sample.label);
  }
  return batch;
}

}  // namespace clash::data
