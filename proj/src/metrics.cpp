#include "clash/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <memory>

#include "clash/errors.hpp"

namespace clash {

double image_entropy(const double* vals, std::size_t n, int bins, double lo,
                     double hi) {
  if (bins < 2) throw ContractError("image_entropy: bins must be >= 2");
  if (n == 0) throw ContractError("image_entropy: empty frame");
  std::vector<std::size_t> hist(std::size_t(bins), 0);
  const double scale = bins / (hi - lo);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(vals[i]))
      throw NumericError("image_entropy: non-finite value");
    int b = int((vals[i] - lo) * scale);
    if (b < 0) b = 0;
    if (b >= bins) b = bins - 1;
    ++hist[std::size_t(b)];
  }
  double e = 0.0;
  for (std::size_t c : hist) {
    if (c == 0) continue;
    const double p = double(c) / double(n);
    e -= p * std::log2(p);
  }
  return e < 0.0 ? 0.0 : e;
}

double image_entropy(const DstfFrame& f, int bins) {
  return image_entropy(f.field.data(), f.field.size(), bins, -1.0, 1.0);
}

double image_entropy(const SilhouetteFrame& f, int bins) {
  std::vector<double> vals(f.mask.begin(), f.mask.end());
  return image_entropy(vals.data(), vals.size(), bins, 0.0, 1.0);
}

namespace {

template <typename Seq>
EntropyReport report_of(const Seq& seq, int bins) {
  EntropyReport r;
  r.bins = bins;
  for (const auto& f : seq.frames)
    r.per_frame_entropy.push_back(image_entropy(f, bins));
  if (r.per_frame_entropy.empty())
    throw ContractError("entropy_report: empty sequence");
  double s = 0.0;
  for (double e : r.per_frame_entropy) s += e;
  r.mean_entropy = s / double(r.per_frame_entropy.size());
  return r;
}

}  // namespace

EntropyReport entropy_report(const DstfSequence& seq, int bins) {
  return report_of(seq, bins);
}

EntropyReport entropy_report(const SilhouetteSequence& seq, int bins) {
  return report_of(seq, bins);
}

double entropy_ratio(const SilhouetteSequence& sil, const DstfSequence& dstf,
                     int bins) {
  if (sil.frames.size() != dstf.frames.size())
    throw ContractError("entropy_ratio: sequence lengths differ");
  const EntropyReport rs = entropy_report(sil, bins);
  const EntropyReport rd = entropy_report(dstf, bins);
  if (rs.mean_entropy <= 0.0)
    throw ContractError("entropy_ratio: silhouette entropy is zero");
  return rd.mean_entropy / rs.mean_entropy;
}

GeniMap geni(const SilhouetteSequence& seq) {
  if (seq.frames.empty()) throw ContractError("geni: empty sequence");
  GeniMap map;
  map.height = seq.frames[0].height;
  map.width = seq.frames[0].width;
  map.entropy.assign(seq.frames[0].mask.size(), 0.0);

  std::vector<double> mean(map.entropy.size(), 0.0);
  for (const auto& f : seq.frames)
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += f.mask[i];
  const double T = double(seq.frames.size());
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double p = mean[i] / T;
    // 0 * log 0 := 0 at both endpoints.
    double e = 0.0;
    if (p > 0.0 && p < 1.0)
      e = -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
    map.entropy[i] = e;
  }
  return map;
}

GrayImage geni_to_gray(const GeniMap& map) {
  GrayImage img;
  img.height = map.height;
  img.width = map.width;
  img.px.resize(map.entropy.size());
  for (std::size_t i = 0; i < map.entropy.size(); ++i)
    img.px[i] = std::uint8_t(std::lround(map.entropy[i] * 255.0));
  return img;
}

namespace {

FrameDiff diff_grids(const std::vector<double>& prev,
                     const std::vector<double>& cur) {
  FrameDiff d;
  d.abs_diff.resize(cur.size());
  std::size_t changed = 0;
  for (std::size_t i = 0; i < cur.size(); ++i) {
    d.abs_diff[i] = std::fabs(cur[i] - prev[i]);
    changed += d.abs_diff[i] > 1e-6;
  }
  d.changed_fraction = double(changed) / double(cur.size());
  return d;
}

}  // namespace

FrameDiff frame_difference(const DstfSequence& seq, std::size_t t) {
  if (t < 1 || t >= seq.frames.size())
    throw ContractError("frame_difference: index out of range");
  return diff_grids(seq.frames[t - 1].field, seq.frames[t].field);
}

FrameDiff frame_difference(const SilhouetteSequence& seq, std::size_t t) {
  if (t < 1 || t >= seq.frames.size())
    throw ContractError("frame_difference: index out of range");
  std::vector<double> a(seq.frames[t - 1].mask.begin(),
                        seq.frames[t - 1].mask.end());
  std::vector<double> b(seq.frames[t].mask.begin(),
                        seq.frames[t].mask.end());
  return diff_grids(a, b);
}

void write_metrics_csv(const std::string& path, const SilhouetteSequence& sil,
                       const DstfSequence& dstf, int bins) {
  if (sil.frames.size() != dstf.frames.size())
    throw ContractError("write_metrics_csv: sequence lengths differ");
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(
      std::fopen(path.c_str(), "w"), &std::fclose);
  if (!f) throw FormatError("cannot open " + path + " for writing");

  const EntropyReport rs = entropy_report(sil, bins);
  const EntropyReport rd = entropy_report(dstf, bins);
  std::fprintf(f.get(),
               "index,entropy_sil,entropy_dstf,changed_fraction_sil,"
               "changed_fraction_dstf,entropy_ratio\n");
  double cf_sil_sum = 0.0, cf_dstf_sum = 0.0;
  for (std::size_t t = 0; t < sil.frames.size(); ++t) {
    double cf_s = 0.0, cf_d = 0.0;
    if (t >= 1) {
      cf_s = frame_difference(sil, t).changed_fraction;
      cf_d = frame_difference(dstf, t).changed_fraction;
    }
    cf_sil_sum += cf_s;
    cf_dstf_sum += cf_d;
    std::fprintf(f.get(), "%zu,%.9g,%.9g,%.9g,%.9g,\n", t,
                 rs.per_frame_entropy[t], rd.per_frame_entropy[t], cf_s, cf_d);
  }
  const double T = double(sil.frames.size());
  const double ratio =
      rs.mean_entropy > 0.0 ? rd.mean_entropy / rs.mean_entropy : 0.0;
  std::fprintf(f.get(), "mean,%.9g,%.9g,%.9g,%.9g,%.9g\n", rs.mean_entropy,
               rd.mean_entropy, cf_sil_sum / T, cf_dstf_sum / T, ratio);
}

}  // namespace clash
