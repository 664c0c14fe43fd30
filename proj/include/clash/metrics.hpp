#pragma once

#include <string>
#include <vector>

#include "clash/dstf.hpp"
#include "clash/silhouette.hpp"

namespace clash {

// Shannon entropy (bits) of the histogram over `bins` uniform bins spanning
// the fixed range [lo, hi]; the range is per descriptor type, not per frame,
// so values are comparable across frames. Throws on non-finite input.
double image_entropy(const double* vals, std::size_t n, int bins, double lo,
                     double hi);
double image_entropy(const DstfFrame& f, int bins);        // range [-1, 1]
double image_entropy(const SilhouetteFrame& f, int bins);  // range [0, 1]

struct EntropyReport {
  std::vector<double> per_frame_entropy;  // bits
  double mean_entropy = 0.0;
  int bins = 0;
};

EntropyReport entropy_report(const DstfSequence& seq, int bins);
EntropyReport entropy_report(const SilhouetteSequence& seq, int bins);

// mean DSTF entropy / mean silhouette entropy. Errors when the silhouette
// entropy is zero (all-constant frames) or lengths differ.
double entropy_ratio(const SilhouetteSequence& sil, const DstfSequence& dstf,
                     int bins);

// Gait entropy image: per-pixel Bernoulli entropy of the temporal mean.
struct GeniMap {
  int height = 0;
  int width = 0;
  std::vector<double> entropy;  // bits in [0, 1]
};

GeniMap geni(const SilhouetteSequence& seq);
GrayImage geni_to_gray(const GeniMap& map);  // [0,1] -> [0,255]

// |frame_t - frame_{t-1}| and the fraction of pixels with difference > 1e-6.
struct FrameDiff {
  std::vector<double> abs_diff;
  double changed_fraction = 0.0;
};

FrameDiff frame_difference(const DstfSequence& seq, std::size_t t);
FrameDiff frame_difference(const SilhouetteSequence& seq, std::size_t t);

// Per-frame rows (index, entropy_sil, entropy_dstf, changed_fraction_sil,
// changed_fraction_dstf, -) closed by a mean row that also carries the
// entropy ratio.
void write_metrics_csv(const std::string& path, const SilhouetteSequence& sil,
                       const DstfSequence& dstf, int bins);

}  // namespace clash
