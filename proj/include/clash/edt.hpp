#pragma once

#include <cstdint>
#include <vector>

#include "clash/silhouette.hpp"

namespace clash {

// Largest supported image side. Keeps every squared distance, and the
// int64 cross-multiplied parabola-intersection comparisons, within range.
inline constexpr int kMaxEdtDim = 16384;

// Exact squared Euclidean distance to the nearest Boundary pixel, via the
// two-pass lower-envelope transform (per-column 1D relax, then a per-row
// parabola envelope in exact integer arithmetic). O(H*W).
// Throws EmptyBoundaryError when the map has no Boundary pixel.
std::vector<std::int32_t> edt_squared(const PixelClassMap& classes);

struct BiDtFrame {
  int height = 0;
  int width = 0;
  std::vector<double> dist;  // row-major; exactly 0 on boundary pixels
};

// sqrt of edt_squared over classify_pixels(frame). Squared values stay
// exact integers; the single final sqrt is the only rounding step.
BiDtFrame bi_dt(const SilhouetteFrame& frame);

}  // namespace clash
