#pragma once

#include <string>
#include <vector>

#include "clash/edt.hpp"
#include "clash/silhouette.hpp"

namespace clash {

// Signed, per-region-normalized distance field: positive inside the
// silhouette, negative outside, exactly 0 on the boundary. Values in [-1,1].
struct DstfFrame {
  int height = 0;
  int width = 0;
  std::vector<double> field;
};

struct DstfSequence {
  std::vector<DstfFrame> frames;
};

enum class DegeneratePolicy { Skip, ZeroFill, Error };
enum class NormMode { PerFrame, PerSequence };

// Foreground -> +dist / max_fore, background -> -dist / max_back,
// boundary -> 0. An empty (or all-zero) region maps to zeros.
DstfFrame sign_and_normalize(const BiDtFrame& bd, const PixelClassMap& classes);

// Per-frame bi_dt + sign_and_normalize. Frames with no boundary follow the
// policy: Skip drops them (output is shorter), ZeroFill emits an all-zero
// frame, Error raises EmptyBoundaryError naming the frame index.
// PerSequence normalization divides by each region's max over all frames.
DstfSequence transform_sequence(const SilhouetteSequence& seq,
                                DegeneratePolicy policy,
                                NormMode norm = NormMode::PerFrame);

// Raw container: "DSTF" magic, u8 version, u32le T/H/W, f32le payload in
// frame-major row-major order.
void save_dstf(const std::string& path, const DstfSequence& seq);
DstfSequence load_dstf(const std::string& path);

// Preview: v -> round((v+1)/2 * 255).
GrayImage dstf_preview(const DstfFrame& frame);

}  // namespace clash
