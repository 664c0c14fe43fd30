#pragma once

#include <cstdint>
#include <vector>

#include "clash/silhouette.hpp"

namespace clash {

// Synthetic gait source: a torso ellipse plus two limb segments swinging in
// antiphase. The swing follows sin(2*pi*t/stride_period + phase), evaluated
// at t mod stride_period so noise-free sequences repeat bit-identically.
struct WalkerParams {
  double torso_rx = 2.4;        // torso semi-axes, pixels
  double torso_ry = 3.4;
  double limb_amplitude = 2.6;  // foot swing amplitude, pixels
  int stride_period = 8;        // frames per gait cycle, >= 2
  double phase = 0.0;           // radians
  double noise_prob = 0.0;      // per-pixel salt-and-pepper flip probability
};

// Deterministic for fixed (params, T, H, W, seed). Throws ContractError when
// the torso/limb geometry does not fit the grid. Every frame carries at
// least one foreground pixel even under heavy noise.
SilhouetteSequence synth_walker(const WalkerParams& params, int T, int H,
                                int W, std::uint64_t seed);

// Bundled desk-scale corpus: `ids` walkers with distinct body geometry and
// stride dynamics, `seqs_per_id` takes each with fresh phase and mild shape
// jitter so no two sequences are bit-identical.
struct CorpusSpec {
  int ids = 8;
  int seqs_per_id = 8;
  int frames = 16;
  int height = 16;
  int width = 12;
  double noise_prob = 0.0;
  std::uint64_t seed = 1;
};

std::vector<SilhouetteSequence> make_corpus(const CorpusSpec& spec);

}  // namespace clash
