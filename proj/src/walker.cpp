#include "clash/walker.hpp"

#include <cmath>
#include <numbers>
#include <cstdio>

#include "clash/errors.hpp"
#include "clash/rng.hpp"

namespace clash {

namespace {

constexpr double kLimbRadius = 0.75;  // half-thickness of a limb, pixels

double point_segment_dist(double px, double py, double ax, double ay,
                          double bx, double by) {
  const double dx = bx - ax, dy = by - ay;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((px - ax) * dx + (py - ay) * dy) / len2 : 0.0;
  t = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
  const double qx = ax + t * dx, qy = ay + t * dy;
  return std::hypot(px - qx, py - qy);
}

struct Geometry {
  double cx, torso_cy, hip_y, limb_len;
};

Geometry fit_geometry(const WalkerParams& p, int H, int W) {
  Geometry g;
  g.cx = 0.5 * (W - 1);
  g.torso_cy = 0.30 * (H - 1);
  g.hip_y = g.torso_cy + 0.7 * p.torso_ry;
  g.limb_len = 0.40 * (H - 1);

  const double reach = p.limb_amplitude + kLimbRadius;
  const bool fits = p.torso_rx > 0 && p.torso_ry > 0 &&
                    g.cx - p.torso_rx >= 0 && g.cx + p.torso_rx <= W - 1 &&
                    g.torso_cy - p.torso_ry >= 0 &&
                    g.torso_cy + p.torso_ry <= H - 1 &&
                    g.hip_y + g.limb_len <= H - 1 && g.cx - reach >= 0 &&
                    g.cx + reach <= W - 1;
  if (!fits) {
    char msg[128];
    std::snprintf(msg, sizeof(msg),
                  "walker geometry does not fit a %dx%d grid", H, W);
    throw ContractError(msg);
  }
  return g;
}

}  // namespace

SilhouetteSequence synth_walker(const WalkerParams& params, int T, int H,
                                int W, std::uint64_t seed) {
  if (T < 1) throw ContractError("walker needs T >= 1");
  if (H < 2 || W < 2) throw ContractError("walker grid too small");
  if (params.stride_period < 2)
    throw ContractError("stride_period must be >= 2");
  if (!(params.noise_prob >= 0.0 && params.noise_prob <= 1.0))
    throw ContractError("noise_prob must lie in [0,1]");
  const Geometry g = fit_geometry(params, H, W);

  Rng rng(seed);
  SilhouetteSequence seq;
  seq.frames.reserve(T);
  for (int t = 0; t < T; ++t) {
    // t mod period keeps the oscillator argument bit-identical across
    // cycles, so noise-free frames t and t+period match exactly.
    const int tm = t % params.stride_period;
    const double swing = std::sin(2.0 * std::numbers::pi * tm / params.stride_period +
                                  params.phase);
    const double foot_dx = params.limb_amplitude * swing;
    const double fy = g.hip_y + g.limb_len;

    SilhouetteFrame f;
    f.height = H;
    f.width = W;
    f.mask.assign(std::size_t(H) * W, 0);
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        const double ex = (x - g.cx) / params.torso_rx;
        const double ey = (y - g.torso_cy) / params.torso_ry;
        bool fg = ex * ex + ey * ey <= 1.0;
        if (!fg)
          fg = point_segment_dist(x, y, g.cx, g.hip_y, g.cx + foot_dx, fy) <=
               kLimbRadius;
        if (!fg)
          fg = point_segment_dist(x, y, g.cx, g.hip_y, g.cx - foot_dx, fy) <=
               kLimbRadius;
        if (fg) f.mask[std::size_t(y) * W + x] = 1;
      }
    }

    if (params.noise_prob > 0.0) {
      for (auto& px : f.mask)
        if (rng.bernoulli(params.noise_prob)) px ^= 1;
    }

    bool any = false;
    for (auto px : f.mask)
      if (px) { any = true; break; }
    if (!any) {
      const int yc = static_cast<int>(std::lround(g.torso_cy));
      const int xc = static_cast<int>(std::lround(g.cx));
      f.mask[std::size_t(yc) * W + xc] = 1;
    }
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

std::vector<SilhouetteSequence> make_corpus(const CorpusSpec& spec) {
  if (spec.ids < 1 || spec.seqs_per_id < 1)
    throw ContractError("corpus needs at least one id and one sequence");
  Rng jitter(seed_combine(spec.seed, 0));

  std::vector<SilhouetteSequence> out;
  out.reserve(std::size_t(spec.ids) * spec.seqs_per_id);
  for (int id = 0; id < spec.ids; ++id) {
    WalkerParams base;
    base.stride_period = 6 + 2 * (id % 4);
    base.limb_amplitude = 2.0 + 0.3 * id;
    base.torso_rx = 2.1 + 0.5 * ((id / 2) % 2);
    base.torso_ry = 3.2 + 0.6 * (id % 2);
    base.noise_prob = spec.noise_prob;

    for (int s = 0; s < spec.seqs_per_id; ++s) {
      WalkerParams p = base;
      p.phase = jitter.uniform(0.0, 2.0 * std::numbers::pi);
      p.limb_amplitude *= jitter.uniform(0.92, 1.08);
      p.torso_rx *= jitter.uniform(0.95, 1.05);
      p.torso_ry *= jitter.uniform(0.95, 1.05);

      const std::uint64_t idx =
          std::uint64_t(id) * spec.seqs_per_id + std::uint64_t(s);
      SilhouetteSequence seq = synth_walker(p, spec.frames, spec.height,
                                            spec.width,
                                            seed_combine(spec.seed, 1 + idx));
      char label[16];
      std::snprintf(label, sizeof(label), "s%02d", id);
      seq.subject_id = label;
      std::snprintf(label, sizeof(label), "v%02d", s);
      seq.view_id = label;
      out.push_back(std::move(seq));
    }
  }
  return out;
}

}  // namespace clash
