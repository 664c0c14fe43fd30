#include <algorithm>
#include <cmath>
#include <vector>

#include "clash/errors.hpp"
#include "clash/kernels.hpp"
#include "clash/ops.hpp"

namespace clash::ad {

namespace {

using Grad = std::vector<double>;

struct ConvPlan {
  std::int64_t B, Cin, T, H, W;
  std::int64_t Cout, kT, kH, kW;
  std::int64_t groups, dil;
  std::int64_t cg_in, cg_out;
  std::int64_t M;  // output positions per channel (stride 1, same padding)
  std::int64_t K;  // patch length = cg_in * kT * kH * kW
  std::int64_t padT, padH, padW;
  bool pointwise;
  bool depthwise;  // one input and one output channel per group
};

ConvPlan plan_conv(const Shape& xs, const Shape& ws, int groups,
                   int dilation) {
  if (xs.rank() != 5 || ws.rank() != 5)
    throw ContractError("conv3d: expected rank-5 input and weight, got " +
                        xs.str() + " and " + ws.str());
  if (groups < 1 || dilation < 1)
    throw ContractError("conv3d: groups and dilation must be positive");
  ConvPlan p{};
  p.B = xs[0];
  p.Cin = xs[1];
  p.T = xs[2];
  p.H = xs[3];
  p.W = xs[4];
  p.Cout = ws[0];
  p.kT = ws[2];
  p.kH = ws[3];
  p.kW = ws[4];
  p.groups = groups;
  p.dil = dilation;
  if (p.Cin % groups != 0 || p.Cout % groups != 0)
    throw ContractError("conv3d: channels not divisible by groups");
  p.cg_in = p.Cin / groups;
  p.cg_out = p.Cout / groups;
  if (ws[1] != p.cg_in)
    throw ContractError("conv3d: weight " + ws.str() + " expects " +
                        std::to_string(ws[1] * groups) + " input channels");
  if (p.kT % 2 == 0 || p.kH % 2 == 0 || p.kW % 2 == 0)
    throw ContractError("conv3d: kernel dims must be odd for same padding");
  p.M = p.T * p.H * p.W;
  p.K = p.cg_in * p.kT * p.kH * p.kW;
  p.padT = p.dil * (p.kT - 1) / 2;
  p.padH = p.dil * (p.kH - 1) / 2;
  p.padW = p.dil * (p.kW - 1) / 2;
  p.pointwise = p.kT == 1 && p.kH == 1 && p.kW == 1;
  p.depthwise = !p.pointwise && p.cg_in == 1 && p.cg_out == 1;
  return p;
}

// Patch matrix (K x M) for one (batch, group) slab, rows contiguous so the
// GEMM below can stream them through axpy.
void im2col(const ConvPlan& p, const double* x, double* col) {
  for (std::int64_t ci = 0; ci < p.cg_in; ++ci) {
    const double* xc = x + ci * p.M;
    for (std::int64_t it = 0; it < p.kT; ++it) {
      const std::int64_t ot = it * p.dil - p.padT;
      for (std::int64_t ih = 0; ih < p.kH; ++ih) {
        const std::int64_t oh = ih * p.dil - p.padH;
        for (std::int64_t iw = 0; iw < p.kW; ++iw) {
          const std::int64_t ow = iw * p.dil - p.padW;
          double* row =
              col + (((ci * p.kT + it) * p.kH + ih) * p.kW + iw) * p.M;
          // Shift can exceed the row when padding > W (kernel 5, dilation 2
          // on narrow grids), hence clamping both ends. w1 >= w0 always.
          const std::int64_t w0 = std::clamp<std::int64_t>(-ow, 0, p.W);
          const std::int64_t w1 = std::clamp<std::int64_t>(p.W - ow, 0, p.W);
          for (std::int64_t t = 0; t < p.T; ++t) {
            const std::int64_t ti = t + ot;
            for (std::int64_t h = 0; h < p.H; ++h) {
              const std::int64_t hi = h + oh;
              double* dst = row + (t * p.H + h) * p.W;
              if (ti < 0 || ti >= p.T || hi < 0 || hi >= p.H) {
                std::fill_n(dst, p.W, 0.0);
                continue;
              }
              const double* src = xc + (ti * p.H + hi) * p.W + ow;
              if (w0 > 0) std::fill_n(dst, w0, 0.0);
              if (w1 > w0) std::copy(src + w0, src + w1, dst + w0);
              if (w1 < p.W) std::fill_n(dst + w1, p.W - w1, 0.0);
            }
          }
        }
      }
    }
  }
}

// Transpose of im2col: scatter-adds patch-gradient rows back into gx.
void col2im(const ConvPlan& p, const double* col, double* gx) {
  const kern::Kernels& k = kern::active();
  for (std::int64_t ci = 0; ci < p.cg_in; ++ci) {
    double* xc = gx + ci * p.M;
    for (std::int64_t it = 0; it < p.kT; ++it) {
      const std::int64_t ot = it * p.dil - p.padT;
      for (std::int64_t ih = 0; ih < p.kH; ++ih) {
        const std::int64_t oh = ih * p.dil - p.padH;
        for (std::int64_t iw = 0; iw < p.kW; ++iw) {
          const std::int64_t ow = iw * p.dil - p.padW;
          const double* row =
              col + (((ci * p.kT + it) * p.kH + ih) * p.kW + iw) * p.M;
          const std::int64_t w0 = std::clamp<std::int64_t>(-ow, 0, p.W);
          const std::int64_t w1 = std::clamp<std::int64_t>(p.W - ow, 0, p.W);
          if (w1 <= w0) continue;
          for (std::int64_t t = 0; t < p.T; ++t) {
            const std::int64_t ti = t + ot;
            if (ti < 0 || ti >= p.T) continue;
            for (std::int64_t h = 0; h < p.H; ++h) {
              const std::int64_t hi = h + oh;
              if (hi < 0 || hi >= p.H) continue;
              k.axpy(1.0, row + (t * p.H + h) * p.W + w0,
                     xc + (ti * p.H + hi) * p.W + ow + w0,
                     std::size_t(w1 - w0));
            }
          }
        }
      }
    }
  }
}

// Direct stencil for depthwise slabs. Their patch matrix is K shifted
// copies of a single-channel plane, so im2col would cost as much as the
// convolution itself; the stencil also spares the backward pass from
// rebuilding it. Taps accumulate in ascending (kt,kh,kw) order per output
// element, mirroring the GEMM path's fixed k order.
void dw_forward(const ConvPlan& p, const double* x, const double* w,
                double* o) {
  for (std::int64_t t = 0; t < p.T; ++t)
    for (std::int64_t h = 0; h < p.H; ++h)
      for (std::int64_t ww = 0; ww < p.W; ++ww) {
        double acc = 0.0;
        for (std::int64_t it = 0; it < p.kT; ++it) {
          const std::int64_t ti = t + it * p.dil - p.padT;
          if (ti < 0 || ti >= p.T) continue;
          for (std::int64_t ih = 0; ih < p.kH; ++ih) {
            const std::int64_t hi = h + ih * p.dil - p.padH;
            if (hi < 0 || hi >= p.H) continue;
            const double* xrow = x + (ti * p.H + hi) * p.W;
            const double* wrow = w + (it * p.kH + ih) * p.kW;
            for (std::int64_t iw = 0; iw < p.kW; ++iw) {
              const std::int64_t wi = ww + iw * p.dil - p.padW;
              if (wi < 0 || wi >= p.W) continue;
              acc += wrow[iw] * xrow[wi];
            }
          }
        }
        o[(t * p.H + h) * p.W + ww] = acc;
      }
}

void dw_backward(const ConvPlan& p, const double* x, const double* w,
                 const double* go, double* gx, double* gw) {
  for (std::int64_t t = 0; t < p.T; ++t)
    for (std::int64_t h = 0; h < p.H; ++h)
      for (std::int64_t ww = 0; ww < p.W; ++ww) {
        const double g = go[(t * p.H + h) * p.W + ww];
        for (std::int64_t it = 0; it < p.kT; ++it) {
          const std::int64_t ti = t + it * p.dil - p.padT;
          if (ti < 0 || ti >= p.T) continue;
          for (std::int64_t ih = 0; ih < p.kH; ++ih) {
            const std::int64_t hi = h + ih * p.dil - p.padH;
            if (hi < 0 || hi >= p.H) continue;
            const std::int64_t in_row = (ti * p.H + hi) * p.W;
            const std::int64_t w_row = (it * p.kH + ih) * p.kW;
            for (std::int64_t iw = 0; iw < p.kW; ++iw) {
              const std::int64_t wi = ww + iw * p.dil - p.padW;
              if (wi < 0 || wi >= p.W) continue;
              if (gw) gw[w_row + iw] += g * x[in_row + wi];
              if (gx) gx[in_row + wi] += w[w_row + iw] * g;
            }
          }
        }
      }
}

std::vector<double>& conv_scratch(std::size_t n) {
  thread_local std::vector<double> buf;
  if (buf.size() < n) buf.resize(n);
  return buf;
}

// O(cg_out x M) += Wg(cg_out x K) @ col(K x M); k ascends per output row, so
// accumulation order is fixed.
void conv_gemm(const ConvPlan& p, const double* wg, const double* col,
               double* o) {
  const kern::Kernels& k = kern::active();
  std::fill_n(o, p.cg_out * p.M, 0.0);
  for (std::int64_t kk = 0; kk < p.K; ++kk) {
    const double* crow = col + kk * p.M;
    for (std::int64_t oc = 0; oc < p.cg_out; ++oc)
      k.axpy(wg[oc * p.K + kk], crow, o + oc * p.M, std::size_t(p.M));
  }
}

}  // namespace

Tensor conv3d(Tape& tp, const Tensor& x, const Tensor& w, int groups,
              int dilation) {
  const ConvPlan p = plan_conv(x.shape, w.shape, groups, dilation);
  Tensor out = Tensor::zeros(Shape{p.B, p.Cout, p.T, p.H, p.W});
  const std::int64_t xslab = p.cg_in * p.M;
  const std::int64_t oslab = p.cg_out * p.M;
  double* colbuf = (p.pointwise || p.depthwise)
                       ? nullptr
                       : conv_scratch(std::size_t(p.K * p.M)).data();
  for (std::int64_t b = 0; b < p.B; ++b) {
    for (std::int64_t g = 0; g < p.groups; ++g) {
      const double* xg = x.ptr() + (b * p.groups + g) * xslab;
      if (p.depthwise) {
        dw_forward(p, xg, w.ptr() + g * p.K,
                   out.ptr() + (b * p.groups + g) * oslab);
        continue;
      }
      const double* col = xg;  // pointwise: patch matrix is the input itself
      if (!p.pointwise) {
        im2col(p, xg, colbuf);
        col = colbuf;
      }
      conv_gemm(p, w.ptr() + g * p.cg_out * p.K, col,
                out.ptr() + (b * p.groups + g) * oslab);
    }
  }
  if (x.node < 0 && w.node < 0) return out;

  const int nx = x.node, nw = w.node;
  const std::int64_t numx = x.numel(), numw = w.numel();
  auto xdata = x.data, wdata = w.data;
  out.node = tp.record([=](Tape& t, int self) {
    const Grad& g = t.node_grad(self);
    const kern::Kernels& k = kern::active();
    Grad* gxv = nx >= 0 ? &t.grad_buffer(nx, numx) : nullptr;
    Grad* gwv = nw >= 0 ? &t.grad_buffer(nw, numw) : nullptr;
    std::vector<double> colv, gcolv;
    if (!p.pointwise && !p.depthwise) colv.resize(std::size_t(p.K * p.M));
    if (gxv && !p.depthwise) gcolv.resize(std::size_t(p.K * p.M));
    for (std::int64_t b = 0; b < p.B; ++b) {
      for (std::int64_t gr = 0; gr < p.groups; ++gr) {
        const double* xg = xdata->data() + (b * p.groups + gr) * xslab;
        const double* wg = wdata->data() + gr * p.cg_out * p.K;
        const double* go = g.data() + (b * p.groups + gr) * oslab;
        if (p.depthwise) {
          dw_backward(p, xg, wg, go,
                      gxv ? gxv->data() + (b * p.groups + gr) * xslab
                          : nullptr,
                      gwv ? gwv->data() + gr * p.K : nullptr);
          continue;
        }
        const double* col = xg;
        if (!p.pointwise) {
          im2col(p, xg, colv.data());
          col = colv.data();
        }
        if (gwv) {
          double* gw = gwv->data() + gr * p.cg_out * p.K;
          for (std::int64_t oc = 0; oc < p.cg_out; ++oc)
            for (std::int64_t kk = 0; kk < p.K; ++kk)
              gw[oc * p.K + kk] +=
                  k.dot(go + oc * p.M, col + kk * p.M, std::size_t(p.M));
        }
        if (gxv) {
          double* gx = gxv->data() + (b * p.groups + gr) * xslab;
          if (p.pointwise) {
            // col2im is the identity here; accumulate straight into gx.
            for (std::int64_t kk = 0; kk < p.K; ++kk)
              for (std::int64_t oc = 0; oc < p.cg_out; ++oc)
                k.axpy(wg[oc * p.K + kk], go + oc * p.M, gx + kk * p.M,
                       std::size_t(p.M));
          } else {
            std::fill(gcolv.begin(), gcolv.end(), 0.0);
            for (std::int64_t kk = 0; kk < p.K; ++kk)
              for (std::int64_t oc = 0; oc < p.cg_out; ++oc)
                k.axpy(wg[oc * p.K + kk], go + oc * p.M,
                       gcolv.data() + kk * p.M, std::size_t(p.M));
            col2im(p, gcolv.data(), gx);
          }
        }
      }
    }
  });
  return out;
}

namespace {

struct PoolDims {
  std::int64_t B, C, T, H, W;
};

PoolDims pool_dims(const Shape& s, const char* op) {
  if (s.rank() != 5)
    throw ContractError(std::string(op) + ": expected rank-5 input, got " +
                        s.str());
  return {s[0], s[1], s[2], s[3], s[4]};
}

}  // namespace

Tensor avgpool3d(Tape& tp, const Tensor& x) {
  const PoolDims d = pool_dims(x.shape, "avgpool3d");
  Tensor out = Tensor::zeros(x.shape);
  const double* px = x.ptr();
  double* po = out.ptr();
  const std::int64_t plane = d.T * d.H * d.W;
  // Divisor counts only in-bounds taps, so border outputs stay unbiased.
  auto inv_count = std::make_shared<std::vector<double>>(std::size_t(plane));
  for (std::int64_t t = 0; t < d.T; ++t)
    for (std::int64_t h = 0; h < d.H; ++h)
      for (std::int64_t w = 0; w < d.W; ++w) {
        const std::int64_t ct = std::min(t + 1, d.T - 1) - std::max<std::int64_t>(t - 1, 0) + 1;
        const std::int64_t ch = std::min(h + 1, d.H - 1) - std::max<std::int64_t>(h - 1, 0) + 1;
        const std::int64_t cw = std::min(w + 1, d.W - 1) - std::max<std::int64_t>(w - 1, 0) + 1;
        (*inv_count)[std::size_t((t * d.H + h) * d.W + w)] =
            1.0 / double(ct * ch * cw);
      }
  for (std::int64_t bc = 0; bc < d.B * d.C; ++bc) {
    const double* xs = px + bc * plane;
    double* os = po + bc * plane;
    for (std::int64_t t = 0; t < d.T; ++t)
      for (std::int64_t h = 0; h < d.H; ++h)
        for (std::int64_t w = 0; w < d.W; ++w) {
          double acc = 0.0;
          for (std::int64_t dt = -1; dt <= 1; ++dt) {
            const std::int64_t ti = t + dt;
            if (ti < 0 || ti >= d.T) continue;
            for (std::int64_t dh = -1; dh <= 1; ++dh) {
              const std::int64_t hi = h + dh;
              if (hi < 0 || hi >= d.H) continue;
              for (std::int64_t dw = -1; dw <= 1; ++dw) {
                const std::int64_t wi = w + dw;
                if (wi < 0 || wi >= d.W) continue;
                acc += xs[(ti * d.H + hi) * d.W + wi];
              }
            }
          }
          const std::int64_t at = (t * d.H + h) * d.W + w;
          os[at] = acc * (*inv_count)[std::size_t(at)];
        }
  }
  if (x.node < 0) return out;
  const int nx = x.node;
  const std::int64_t n = x.numel();
  out.node = tp.record([=](Tape& t, int self) {
    const Grad& g = t.node_grad(self);
    Grad& gx = t.grad_buffer(nx, n);
    for (std::int64_t bc = 0; bc < d.B * d.C; ++bc) {
      const double* gs = g.data() + bc * plane;
      double* gxs = gx.data() + bc * plane;
      for (std::int64_t tt = 0; tt < d.T; ++tt)
        for (std::int64_t h = 0; h < d.H; ++h)
          for (std::int64_t w = 0; w < d.W; ++w) {
            const std::int64_t at = (tt * d.H + h) * d.W + w;
            const double gv = gs[at] * (*inv_count)[std::size_t(at)];
            for (std::int64_t dt = -1; dt <= 1; ++dt) {
              const std::int64_t ti = tt + dt;
              if (ti < 0 || ti >= d.T) continue;
              for (std::int64_t dh = -1; dh <= 1; ++dh) {
                const std::int64_t hi = h + dh;
                if (hi < 0 || hi >= d.H) continue;
                for (std::int64_t dw = -1; dw <= 1; ++dw) {
                  const std::int64_t wi = w + dw;
                  if (wi < 0 || wi >= d.W) continue;
                  gxs[(ti * d.H + hi) * d.W + wi] += gv;
                }
              }
            }
          }
    }
  });
  return out;
}

Tensor maxpool3d(Tape& tp, const Tensor& x) {
  const PoolDims d = pool_dims(x.shape, "maxpool3d");
  Tensor out = Tensor::zeros(x.shape);
  const double* px = x.ptr();
  double* po = out.ptr();
  const std::int64_t plane = d.T * d.H * d.W;
  auto arg =
      std::make_shared<std::vector<std::int64_t>>(std::size_t(x.numel()));
  for (std::int64_t bc = 0; bc < d.B * d.C; ++bc) {
    const double* xs = px + bc * plane;
    for (std::int64_t t = 0; t < d.T; ++t)
      for (std::int64_t h = 0; h < d.H; ++h)
        for (std::int64_t w = 0; w < d.W; ++w) {
          double best = 0.0;
          std::int64_t bi = -1;
          // Taps visit ascending input index; strict > keeps the lowest
          // index on ties.
          for (std::int64_t dt = -1; dt <= 1; ++dt) {
            const std::int64_t ti = t + dt;
            if (ti < 0 || ti >= d.T) continue;
            for (std::int64_t dh = -1; dh <= 1; ++dh) {
              const std::int64_t hi = h + dh;
              if (hi < 0 || hi >= d.H) continue;
              for (std::int64_t dw = -1; dw <= 1; ++dw) {
                const std::int64_t wi = w + dw;
                if (wi < 0 || wi >= d.W) continue;
                const std::int64_t at = (ti * d.H + hi) * d.W + wi;
                if (bi < 0 || xs[at] > best) {
                  best = xs[at];
                  bi = at;
                }
              }
            }
          }
          const std::int64_t at = (t * d.H + h) * d.W + w;
          po[bc * plane + at] = best;
          (*arg)[std::size_t(bc * plane + at)] = bc * plane + bi;
        }
  }
  if (x.node < 0) return out;
  const int nx = x.node;
  const std::int64_t n = x.numel();
  out.node = tp.record([=](Tape& t, int self) {
    const Grad& g = t.node_grad(self);
    Grad& gx = t.grad_buffer(nx, n);
    for (std::size_t i = 0; i < arg->size(); ++i)
      gx[std::size_t((*arg)[i])] += g[i];
  });
  return out;
}

Tensor maxpool_spatial2(Tape& tp, const Tensor& x) {
  const PoolDims d = pool_dims(x.shape, "maxpool_spatial2");
  if (d.H % 2 != 0 || d.W % 2 != 0)
    throw ContractError("maxpool_spatial2: H and W must be even, got " +
                        x.shape.str());
  const std::int64_t Ho = d.H / 2, Wo = d.W / 2;
  Tensor out = Tensor::zeros(Shape{d.B, d.C, d.T, Ho, Wo});
  const double* px = x.ptr();
  double* po = out.ptr();
  const std::int64_t iplane = d.T * d.H * d.W;
  const std::int64_t oplane = d.T * Ho * Wo;
  auto arg =
      std::make_shared<std::vector<std::int64_t>>(std::size_t(out.numel()));
  for (std::int64_t bc = 0; bc < d.B * d.C; ++bc) {
    const double* xs = px + bc * iplane;
    for (std::int64_t t = 0; t < d.T; ++t)
      for (std::int64_t h = 0; h < Ho; ++h)
        for (std::int64_t w = 0; w < Wo; ++w) {
          double best = 0.0;
          std::int64_t bi = -1;
          for (std::int64_t dh = 0; dh < 2; ++dh)
            for (std::int64_t dw = 0; dw < 2; ++dw) {
              const std::int64_t at =
                  (t * d.H + 2 * h + dh) * d.W + 2 * w + dw;
              if (bi < 0 || xs[at] > best) {
                best = xs[at];
                bi = at;
              }
            }
          const std::int64_t oat = bc * oplane + (t * Ho + h) * Wo + w;
          po[oat] = best;
          (*arg)[std::size_t(oat)] = bc * iplane + bi;
        }
  }
  if (x.node < 0) return out;
  const int nx = x.node;
  const std::int64_t n = x.numel();
  out.node = tp.record([=](Tape& t, int self) {
    const Grad& g = t.node_grad(self);
    Grad& gx = t.grad_buffer(nx, n);
    for (std::size_t i = 0; i < arg->size(); ++i)
      gx[std::size_t((*arg)[i])] += g[i];
  });
  return out;
}

}  // namespace clash::ad
