#include "clash/ops.hpp"

#include <algorithm>
#include <cmath>

#include "clash/errors.hpp"
#include "clash/kernels.hpp"

namespace clash::ad {

namespace {

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw ContractError(std::string(op) + ": incompatible shapes " + a.str() +
                      " and " + b.str());
}

std::vector<std::int64_t> row_major_strides(const Shape& s) {
  std::vector<std::int64_t> st(s.d.size());
  std::int64_t acc = 1;
  for (int i = s.rank() - 1; i >= 0; --i) {
    st[std::size_t(i)] = acc;
    acc *= s[i];
  }
  return st;
}

// Right-aligned broadcast plan: strides are expressed in the output's rank,
// zero where an input dimension is 1 (or absent).
struct BcPlan {
  Shape out;
  std::vector<std::int64_t> sa, sb;
};

BcPlan plan_broadcast(const Shape& a, const Shape& b, const char* op) {
  const int rank = std::max(a.rank(), b.rank());
  BcPlan p;
  p.out.d.resize(std::size_t(rank));
  p.sa.assign(std::size_t(rank), 0);
  p.sb.assign(std::size_t(rank), 0);
  const auto sta = row_major_strides(a);
  const auto stb = row_major_strides(b);
  for (int i = rank - 1; i >= 0; --i) {
    const int ia = i - (rank - a.rank());
    const int ib = i - (rank - b.rank());
    const std::int64_t da = ia >= 0 ? a[ia] : 1;
    const std::int64_t db = ib >= 0 ? b[ib] : 1;
    if (da != db && da != 1 && db != 1) shape_fail(op, a, b);
    p.out.d[std::size_t(i)] = std::max(da, db);
    if (ia >= 0 && da != 1) p.sa[std::size_t(i)] = sta[std::size_t(ia)];
    if (ib >= 0 && db != 1) p.sb[std::size_t(i)] = stb[std::size_t(ib)];
  }
  return p;
}

// Odometer over the output space, tracking both input offsets.
template <typename F>
void bc_iterate(const Shape& out, const std::vector<std::int64_t>& sa,
                const std::vector<std::int64_t>& sb, F&& f) {
  const int rank = out.rank();
  const std::int64_t n = out.numel();
  if (n == 0) return;
  std::vector<std::int64_t> coord(std::size_t(rank), 0);
  std::int64_t ia = 0, ib = 0;
  for (std::int64_t o = 0;;) {
    f(o, ia, ib);
    if (++o == n) return;
    for (int ax = rank - 1;; --ax) {
      ia += sa[std::size_t(ax)];
      ib += sb[std::size_t(ax)];
      if (++coord[std::size_t(ax)] < out[ax]) break;
      ia -= sa[std::size_t(ax)] * out[ax];
      ib -= sb[std::size_t(ax)] * out[ax];
      coord[std::size_t(ax)] = 0;
    }
  }
}

using Grad = std::vector<double>;

// One operand is a single value broadcast over the whole output; the
// odometer would walk every element just to re-read that value, so this
// path stays on flat kernels instead.
Tensor bc_scalar(Tape& tp, const Tensor& a, const Tensor& b, int kind,
                 Shape out_shape) {
  const bool a1 = a.numel() == 1;
  Tensor out = Tensor::zeros(std::move(out_shape));
  const double s = (a1 ? a : b).ptr()[0];
  const Tensor& vec = a1 ? b : a;
  const std::int64_t n = out.numel();
  double* po = out.ptr();
  const double* pv = vec.ptr();
  if (kind == 2) {
    kern::active().scale(s, pv, po, std::size_t(n));
  } else {
    const double vsign = (kind == 1 && a1) ? -1.0 : 1.0;
    const double ssign = (kind == 1 && !a1) ? -1.0 : 1.0;
    for (std::int64_t i = 0; i < n; ++i) po[i] = vsign * pv[i] + ssign * s;
  }
  if (a.node < 0 && b.node < 0) return out;

  const int ns = a1 ? a.node : b.node;
  const int nv = a1 ? b.node : a.node;
  auto vdata = vec.data;
  const std::int64_t numv = vec.numel();
  out.node = tp.record([=](Tape& t, int self) {
    const Grad& g = t.node_grad(self);
    if (nv >= 0) {
      Grad& gv = t.grad_buffer(nv, numv);
      const double c = kind == 2 ? s : (kind == 1 && a1) ? -1.0 : 1.0;
      kern::active().axpy(c, g.data(), gv.data(), g.size());
    }
    if (ns >= 0) {
      Grad& gs = t.grad_buffer(ns, 1);
      const double* pvd = vdata->data();
      double acc = 0.0;
      if (kind == 2)
        for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * pvd[i];
      else
        for (std::size_t i = 0; i < g.size(); ++i) acc += g[i];
      gs[0] += (kind == 1 && !a1) ? -acc : acc;
    }
  });
  return out;
}

// Shared implementation for broadcast add/sub/mul. `kind`: 0 add, 1 sub,
// 2 mul.
Tensor bc_binary(Tape& tp, const Tensor& a, const Tensor& b, int kind,
                 const char* name) {
  BcPlan p = plan_broadcast(a.shape, b.shape, name);
  const bool same = a.shape == b.shape;
  if (!same && (a.numel() == 1 || b.numel() == 1))
    return bc_scalar(tp, a, b, kind, std::move(p.out));
  Tensor out = Tensor::zeros(p.out);
  const kern::Kernels& k = kern::active();
  if (same) {
    if (kind == 0) k.add(a.ptr(), b.ptr(), out.ptr(), std::size_t(out.numel()));
    if (kind == 1) k.sub(a.ptr(), b.ptr(), out.ptr(), std::size_t(out.numel()));
    if (kind == 2) k.mul(a.ptr(), b.ptr(), out.ptr(), std::size_t(out.numel()));
  } else {
    const double* pa = a.ptr();
    const double* pb = b.ptr();
    double* po = out.ptr();
    bc_iterate(p.out, p.sa, p.sb, [&](std::int64_t o, std::int64_t ia,
                                      std::int64_t ib) {
      po[o] = kind == 0   ? pa[ia] + pb[ib]
              : kind == 1 ? pa[ia] - pb[ib]
                          : pa[ia] * pb[ib];
    });
  }
  if (a.node < 0 && b.node < 0) return out;

  const int na = a.node, nb = b.node;
  const std::int64_t numa = a.numel(), numb = b.numel();
  auto adata = a.data, bdata = b.data;
  out.node = tp.record([=](Tape& t, int self) {
    const Grad& g = t.node_grad(self);
    if (same && kind != 2) {
      if (na >= 0) {
        Grad& ga = t.grad_buffer(na, numa);
        kern::active().axpy(1.0, g.data(), ga.data(), g.size());
      }
      if (nb >= 0) {
        Grad& gb = t.grad_buffer(nb, numb);
        kern::active().axpy(kind == 1 ? -1.0 : 1.0, g.data(), gb.data(),
                            g.size());
      }
      return;
    }
    Grad* ga = na >= 0 ? &t.grad_buffer(na, numa) : nullptr;
    Grad* gb = nb >= 0 ? &t.grad_buffer(nb, numb) : nullptr;
    const double* pa = adata->data();
    const double* pb = bdata->data();
    bc_iterate(p.out, p.sa, p.sb, [&](std::int64_t o, std::int64_t ia,
                                      std::int64_t ib) {
      if (kind == 2) {
        if (ga) (*ga)[std::size_t(ia)] += g[std::size_t(o)] * pb[ib];
        if (gb) (*gb)[std::size_t(ib)] += g[std::size_t(o)] * pa[ia];
      } else {
        if (ga) (*ga)[std::size_t(ia)] += g[std::size_t(o)];
        if (gb)
          (*gb)[std::size_t(ib)] +=
              kind == 1 ? -g[std::size_t(o)] : g[std::size_t(o)];
      }
    });
  });
  return out;
}

// Common recording for unary maps: dx += g * dydx.
Tensor unary(Tape& tp, const Tensor& x, Tensor out,
             std::shared_ptr<std::vector<double>> dydx) {
  if (x.node < 0) return out;
  const int nx = x.node;
  const std::int64_t n = x.numel();
  out.node = tp.record([=](Tape& t, int self) {
    const Grad& g = t.node_grad(self);
    Grad& gx = t.grad_buffer(nx, n);
    const double* d = dydx->data();
    for (std::int64_t i = 0; i < n; ++i)
      gx[std::size_t(i)] += g[std::size_t(i)] * d[i];
  });
  return out;
}

struct AxisSplit {
  std::int64_t outer, n, inner;
};

AxisSplit split_axis(const Shape& s, int axis, const char* op) {
  if (axis < 0 || axis >= s.rank())
    throw ContractError(std::string(op) + ": axis " + std::to_string(axis) +
                        " out of range for " + s.str());
  AxisSplit f{1, s[axis], 1};
  for (int i = 0; i < axis; ++i) f.outer *= s[i];
  for (int i = axis + 1; i < s.rank(); ++i) f.inner *= s[i];
  return f;
}

}  // namespace

Tensor add(Tape& tp, const Tensor& a, const Tensor& b) {
  return bc_binary(tp, a, b, 0, "add");
}
Tensor sub(Tape& tp, const Tensor& a, const Tensor& b) {
  return bc_binary(tp, a, b, 1, "sub");
}
Tensor mul(Tape& tp, const Tensor& a, const Tensor& b) {
  return bc_binary(tp, a, b, 2, "mul");
}

Tensor add_scalar(Tape& tp, const Tensor& a, double c) {
  Tensor out = Tensor::zeros(a.shape);
  const double* pa = a.ptr();
  double* po = out.ptr();
  for (std::int64_t i = 0; i < a.numel(); ++i) po[i] = pa[i] + c;
  if (a.node < 0) return out;
  const int na = a.node;
  const std::int64_t n = a.numel();
  out.node = tp.record([=](Tape& t, int self) {
    const Grad& g = t.node_grad(self);
    Grad& ga = t.grad_buffer(na, n);
    kern::active().axpy(1.0, g.data(), ga.data(), g.size());
  });
  return out;
}

Tensor mul_scalar(Tape& tp, const Tensor& a, double c) {
  Tensor out = Tensor::zeros(a.shape);
  kern::active().scale(c, a.ptr(), out.ptr(), std::size_t(a.numel()));
  if (a.node < 0) return out;
  const int na = a.node;
  const std::int64_t n = a.numel();
  out.node = tp.record([=](Tape& t, int self) {
    const Grad& g = t.node_grad(self);
    Grad& ga = t.grad_buffer(na, n);
    kern::active().axpy(c, g.data(), ga.data(), g.size());
  });
  return out;
}

Tensor leaky_relu(Tape& tp, const Tensor& x, double slope) {
  Tensor out = Tensor::zeros(x.shape);
  kern::active().leaky_relu(slope, x.ptr(), out.ptr(), std::size_t(x.numel()));
  if (x.node < 0) return out;
  const int nx = x.node;
  const std::int64_t n = x.numel();
  auto xdata = x.data;
  out.node = tp.record([=](Tape& t, int self) {
    const Grad& g = t.node_grad(self);
    Grad& gx = t.grad_buffer(nx, n);
    kern::active().leaky_relu_bwd(slope, xdata->data(), g.data(), gx.data(),
                                  g.size());
  });
  return out;
}

Tensor sigmoid(Tape& tp, const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape);
  const double* px = x.ptr();
  double* po = out.ptr();
  for (std::int64_t i = 0; i < x.numel(); ++i)
    po[i] = 1.0 / (1.0 + std::exp(-px[i]));
  auto dydx = std::make_shared<std::vector<double>>(std::size_t(x.numel()));
  for (std::int64_t i = 0; i < x.numel(); ++i)
    (*dydx)[std::size_t(i)] = po[i] * (1.0 - po[i]);
  return unary(tp, x, std::move(out), std::move(dydx));
}

Tensor log_op(Tape& tp, const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape);
  const double* px = x.ptr();
  double* po = out.ptr();
  auto dydx = std::make_shared<std::vector<double>>(std::size_t(x.numel()));
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    if (!(px[i] > 0.0)) throw NumericError("log: non-positive input");
    po[i] = std::log(px[i]);
    (*dydx)[std::size_t(i)] = 1.0 / px[i];
  }
  return unary(tp, x, std::move(out), std::move(dydx));
}

Tensor sqrt_op(Tape& tp, const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape);
  const double* px = x.ptr();
  double* po = out.ptr();
  auto dydx = std::make_shared<std::vector<double>>(std::size_t(x.numel()));
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    if (!(px[i] >= 0.0)) throw NumericError("sqrt: negative input");
    po[i] = std::sqrt(px[i]);
    (*dydx)[std::size_t(i)] = 0.5 / po[i];
  }
  return unary(tp, x, std::move(out), std::move(dydx));
}

Tensor clamp_min(Tape& tp, const Tensor& x, double floor) {
  Tensor out = Tensor::zeros(x.shape);
  const double* px = x.ptr();
  double* po = out.ptr();
  auto dydx = std::make_shared<std::vector<double>>(std::size_t(x.numel()));
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    po[i] = px[i] > floor ? px[i] : floor;
    (*dydx)[std::size_t(i)] = px[i] > floor ? 1.0 : 0.0;
  }
  return unary(tp, x, std::move(out), std::move(dydx));
}

Tensor reciprocal(Tape& tp, const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape);
  const double* px = x.ptr();
  double* po = out.ptr();
  auto dydx = std::make_shared<std::vector<double>>(std::size_t(x.numel()));
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    if (px[i] == 0.0) throw NumericError("reciprocal: zero input");
    po[i] = 1.0 / px[i];
    (*dydx)[std::size_t(i)] = -po[i] * po[i];
  }
  return unary(tp, x, std::move(out), std::move(dydx));
}

Tensor pow_ts(Tape& tp, const Tensor& x, const Tensor& k) {
  if (k.numel() != 1)
    throw ContractError("pow: exponent must be scalar, got " + k.shape.str());
  const double kv = (*k.data)[0];
  Tensor out = Tensor::zeros(x.shape);
  const double* px = x.ptr();
  double* po = out.ptr();
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    if (!(px[i] > 0.0))
      throw NumericError("pow: non-positive base (clamp first)");
    po[i] = std::pow(px[i], kv);
  }
  if (x.node < 0 && k.node < 0) return out;
  const int nx = x.node, nk = k.node;
  const std::int64_t n = x.numel();
  auto xdata = x.data, odata = out.data;
  out.node = tp.record([=](Tape& t, int self) {
    const Grad& g = t.node_grad(self);
    const double* xp = xdata->data();
    const double* op = odata->data();
    if (nx >= 0) {
      Grad& gx = t.grad_buffer(nx, n);
      for (std::int64_t i = 0; i < n; ++i)
        gx[std::size_t(i)] += g[std::size_t(i)] * kv * op[i] / xp[i];
    }
    if (nk >= 0) {
      Grad& gk = t.grad_buffer(nk, 1);
      double acc = 0.0;
      for (std::int64_t i = 0; i < n; ++i)
        acc += g[std::size_t(i)] * op[i] * std::log(xp[i]);
      gk[0] += acc;
    }
  });
  return out;
}

Tensor softmax(Tape& tp, const Tensor& x, int axis) {
  const AxisSplit f = split_axis(x.shape, axis, "softmax");
  Tensor out = Tensor::zeros(x.shape);
  const double* px = x.ptr();
  double* po = out.ptr();
  for (std::int64_t o = 0; o < f.outer; ++o) {
    for (std::int64_t i = 0; i < f.inner; ++i) {
      const std::int64_t base = (o * f.n) * f.inner + i;
      double mx = px[base];
      for (std::int64_t j = 1; j < f.n; ++j)
        mx = std::max(mx, px[base + j * f.inner]);
      double sum = 0.0;
      for (std::int64_t j = 0; j < f.n; ++j) {
        const double e = std::exp(px[base + j * f.inner] - mx);
        po[base + j * f.inner] = e;
        sum += e;
      }
      for (std::int64_t j = 0; j < f.n; ++j) po[base + j * f.inner] /= sum;
    }
  }
  if (x.node < 0) return out;
  const int nx = x.node;
  const std::int64_t n = x.numel();
  auto odata = out.data;
  out.node = tp.record([=](Tape& t, int self) {
    const Grad& g = t.node_grad(self);
    Grad& gx = t.grad_buffer(nx, n);
    const double* y = odata->data();
    for (std::int64_t o = 0; o < f.outer; ++o) {
      for (std::int64_t i = 0; i < f.inner; ++i) {
        const std::int64_t base = (o * f.n) * f.inner + i;
        double dot = 0.0;
        for (std::int64_t j = 0; j < f.n; ++j) {
          const std::int64_t at = base + j * f.inner;
          dot += g[std::size_t(at)] * y[at];
        }
        for (std::int64_t j = 0; j < f.n; ++j) {
          const std::int64_t at = base + j * f.inner;
          gx[std::size_t(at)] += y[at] * (g[std::size_t(at)] - dot);
        }
      }
    }
  });
  return out;
}

Tensor log_softmax(Tape& tp, const Tensor& x, int axis) {
  const AxisSplit f = split_axis(x.shape, axis, "log_softmax");
  Tensor out = Tensor::zeros(x.shape);
  const double* px = x.ptr();
  double* po = out.ptr();
  for (std::int64_t o = 0; o < f.outer; ++o) {
    for (std::int64_t i = 0; i < f.inner; ++i) {
      const std::int64_t base = (o * f.n) * f.inner + i;
      double mx = px[base];
      for (std::int64_t j = 1; j < f.n; ++j)
        mx = std::max(mx, px[base + j * f.inner]);
      double sum = 0.0;
      for (std::int64_t j = 0; j < f.n; ++j)
        sum += std::exp(px[base + j * f.inner] - mx);
      const double lse = mx + std::log(sum);
      for (std::int64_t j = 0; j < f.n; ++j)
        po[base + j * f.inner] = px[base + j * f.inner] - lse;
    }
  }
  if (x.node < 0) return out;
  const int nx = x.node;
  const std::int64_t n = x.numel();
  auto odata = out.data;
  out.node = tp.record([=](Tape& t, int self) {
    const Grad& g = t.node_grad(self);
    Grad& gx = t.grad_buffer(nx, n);
    const double* y = odata->data();
    for (std::int64_t o = 0; o < f.outer; ++o) {
      for (std::int64_t i = 0; i < f.inner; ++i) {
        const std::int64_t base = (o * f.n) * f.inner + i;
        double gsum = 0.0;
        for (std::int64_t j = 0; j < f.n; ++j)
          gsum += g[std::size_t(base + j * f.inner)];
        for (std::int64_t j = 0; j < f.n; ++j) {
          const std::int64_t at = base + j * f.inner;
          gx[std::size_t(at)] += g[std::size_t(at)] - std::exp(y[at]) * gsum;
        }
      }
    }
  });
  return out;
}

namespace {

struct MatDims {
  std::int64_t batch, M, K, N;
};

MatDims matmul_dims(const Shape& a, const Shape& b, bool ta, bool tb) {
  if (ta && tb) throw ContractError("matmul: ta and tb are mutually exclusive");
  if (a.rank() != b.rank() || (a.rank() != 2 && a.rank() != 3))
    shape_fail("matmul", a, b);
  MatDims d{};
  const int off = a.rank() == 3 ? 1 : 0;
  d.batch = off ? a[0] : 1;
  if (off && b[0] != d.batch) shape_fail("matmul", a, b);
  const std::int64_t a0 = a[off], a1 = a[off + 1];
  const std::int64_t b0 = b[off], b1 = b[off + 1];
  d.M = ta ? a1 : a0;
  d.K = ta ? a0 : a1;
  const std::int64_t bk = tb ? b1 : b0;
  d.N = tb ? b0 : b1;
  if (bk != d.K) shape_fail("matmul", a, b);
  return d;
}

// One batch slab of each of the three layouts; k-ascending accumulation per
// output row keeps results deterministic.
void mm_forward(const double* A, const double* B, double* O, const MatDims& d,
                bool ta, bool tb) {
  const kern::Kernels& k = kern::active();
  if (tb) {
    for (std::int64_t m = 0; m < d.M; ++m)
      for (std::int64_t n = 0; n < d.N; ++n)
        O[m * d.N + n] = k.dot(A + m * d.K, B + n * d.K, std::size_t(d.K));
    return;
  }
  if (ta) {
    for (std::int64_t kk = 0; kk < d.K; ++kk)
      for (std::int64_t m = 0; m < d.M; ++m)
        k.axpy(A[kk * d.M + m], B + kk * d.N, O + m * d.N, std::size_t(d.N));
    return;
  }
  for (std::int64_t kk = 0; kk < d.K; ++kk)
    for (std::int64_t m = 0; m < d.M; ++m)
      k.axpy(A[m * d.K + kk], B + kk * d.N, O + m * d.N, std::size_t(d.N));
}

}  // namespace

Tensor matmul(Tape& tp, const Tensor& a, const Tensor& b, bool ta, bool tb) {
  const MatDims d = matmul_dims(a.shape, b.shape, ta, tb);
  Shape os =
      a.shape.rank() == 3 ? Shape{{d.batch, d.M, d.N}} : Shape{{d.M, d.N}};
  Tensor out = Tensor::zeros(os);
  for (std::int64_t g = 0; g < d.batch; ++g)
    mm_forward(a.ptr() + g * d.M * d.K, b.ptr() + g * d.K * d.N,
               out.ptr() + g * d.M * d.N, d, ta, tb);
  if (a.node < 0 && b.node < 0) return out;

  const int na = a.node, nb = b.node;
  const std::int64_t numa = a.numel(), numb = b.numel();
  auto adata = a.data, bdata = b.data;
  out.node = tp.record([=](Tape& t, int self) {
    const Grad& g = t.node_grad(self);
    const kern::Kernels& k = kern::active();
    Grad* ga = na >= 0 ? &t.grad_buffer(na, numa) : nullptr;
    Grad* gb = nb >= 0 ? &t.grad_buffer(nb, numb) : nullptr;
    for (std::int64_t bt = 0; bt < d.batch; ++bt) {
      const double* A = adata->data() + bt * d.M * d.K;
      const double* B = bdata->data() + bt * d.K * d.N;
      const double* G = g.data() + bt * d.M * d.N;
      double* GA = ga ? ga->data() + bt * d.M * d.K : nullptr;
      double* GB = gb ? gb->data() + bt * d.K * d.N : nullptr;
      if (!ta && !tb) {
        if (GA)  // dA = G @ B^T
          for (std::int64_t m = 0; m < d.M; ++m)
            for (std::int64_t kk = 0; kk < d.K; ++kk)
              GA[m * d.K + kk] +=
                  k.dot(G + m * d.N, B + kk * d.N, std::size_t(d.N));
        if (GB)  // dB = A^T @ G
          for (std::int64_t m = 0; m < d.M; ++m)
            for (std::int64_t kk = 0; kk < d.K; ++kk)
              k.axpy(A[m * d.K + kk], G + m * d.N, GB + kk * d.N,
                     std::size_t(d.N));
      } else if (ta) {  // A is (K,M)
        if (GA)         // dA[k,m] = dot(B row k, G row m)
          for (std::int64_t kk = 0; kk < d.K; ++kk)
            for (std::int64_t m = 0; m < d.M; ++m)
              GA[kk * d.M + m] +=
                  k.dot(B + kk * d.N, G + m * d.N, std::size_t(d.N));
        if (GB)  // dB = A @ G
          for (std::int64_t kk = 0; kk < d.K; ++kk)
            for (std::int64_t m = 0; m < d.M; ++m)
              k.axpy(A[kk * d.M + m], G + m * d.N, GB + kk * d.N,
                     std::size_t(d.N));
      } else {   // tb: B is (N,K)
        if (GA)  // dA = G @ B
          for (std::int64_t n = 0; n < d.N; ++n)
            for (std::int64_t m = 0; m < d.M; ++m)
              k.axpy(G[m * d.N + n], B + n * d.K, GA + m * d.K,
                     std::size_t(d.K));
        if (GB)  // dB = G^T @ A
          for (std::int64_t m = 0; m < d.M; ++m)
            for (std::int64_t n = 0; n < d.N; ++n)
              k.axpy(G[m * d.N + n], A + m * d.K, GB + n * d.K,
                     std::size_t(d.K));
      }
    }
  });
  return out;
}

namespace {

struct ReducePlan {
  Shape out;
  std::vector<std::int64_t> ostride;  // per input axis; 0 on reduced axes
  std::int64_t count = 1;             // elements folded into each output
};

ReducePlan plan_reduce(const Shape& s, const std::vector<int>& axes,
                       const char* op) {
  ReducePlan p;
  p.out = s;
  std::vector<bool> red(std::size_t(s.rank()), false);
  for (int a : axes) {
    if (a < 0 || a >= s.rank())
      throw ContractError(std::string(op) + ": axis " + std::to_string(a) +
                          " out of range for " + s.str());
    if (!red[std::size_t(a)]) p.count *= s[a];
    red[std::size_t(a)] = true;
    p.out.d[std::size_t(a)] = 1;
  }
  const auto ost = row_major_strides(p.out);
  p.ostride.assign(std::size_t(s.rank()), 0);
  for (int i = 0; i < s.rank(); ++i)
    if (!red[std::size_t(i)]) p.ostride[std::size_t(i)] = ost[std::size_t(i)];
  return p;
}

// Walks the input linearly (ascending), handing out the matching output
// offset. Ascending input order is the tie-break rule for reduce_max.
template <typename F>
void reduce_iterate(const Shape& in, const std::vector<std::int64_t>& ostride,
                    F&& f) {
  const int rank = in.rank();
  const std::int64_t n = in.numel();
  if (n == 0) return;
  std::vector<std::int64_t> coord(std::size_t(rank), 0);
  std::int64_t oi = 0;
  for (std::int64_t i = 0;;) {
    f(i, oi);
    if (++i == n) return;
    for (int ax = rank - 1;; --ax) {
      oi += ostride[std::size_t(ax)];
      if (++coord[std::size_t(ax)] < in[ax]) break;
      oi -= ostride[std::size_t(ax)] * in[ax];
      coord[std::size_t(ax)] = 0;
    }
  }
}

Tensor reduce_linear(Tape& tp, const Tensor& x, const std::vector<int>& axes,
                     bool mean, const char* name) {
  const ReducePlan p = plan_reduce(x.shape, axes, name);
  Tensor out = Tensor::zeros(p.out);
  const double* px = x.ptr();
  double* po = out.ptr();
  reduce_iterate(x.shape, p.ostride,
                 [&](std::int64_t i, std::int64_t o) { po[o] += px[i]; });
  const double w = mean ? 1.0 / double(p.count) : 1.0;
  if (mean)
    for (std::int64_t o = 0; o < out.numel(); ++o) po[o] *= w;
  if (x.node < 0) return out;
  const int nx = x.node;
  const std::int64_t n = x.numel();
  const Shape xs = x.shape;
  out.node = tp.record([=](Tape& t, int self) {
    const Grad& g = t.node_grad(self);
    Grad& gx = t.grad_buffer(nx, n);
    reduce_iterate(xs, p.ostride, [&](std::int64_t i, std::int64_t o) {
      gx[std::size_t(i)] += g[std::size_t(o)] * w;
    });
  });
  return out;
}

}  // namespace

Tensor reduce_mean(Tape& tp, const Tensor& x, const std::vector<int>& axes) {
  return reduce_linear(tp, x, axes, true, "reduce_mean");
}

Tensor reduce_sum(Tape& tp, const Tensor& x, const std::vector<int>& axes) {
  return reduce_linear(tp, x, axes, false, "reduce_sum");
}

Tensor reduce_max(Tape& tp, const Tensor& x, const std::vector<int>& axes) {
  const ReducePlan p = plan_reduce(x.shape, axes, "reduce_max");
  Tensor out = Tensor::zeros(p.out);
  auto arg = std::make_shared<std::vector<std::int64_t>>(
      std::size_t(p.out.numel()), -1);
  const double* px = x.ptr();
  double* po = out.ptr();
  reduce_iterate(x.shape, p.ostride, [&](std::int64_t i, std::int64_t o) {
    auto& a = (*arg)[std::size_t(o)];
    if (a < 0 || px[i] > po[o]) {
      po[o] = px[i];
      a = i;
    }
  });
  if (x.node < 0) return out;
  const int nx = x.node;
  const std::int64_t n = x.numel();
  out.node = tp.record([=](Tape& t, int self) {
    const Grad& g = t.node_grad(self);
    Grad& gx = t.grad_buffer(nx, n);
    for (std::size_t o = 0; o < arg->size(); ++o)
      gx[std::size_t((*arg)[o])] += g[o];
  });
  return out;
}

Tensor reshape(Tape& tp, const Tensor& x, Shape s) {
  if (s.numel() != x.numel())
    throw ContractError("reshape: " + x.shape.str() + " to " + s.str());
  Tensor out;
  out.shape = std::move(s);
  out.data = std::make_shared<std::vector<double>>(*x.data);
  if (x.node < 0) return out;
  const int nx = x.node;
  const std::int64_t n = x.numel();
  out.node = tp.record([=](Tape& t, int self) {
    const Grad& g = t.node_grad(self);
    Grad& gx = t.grad_buffer(nx, n);
    kern::active().axpy(1.0, g.data(), gx.data(), g.size());
  });
  return out;
}

Tensor slice(Tape& tp, const Tensor& x, int axis, std::int64_t start,
             std::int64_t len) {
  const AxisSplit f = split_axis(x.shape, axis, "slice");
  if (start < 0 || len < 1 || start + len > f.n)
    throw ContractError("slice: range [" + std::to_string(start) + "," +
                        std::to_string(start + len) + ") exceeds axis of " +
                        x.shape.str());
  Shape os = x.shape;
  os.d[std::size_t(axis)] = len;
  Tensor out = Tensor::zeros(os);
  const double* px = x.ptr();
  double* po = out.ptr();
  for (std::int64_t o = 0; o < f.outer; ++o)
    std::copy_n(px + (o * f.n + start) * f.inner, len * f.inner,
                po + o * len * f.inner);
  if (x.node < 0) return out;
  const int nx = x.node;
  const std::int64_t n = x.numel();
  out.node = tp.record([=](Tape& t, int self) {
    const Grad& g = t.node_grad(self);
    Grad& gx = t.grad_buffer(nx, n);
    for (std::int64_t o = 0; o < f.outer; ++o) {
      const double* gsrc = g.data() + o * len * f.inner;
      double* gdst = gx.data() + (o * f.n + start) * f.inner;
      kern::active().axpy(1.0, gsrc, gdst, std::size_t(len * f.inner));
    }
  });
  return out;
}

Tensor concat(Tape& tp, const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  Shape os = parts[0].shape;
  if (axis < 0 || axis >= os.rank())
    throw ContractError("concat: axis out of range");
  std::int64_t total = 0;
  for (const auto& p : parts) {
    Shape probe = p.shape;
    if (probe.rank() != os.rank()) shape_fail("concat", os, p.shape);
    probe.d[std::size_t(axis)] = os.d[std::size_t(axis)];
    if (!(probe == os)) shape_fail("concat", os, p.shape);
    total += p.shape[axis];
  }
  os.d[std::size_t(axis)] = total;
  Tensor out = Tensor::zeros(os);
  const AxisSplit f = split_axis(os, axis, "concat");

  std::int64_t at = 0;
  for (const auto& p : parts) {
    const std::int64_t len = p.shape[axis];
    const double* src = p.ptr();
    for (std::int64_t o = 0; o < f.outer; ++o)
      std::copy_n(src + o * len * f.inner, len * f.inner,
                  out.ptr() + (o * total + at) * f.inner);
    at += len;
  }

  bool any = false;
  for (const auto& p : parts) any |= p.node >= 0;
  if (!any) return out;

  struct Piece {
    int node;
    std::int64_t len, numel;
  };
  std::vector<Piece> pieces;
  for (const auto& p : parts)
    pieces.push_back({p.node, p.shape[axis], p.numel()});
  out.node = tp.record([=](Tape& t, int self) {
    const Grad& g = t.node_grad(self);
    std::int64_t off = 0;
    for (const Piece& p : pieces) {
      if (p.node >= 0) {
        Grad& gp = t.grad_buffer(p.node, p.numel);
        for (std::int64_t o = 0; o < f.outer; ++o)
          kern::active().axpy(1.0, g.data() + (o * total + off) * f.inner,
                              gp.data() + o * p.len * f.inner,
                              std::size_t(p.len * f.inner));
      }
      off += p.len;
    }
  });
  return out;
}

}  // namespace clash::ad
