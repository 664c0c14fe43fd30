#include "clash/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "clash/errors.hpp"

namespace clash::ad {

namespace {

std::vector<int> all_axes(const Shape& s) {
  std::vector<int> ax(std::size_t(s.rank()));
  std::iota(ax.begin(), ax.end(), 0);
  return ax;
}

}  // namespace

GradcheckResult run_gradcheck(const GradcheckSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  GradcheckResult res;
  res.name = spec.name;
  res.trials = spec.trials;

  const std::size_t ninputs = spec.shapes.size();
  for (int trial = 0; trial < spec.trials; ++trial) {
    std::vector<std::vector<double>> base(ninputs);
    for (std::size_t i = 0; i < ninputs; ++i)
      base[i].resize(std::size_t(spec.shapes[i].numel()));
    if (spec.sample) {
      spec.sample(rng, base);
    } else {
      for (auto& v : base)
        for (double& x : v) x = rng.uniform(-1.0, 1.0);
    }

    std::vector<std::vector<double>> dir(ninputs);
    double norm2 = 0.0;
    for (std::size_t i = 0; i < ninputs; ++i) {
      dir[i].resize(base[i].size());
      for (double& d : dir[i]) {
        d = rng.normal();
        norm2 += d * d;
      }
    }
    const double inv_norm = norm2 > 0.0 ? 1.0 / std::sqrt(norm2) : 0.0;
    for (auto& v : dir)
      for (double& d : v) d *= inv_norm;

    // The projection tensor needs the output shape, so probe once at base.
    Tensor rproj;
    {
      Tape probe;
      std::vector<Tensor> leaves;
      for (std::size_t i = 0; i < ninputs; ++i) {
        Tensor v = Tensor::zeros(spec.shapes[i]);
        std::copy(base[i].begin(), base[i].end(), v.ptr());
        leaves.push_back(probe.leaf(v));
      }
      const Tensor out = spec.build(probe, leaves);
      rproj = Tensor::zeros(out.shape);
      const double scale = 1.0 / std::sqrt(double(out.numel()));
      for (std::int64_t i = 0; i < out.numel(); ++i)
        rproj.ptr()[i] = rng.normal() * scale;
    }

    const auto eval = [&](double shift, bool want_grad,
                          std::vector<std::vector<double>>* grads) {
      Tape tape;
      std::vector<Tensor> leaves;
      for (std::size_t i = 0; i < ninputs; ++i) {
        Tensor v = Tensor::zeros(spec.shapes[i]);
        for (std::size_t j = 0; j < base[i].size(); ++j)
          v.ptr()[std::int64_t(j)] = base[i][j] + shift * dir[i][j];
        leaves.push_back(tape.leaf(v));
      }
      const Tensor out = spec.build(tape, leaves);
      const Tensor loss =
          reduce_sum(tape, mul(tape, out, rproj), all_axes(out.shape));
      const double val = loss.scalar();
      if (want_grad) {
        tape.backward(loss);
        grads->resize(ninputs);
        for (std::size_t i = 0; i < ninputs; ++i) {
          const auto& g = tape.grad(leaves[i]);
          (*grads)[i].assign(base[i].size(), 0.0);
          if (!g.empty()) (*grads)[i] = g;
        }
      }
      return val;
    };

    std::vector<std::vector<double>> grads;
    eval(0.0, true, &grads);
    double analytic = 0.0;
    for (std::size_t i = 0; i < ninputs; ++i)
      for (std::size_t j = 0; j < grads[i].size(); ++j)
        analytic += grads[i][j] * dir[i][j];

    const double fplus = eval(spec.eps, false, nullptr);
    const double fminus = eval(-spec.eps, false, nullptr);
    const double numeric = (fplus - fminus) / (2.0 * spec.eps);

    const double rel = std::abs(numeric - analytic) /
                       std::max({std::abs(numeric), std::abs(analytic), 1e-6});
    res.max_rel = std::max(res.max_rel, rel);
  }
  res.ok = res.max_rel < spec.tol;
  return res;
}

LeafSampler margin_sampler() {
  return [](Rng& rng, std::vector<std::vector<double>>& vals) {
    for (auto& v : vals) {
      const std::size_t n = v.size();
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      for (std::size_t i = n; i > 1; --i)
        std::swap(perm[i - 1], perm[std::size_t(rng.uniform_int(i))]);
      // Alternating signs, magnitudes 0.01 apart: every value sits >= 0.049
      // from zero and >= 0.008 from any other, far beyond the probe radius.
      for (std::size_t i = 0; i < n; ++i) {
        const double mag = 0.05 + 0.01 * double(perm[i] / 2);
        const double sign = (perm[i] % 2 != 0) ? 1.0 : -1.0;
        v[i] = sign * mag + rng.uniform(-1e-3, 1e-3);
      }
    }
  };
}

LeafSampler positive_sampler() {
  return [](Rng& rng, std::vector<std::vector<double>>& vals) {
    for (auto& v : vals)
      for (double& x : v) x = rng.uniform(0.5, 2.0);
  };
}

std::vector<GradcheckSpec> primitive_gradchecks() {
  std::vector<GradcheckSpec> specs;
  const auto push = [&specs](std::string name, std::vector<Shape> shapes,
                             GraphBuilder build, LeafSampler sample = {}) {
    GradcheckSpec s;
    s.name = std::move(name);
    s.shapes = std::move(shapes);
    s.build = std::move(build);
    s.sample = std::move(sample);
    specs.push_back(std::move(s));
  };
  using TV = std::vector<Tensor>;

  push("add", {Shape{{2, 3, 4}}, Shape{{2, 3, 4}}},
       [](Tape& t, const TV& in) { return add(t, in[0], in[1]); });
  push("add_broadcast", {Shape{{2, 3, 4}}, Shape{{3, 1}}},
       [](Tape& t, const TV& in) { return add(t, in[0], in[1]); });
  push("sub", {Shape{{3, 5}}, Shape{{3, 5}}},
       [](Tape& t, const TV& in) { return sub(t, in[0], in[1]); });
  push("sub_broadcast", {Shape{{2, 1, 4}}, Shape{{2, 3, 1}}},
       [](Tape& t, const TV& in) { return sub(t, in[0], in[1]); });
  push("mul", {Shape{{4, 6}}, Shape{{4, 6}}},
       [](Tape& t, const TV& in) { return mul(t, in[0], in[1]); });
  push("mul_broadcast", {Shape{{4}}, Shape{{2, 3, 4}}},
       [](Tape& t, const TV& in) { return mul(t, in[0], in[1]); });
  push("add_scalar", {Shape{{3, 5}}},
       [](Tape& t, const TV& in) { return add_scalar(t, in[0], 0.7); });
  push("mul_scalar", {Shape{{3, 5}}},
       [](Tape& t, const TV& in) { return mul_scalar(t, in[0], -1.3); });
  push(
      "leaky_relu", {Shape{{2, 3, 4, 2, 2}}},
      [](Tape& t, const TV& in) { return leaky_relu(t, in[0], 0.1); },
      margin_sampler());
  push(
      "relu", {Shape{{3, 9}}},
      [](Tape& t, const TV& in) { return relu(t, in[0]); }, margin_sampler());
  push("sigmoid", {Shape{{3, 7}}},
       [](Tape& t, const TV& in) { return sigmoid(t, in[0]); });
  push(
      "log", {Shape{{2, 6}}},
      [](Tape& t, const TV& in) { return log_op(t, in[0]); },
      positive_sampler());
  push(
      "sqrt", {Shape{{2, 6}}},
      [](Tape& t, const TV& in) { return sqrt_op(t, in[0]); },
      positive_sampler());
  push(
      "clamp_min", {Shape{{4, 5}}},
      [](Tape& t, const TV& in) { return clamp_min(t, in[0], 0.0); },
      margin_sampler());
  push(
      "reciprocal", {Shape{{5}}},
      [](Tape& t, const TV& in) { return reciprocal(t, in[0]); },
      positive_sampler());
  push(
      "pow", {Shape{{2, 3}}, Shape{{1}}},
      [](Tape& t, const TV& in) { return pow_ts(t, in[0], in[1]); },
      positive_sampler());
  push("softmax", {Shape{{2, 12}}},
       [](Tape& t, const TV& in) { return softmax(t, in[0], 1); });
  push("softmax_inner", {Shape{{3, 4, 5}}},
       [](Tape& t, const TV& in) { return softmax(t, in[0], 1); });
  push("log_softmax", {Shape{{4, 9}}},
       [](Tape& t, const TV& in) { return log_softmax(t, in[0], 1); });
  push("matmul", {Shape{{3, 4}}, Shape{{4, 5}}},
       [](Tape& t, const TV& in) { return matmul(t, in[0], in[1]); });
  push("matmul_ta", {Shape{{4, 3}}, Shape{{4, 5}}}, [](Tape& t, const TV& in) {
    return matmul(t, in[0], in[1], true, false);
  });
  push("matmul_tb", {Shape{{3, 4}}, Shape{{5, 4}}}, [](Tape& t, const TV& in) {
    return matmul(t, in[0], in[1], false, true);
  });
  push("matmul_batched", {Shape{{2, 3, 4}}, Shape{{2, 4, 5}}},
       [](Tape& t, const TV& in) { return matmul(t, in[0], in[1]); });
  push("matmul_batched_tb", {Shape{{2, 3, 4}}, Shape{{2, 5, 4}}},
       [](Tape& t, const TV& in) {
         return matmul(t, in[0], in[1], false, true);
       });
  push("conv3d", {Shape{{1, 2, 3, 4, 4}}, Shape{{2, 2, 3, 3, 3}}},
       [](Tape& t, const TV& in) { return conv3d(t, in[0], in[1]); });
  push("conv3d_grouped", {Shape{{1, 4, 3, 4, 4}}, Shape{{4, 1, 3, 3, 3}}},
       [](Tape& t, const TV& in) { return conv3d(t, in[0], in[1], 4); });
  push("conv3d_dilated", {Shape{{1, 2, 3, 4, 4}}, Shape{{2, 2, 3, 3, 3}}},
       [](Tape& t, const TV& in) { return conv3d(t, in[0], in[1], 1, 2); });
  push("conv3d_pointwise", {Shape{{2, 3, 2, 3, 3}}, Shape{{4, 3, 1, 1, 1}}},
       [](Tape& t, const TV& in) { return conv3d(t, in[0], in[1]); });
  // Padding exceeds the spatial extent here (kernel 5, dilation 2, W = 3).
  push("conv3d_widepad", {Shape{{1, 1, 3, 4, 3}}, Shape{{1, 1, 5, 5, 5}}},
       [](Tape& t, const TV& in) { return conv3d(t, in[0], in[1], 1, 2); });
  push("avgpool3d", {Shape{{2, 2, 3, 4, 4}}},
       [](Tape& t, const TV& in) { return avgpool3d(t, in[0]); });
  push(
      "maxpool3d", {Shape{{1, 2, 3, 4, 4}}},
      [](Tape& t, const TV& in) { return maxpool3d(t, in[0]); },
      margin_sampler());
  push(
      "maxpool_spatial2", {Shape{{1, 2, 3, 4, 4}}},
      [](Tape& t, const TV& in) { return maxpool_spatial2(t, in[0]); },
      margin_sampler());
  push("reduce_mean", {Shape{{2, 3, 4}}},
       [](Tape& t, const TV& in) { return reduce_mean(t, in[0], {2}); });
  push("reduce_sum", {Shape{{2, 3, 4}}},
       [](Tape& t, const TV& in) { return reduce_sum(t, in[0], {0, 2}); });
  push(
      "reduce_max", {Shape{{2, 5, 3}}},
      [](Tape& t, const TV& in) { return reduce_max(t, in[0], {1}); },
      margin_sampler());
  push(
      "reduce_max_all", {Shape{{3, 4}}},
      [](Tape& t, const TV& in) { return reduce_max(t, in[0], {0, 1}); },
      margin_sampler());
  push("reshape", {Shape{{2, 3, 4}}}, [](Tape& t, const TV& in) {
    return reshape(t, in[0], Shape{{4, 6}});
  });
  push("slice", {Shape{{2, 5, 3}}},
       [](Tape& t, const TV& in) { return slice(t, in[0], 1, 1, 3); });
  push("concat", {Shape{{2, 2, 3}}, Shape{{2, 1, 3}}, Shape{{2, 4, 3}}},
       [](Tape& t, const TV& in) {
         return concat(t, {in[0], in[1], in[2]}, 1);
       });
  return specs;
}

}  // namespace clash::ad
