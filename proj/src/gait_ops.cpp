#include "clash/gait_ops.hpp"

#include <cmath>

#include "clash/errors.hpp"

namespace clash::net {

using ad::Shape;
using ad::Tape;
using ad::Tensor;

namespace {

constexpr const char* kOpNames[kNumOps] = {
    "DepthwiseSepConv3", "DepthwiseSepConv5", "AtrousConv3Rate2",
    "AtrousConv5Rate2",  "AvgPool3",          "MaxPool3",
    "SkipConnect",       "Zero",              "ChannelAttention",
    "SpatialAttention",  "TemporalAttention", "SelfAttention",
};

double he_std(std::int64_t fan_in) { return std::sqrt(2.0 / double(fan_in)); }

std::int64_t reduced(std::int64_t n) { return std::max<std::int64_t>(1, n / 4); }

// Depthwise conv weights (C,1,k,k,k) + pointwise (C,C,1,1,1) + bias.
void separable_specs(std::vector<OpTensorSpec>& out, std::int64_t c,
                     std::int64_t k) {
  out.push_back({"dw", Shape{{c, 1, k, k, k}}, he_std(k * k * k)});
  out.push_back({"pw", Shape{{c, c, 1, 1, 1}}, he_std(c)});
  out.push_back({"bias", Shape{{1, c, 1, 1, 1}}, 0.0});
}

Tensor separable_conv(Tape& tp, const Tensor& x, const OpParams& op,
                      std::int64_t c, int dilation) {
  // Pre-activation, then depthwise spatial-temporal filter, then pointwise
  // channel mix. The atrous variants reuse this with dilation 2.
  Tensor h = ad::leaky_relu(tp, x, 0.1);
  h = ad::conv3d(tp, h, op.w[0], int(c), dilation);
  h = ad::conv3d(tp, h, op.w[1]);
  return ad::add(tp, h, op.w[2]);
}

}  // namespace

const char* op_name(OpKind kind) { return kOpNames[int(kind)]; }

OpKind op_from_name(const std::string& name) {
  for (int i = 0; i < kNumOps; ++i)
    if (name == kOpNames[i]) return OpKind(i);
  throw ContractError("unknown operation name '" + name + "'");
}

std::vector<OpTensorSpec> op_param_specs(OpKind kind, const OpContext& ctx) {
  const std::int64_t c = ctx.channels;
  const std::int64_t t = ctx.frames;
  const std::int64_t cr = reduced(c);
  const std::int64_t tr = reduced(t);
  std::vector<OpTensorSpec> out;
  switch (kind) {
    case OpKind::DepthwiseSepConv3:
      separable_specs(out, c, 3);
      break;
    case OpKind::DepthwiseSepConv5:
      separable_specs(out, c, 5);
      break;
    case OpKind::AtrousConv3Rate2:
      separable_specs(out, c, 3);
      break;
    case OpKind::AtrousConv5Rate2:
      separable_specs(out, c, 5);
      break;
    case OpKind::AvgPool3:
    case OpKind::MaxPool3:
    case OpKind::SkipConnect:
    case OpKind::Zero:
      break;
    case OpKind::ChannelAttention:
      out.push_back({"w1", Shape{{cr, c, 1, 1, 1}}, he_std(c)});
      out.push_back({"b1", Shape{{1, cr, 1, 1, 1}}, 0.0});
      out.push_back({"w2", Shape{{c, cr, 1, 1, 1}}, he_std(cr)});
      out.push_back({"b2", Shape{{1, c, 1, 1, 1}}, 0.0});
      break;
    case OpKind::SpatialAttention:
      out.push_back({"w", Shape{{1, 2, 1, 7, 7}}, he_std(2 * 7 * 7)});
      out.push_back({"b", Shape{{1, 1, 1, 1, 1}}, 0.0});
      break;
    case OpKind::TemporalAttention:
      out.push_back({"w1", Shape{{t, tr}}, he_std(t)});
      out.push_back({"b1", Shape{{1, tr}}, 0.0});
      out.push_back({"w2", Shape{{tr, t}}, he_std(tr)});
      out.push_back({"b2", Shape{{1, t}}, 0.0});
      break;
    case OpKind::SelfAttention:
      out.push_back({"wq", Shape{{cr, c, 1, 1, 1}}, he_std(c)});
      out.push_back({"wk", Shape{{cr, c, 1, 1, 1}}, he_std(c)});
      out.push_back({"wv", Shape{{cr, c, 1, 1, 1}}, he_std(c)});
      out.push_back({"wo", Shape{{c, cr, 1, 1, 1}}, he_std(cr)});
      break;
  }
  return out;
}

void register_op_params(ad::ParamStore& store, const std::string& prefix,
                        OpKind kind, const OpContext& ctx, Rng& rng) {
  for (const auto& spec : op_param_specs(kind, ctx)) {
    Tensor t = Tensor::zeros(spec.shape);
    if (spec.init_std > 0.0)
      for (std::int64_t i = 0; i < t.numel(); ++i)
        t.ptr()[i] = spec.init_std * rng.normal();
    store.add(prefix + "." + spec.name, std::move(t));
  }
}

Tensor apply_op(Tape& tp, const Tensor& x, const OpParams& op) {
  if (x.shape.rank() != 5)
    throw ContractError("apply_op: expected rank-5 input, got " +
                        x.shape.str());
  const std::int64_t b = x.shape[0], c = x.shape[1], t = x.shape[2],
                     h = x.shape[3], w = x.shape[4];
  switch (op.kind) {
    case OpKind::DepthwiseSepConv3:
      return separable_conv(tp, x, op, c, 1);
    case OpKind::DepthwiseSepConv5:
      return separable_conv(tp, x, op, c, 1);
    case OpKind::AtrousConv3Rate2:
      return separable_conv(tp, x, op, c, 2);
    case OpKind::AtrousConv5Rate2:
      return separable_conv(tp, x, op, c, 2);
    case OpKind::AvgPool3:
      return ad::avgpool3d(tp, x);
    case OpKind::MaxPool3:
      return ad::maxpool3d(tp, x);
    case OpKind::SkipConnect:
      return x;
    case OpKind::Zero:
      // Stays on the tape so mixes and gradchecks see a node, not a constant.
      return ad::mul_scalar(tp, x, 0.0);
    case OpKind::ChannelAttention: {
      // Squeeze-excitation: global pool -> bottleneck -> per-channel gate.
      Tensor s = ad::reduce_mean(tp, x, {2, 3, 4});  // (B,C,1,1,1)
      s = ad::add(tp, ad::conv3d(tp, s, op.w[0]), op.w[1]);
      s = ad::relu(tp, s);
      s = ad::add(tp, ad::conv3d(tp, s, op.w[2]), op.w[3]);
      return ad::mul(tp, x, ad::sigmoid(tp, s));
    }
    case OpKind::SpatialAttention: {
      Tensor mean_map = ad::reduce_mean(tp, x, {1});  // (B,1,T,H,W)
      Tensor max_map = ad::reduce_max(tp, x, {1});
      Tensor both = ad::concat(tp, {mean_map, max_map}, 1);
      Tensor gate = ad::add(tp, ad::conv3d(tp, both, op.w[0]), op.w[1]);
      return ad::mul(tp, x, ad::sigmoid(tp, gate));
    }
    case OpKind::TemporalAttention: {
      Tensor s = ad::reduce_mean(tp, x, {1, 3, 4});    // (B,1,T,1,1)
      s = ad::reshape(tp, s, Shape{{b, t}});
      s = ad::add(tp, ad::matmul(tp, s, op.w[0]), op.w[1]);
      s = ad::relu(tp, s);
      s = ad::add(tp, ad::matmul(tp, s, op.w[2]), op.w[3]);
      Tensor gate = ad::sigmoid(tp, ad::reshape(tp, s, Shape{{b, 1, t, 1, 1}}));
      return ad::mul(tp, x, gate);
    }
    case OpKind::SelfAttention: {
      const std::int64_t cr = reduced(c);
      const std::int64_t n = t * h * w;
      Tensor q = ad::reshape(tp, ad::conv3d(tp, x, op.w[0]), Shape{{b, cr, n}});
      Tensor k = ad::reshape(tp, ad::conv3d(tp, x, op.w[1]), Shape{{b, cr, n}});
      Tensor v = ad::reshape(tp, ad::conv3d(tp, x, op.w[2]), Shape{{b, cr, n}});
      // scores[j,i] = q_j . k_i / sqrt(cr); attend over i.
      Tensor scores = ad::mul_scalar(tp, ad::matmul(tp, q, k, true, false),
                                     1.0 / std::sqrt(double(cr)));
      Tensor attn = ad::softmax(tp, scores, 2);  // (B,N,N)
      Tensor mixed = ad::matmul(tp, v, attn, false, true);  // (B,cr,N)
      Tensor proj = ad::conv3d(
          tp, ad::reshape(tp, mixed, Shape{{b, cr, t, h, w}}), op.w[3]);
      return ad::add(tp, x, proj);
    }
  }
  throw ContractError("apply_op: unreachable");
}

}  // namespace clash::net
