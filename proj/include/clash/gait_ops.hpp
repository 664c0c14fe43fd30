#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "clash/ops.hpp"
#include "clash/params.hpp"
#include "clash/rng.hpp"
#include "clash/tape.hpp"

namespace clash::net {

// The searchable operation set, in canonical order. Argmax ties during
// discretization resolve to the lowest index.
enum class OpKind : int {
  DepthwiseSepConv3 = 0,
  DepthwiseSepConv5 = 1,
  AtrousConv3Rate2 = 2,
  AtrousConv5Rate2 = 3,
  AvgPool3 = 4,
  MaxPool3 = 5,
  SkipConnect = 6,
  Zero = 7,
  ChannelAttention = 8,
  SpatialAttention = 9,
  TemporalAttention = 10,
  SelfAttention = 11,
};

inline constexpr int kNumOps = 12;

const char* op_name(OpKind kind);
// Contract error on an unknown name.
OpKind op_from_name(const std::string& name);

// Tensor geometry the op weights depend on.
struct OpContext {
  std::int64_t channels = 0;  // C
  std::int64_t frames = 0;    // T
};

// One weight tensor an op owns: registered as "<prefix>.<name>" and handed
// to apply_op in this order. init_std = 0 marks a zero-initialized bias.
struct OpTensorSpec {
  std::string name;
  ad::Shape shape;
  double init_std = 0.0;
};

std::vector<OpTensorSpec> op_param_specs(OpKind kind, const OpContext& ctx);

// Registers every tensor from op_param_specs under `prefix.`; weights draw
// init_std * normal from `rng`, biases start at zero.
void register_op_params(ad::ParamStore& store, const std::string& prefix,
                        OpKind kind, const OpContext& ctx, Rng& rng);

// Weight leaves for one op application, in op_param_specs order.
struct OpParams {
  OpKind kind = OpKind::Zero;
  std::vector<ad::Tensor> w;
};

// Applies the operation; every kind preserves (B, C, T, H, W).
ad::Tensor apply_op(ad::Tape& tape, const ad::Tensor& x, const OpParams& op);

}  // namespace clash::net
