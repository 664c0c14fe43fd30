#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "clash/arch.hpp"
#include "clash/gait_ops.hpp"
#include "clash/gradcheck.hpp"
#include "clash/params.hpp"

namespace clash::net {

struct ExtractorConfig {
  std::vector<std::int64_t> channels = {8, 16, 32, 32};
  double leaky_slope = 0.1;
  std::vector<int> pool_after = {0, 1};  // 0-based layers followed by 2x2 pool
};

struct SupernetConfig {
  ExtractorConfig extractor;
  std::int64_t parts = 4;
  std::int64_t embed_dim = 32;
  std::int64_t num_classes = 8;
  std::int64_t clip_len = 8;
  double margin = 0.2;
};

// Weight-shared two-stream network: extractor -> relaxed/discrete MD cell ->
// GeM temporal pool -> part embedding head, plus the combined loss.
class Supernet {
 public:
  Supernet(SupernetConfig cfg, std::uint64_t seed);

  const SupernetConfig& config() const { return cfg_; }
  ad::ParamStore& weights() { return weights_; }
  const ad::ParamStore& weights() const { return weights_; }
  ad::ParamStore& alphas() { return alphas_; }
  const ad::ParamStore& alphas() const { return alphas_; }

  struct Batch {
    ad::Tensor sil;   // (B,1,T,H,W) constant
    ad::Tensor dstf;  // (B,1,T,H,W) constant
    std::vector<int> labels;
  };

  struct LossInfo {
    ad::Tensor total;
    double triplet = 0.0;
    double ce = 0.0;
    bool single_identity = false;  // triplet term forced to 0
  };

  // w = weights().leaves(tape). Both descriptor streams run through the
  // same leaves, so parameter storage is shared by construction.
  ad::Tensor feature_extract(ad::Tape& tape, const ad::Tensor& x,
                             const std::vector<ad::Tensor>& w) const;

  // Relaxed when `alpha` (the (5,12) leaf) is given; discrete when
  // `discrete` is given. Exactly one must be non-null.
  ad::Tensor cell_forward(ad::Tape& tape, const ad::Tensor& f_sil,
                          const ad::Tensor& f_dstf,
                          const std::vector<ad::Tensor>& w,
                          const ad::Tensor* alpha,
                          const std::array<OpKind, kNumEdges>* discrete) const;

  ad::Tensor gem_pool(ad::Tape& tape, const ad::Tensor& x,
                      const std::vector<ad::Tensor>& w) const;

  ad::Tensor embedding_head(ad::Tape& tape, const ad::Tensor& f_agg,
                            const std::vector<ad::Tensor>& w) const;

  ad::Tensor class_logits(ad::Tape& tape, const ad::Tensor& f_final,
                          const std::vector<ad::Tensor>& w) const;

  // Full trunk: both streams -> cell -> GeM -> head. (B, parts, D).
  ad::Tensor embed(ad::Tape& tape, const ad::Tensor& sil,
                   const ad::Tensor& dstf, const std::vector<ad::Tensor>& w,
                   const ad::Tensor* alpha,
                   const std::array<OpKind, kNumEdges>* discrete) const;

  LossInfo total_loss(ad::Tape& tape, const ad::Tensor& f_final,
                      const ad::Tensor& logits,
                      const std::vector<int>& labels) const;

  LossInfo loss(ad::Tape& tape, const Batch& batch,
                const std::vector<ad::Tensor>& w, const ad::Tensor* alpha,
                const std::array<OpKind, kNumEdges>* discrete) const;

  // Re-imposes k >= 1 on the GeM exponent; call after every optimizer step.
  void clamp_gem();

  // Current alpha store content as a CellArchitecture (relaxed).
  CellArchitecture architecture() const;
  void set_alpha(const CellArchitecture& arch);

 private:
  ad::Tensor apply_edge_op(ad::Tape& tape, int edge, OpKind kind,
                           const ad::Tensor& x,
                           const std::vector<ad::Tensor>& w) const;

  SupernetConfig cfg_;
  ad::ParamStore weights_;
  ad::ParamStore alphas_;
  std::vector<std::size_t> ext_w_, ext_b_;
  std::array<std::array<std::vector<std::size_t>, kNumOps>, kNumEdges>
      cell_slots_{};
  std::size_t gem_k_ = 0;
  std::vector<std::size_t> head_w_, head_b_;
  std::size_t cls_w_ = 0, cls_b_ = 0;
};

// Gradchecks for the 12 candidate operations (named by OpKind).
std::vector<ad::GradcheckSpec> gait_op_gradchecks();

// Composite check: extractor + relaxed cell + GeM + head + loss on a toy
// graph, differentiated w.r.t. all weights; and the same w.r.t. alpha only.
ad::GradcheckSpec composite_weight_gradcheck();
ad::GradcheckSpec composite_alpha_gradcheck();

}  // namespace clash::net
