#include "clash/supernet.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "clash/errors.hpp"

namespace clash::net {

using ad::Shape;
using ad::Tape;
using ad::Tensor;

namespace {

double he_std(std::int64_t fan_in) { return std::sqrt(2.0 / double(fan_in)); }

Tensor he_tensor(Shape s, double std, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(s));
  for (std::int64_t i = 0; i < t.numel(); ++i) t.ptr()[i] = std * rng.normal();
  return t;
}

}  // namespace

Supernet::Supernet(SupernetConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  if (cfg_.extractor.channels.empty())
    throw ContractError("supernet: extractor needs at least one layer");
  for (std::int64_t c : cfg_.extractor.channels)
    if (c < 1) throw ContractError("supernet: extractor channels must be positive");
  if (cfg_.parts < 1) throw ContractError("supernet: parts must be >= 1");

  Rng wrng(seed_combine(seed, 0));
  std::int64_t cin = 1;
  for (std::size_t i = 0; i < cfg_.extractor.channels.size(); ++i) {
    const std::int64_t cout = cfg_.extractor.channels[i];
    const std::string p = "extractor.l" + std::to_string(i);
    weights_.add(p + ".w",
                 he_tensor(Shape{{cout, cin, 3, 3, 3}}, he_std(cin * 27), wrng));
    ext_w_.push_back(weights_.size() - 1);
    weights_.add(p + ".b", Tensor::zeros(Shape{{1, cout, 1, 1, 1}}));
    ext_b_.push_back(weights_.size() - 1);
    cin = cout;
  }

  const OpContext ctx{cfg_.extractor.channels.back(), cfg_.clip_len};
  for (int e = 0; e < kNumEdges; ++e) {
    for (int o = 0; o < kNumOps; ++o) {
      const OpKind kind = OpKind(o);
      const std::string prefix =
          "cell.e" + std::to_string(e) + "." + op_name(kind);
      const std::size_t before = weights_.size();
      register_op_params(weights_, prefix, kind, ctx, wrng);
      auto& slots = cell_slots_[std::size_t(e)][std::size_t(o)];
      for (std::size_t s = before; s < weights_.size(); ++s)
        slots.push_back(s);
    }
  }

  weights_.add("gem.k", Tensor::full(Shape{{1}}, 1.0));
  gem_k_ = weights_.size() - 1;

  const std::int64_t c = cfg_.extractor.channels.back();
  for (std::int64_t p = 0; p < cfg_.parts; ++p) {
    const std::string name = "head.p" + std::to_string(p);
    weights_.add(name + ".w",
                 he_tensor(Shape{{c, cfg_.embed_dim}}, he_std(c), wrng));
    head_w_.push_back(weights_.size() - 1);
    weights_.add(name + ".b", Tensor::zeros(Shape{{1, cfg_.embed_dim}}));
    head_b_.push_back(weights_.size() - 1);
  }

  weights_.add("cls.w", he_tensor(Shape{{cfg_.embed_dim, cfg_.num_classes}},
                                  he_std(cfg_.embed_dim), wrng));
  cls_w_ = weights_.size() - 1;
  weights_.add("cls.b", Tensor::zeros(Shape{{1, cfg_.num_classes}}));
  cls_b_ = weights_.size() - 1;

  Rng arng(seed_combine(seed, 1));
  Tensor alpha = Tensor::zeros(Shape{{kNumEdges, kNumOps}});
  for (std::int64_t i = 0; i < alpha.numel(); ++i)
    alpha.ptr()[i] = 1e-3 * arng.normal();
  alphas_.add("alpha", std::move(alpha));
}

Tensor Supernet::feature_extract(Tape& tape, const Tensor& x,
                                 const std::vector<Tensor>& w) const {
  if (x.shape.rank() != 5 || x.shape[1] != 1)
    throw ContractError("feature_extract: expected (B,1,T,H,W), got " +
                        x.shape.str());
  Tensor h = x;
  for (std::size_t i = 0; i < ext_w_.size(); ++i) {
    h = ad::conv3d(tape, h, w[ext_w_[i]]);
    h = ad::add(tape, h, w[ext_b_[i]]);
    h = ad::leaky_relu(tape, h, cfg_.extractor.leaky_slope);
    for (int p : cfg_.extractor.pool_after)
      if (p == int(i)) h = ad::maxpool_spatial2(tape, h);
  }
  return h;
}

Tensor Supernet::apply_edge_op(Tape& tape, int edge, OpKind kind,
                               const Tensor& x,
                               const std::vector<Tensor>& w) const {
  OpParams op;
  op.kind = kind;
  for (std::size_t s : cell_slots_[std::size_t(edge)][std::size_t(int(kind))])
    op.w.push_back(w[s]);
  return apply_op(tape, x, op);
}

Tensor Supernet::cell_forward(
    Tape& tape, const Tensor& f_sil, const Tensor& f_dstf,
    const std::vector<Tensor>& w, const Tensor* alpha,
    const std::array<OpKind, kNumEdges>* discrete) const {
  if (!(f_sil.shape == f_dstf.shape))
    throw ContractError("md_cell: descriptor features differ: " +
                        f_sil.shape.str() + " vs " + f_dstf.shape.str());
  if ((alpha == nullptr) == (discrete == nullptr))
    throw ContractError("md_cell: exactly one of alpha/discrete required");

  // Relaxed edge: softmax-weighted sum of all 12 branches, o ascending.
  Tensor sm;
  if (alpha) {
    for (std::int64_t i = 0; i < alpha->numel(); ++i)
      if (!std::isfinite(alpha->ptr()[i]))
        throw NumericError("md_cell: non-finite alpha");
    sm = ad::softmax(tape, *alpha, 1);
  }
  const auto edge_out = [&](int e, const Tensor& x) -> Tensor {
    if (discrete) return apply_edge_op(tape, e, (*discrete)[std::size_t(e)], x, w);
    const Tensor row = ad::slice(tape, sm, 0, e, 1);  // (1,12)
    Tensor acc;
    for (int o = 0; o < kNumOps; ++o) {
      const Tensor coef = ad::slice(tape, row, 1, o, 1);  // (1,1)
      const Tensor branch = apply_edge_op(tape, e, OpKind(o), x, w);
      const Tensor term = ad::mul(tape, branch, coef);
      acc = o == 0 ? term : ad::add(tape, acc, term);
    }
    return acc;
  };

  const Tensor n3 = ad::add(tape, edge_out(0, f_sil), edge_out(1, f_dstf));
  Tensor n4 = ad::add(tape, edge_out(2, f_sil), edge_out(3, f_dstf));
  n4 = ad::add(tape, n4, edge_out(4, n3));
  return ad::add(tape, n3, n4);
}

Tensor Supernet::gem_pool(Tape& tape, const Tensor& x,
                          const std::vector<Tensor>& w) const {
  const Tensor& k = w[gem_k_];
  const Tensor clamped = ad::clamp_min(tape, x, 1e-6);
  const Tensor powed = ad::pow_ts(tape, clamped, k);
  const Tensor mean = ad::reduce_mean(tape, powed, {2});
  return ad::pow_ts(tape, mean, ad::reciprocal(tape, k));
}

Tensor Supernet::embedding_head(Tape& tape, const Tensor& f_agg,
                                const std::vector<Tensor>& w) const {
  const std::int64_t b = f_agg.shape[0];
  const std::int64_t h = f_agg.shape[3];
  const std::int64_t base = (h + cfg_.parts - 1) / cfg_.parts;
  std::vector<Tensor> parts;
  for (std::int64_t p = 0; p < cfg_.parts; ++p) {
    const std::int64_t start = p * base;
    if (start >= h)
      throw ContractError("embedding_head: " + std::to_string(cfg_.parts) +
                          " parts exceed feature height " + std::to_string(h));
    const std::int64_t len = std::min(base, h - start);
    const Tensor strip = ad::slice(tape, f_agg, 3, start, len);
    const Tensor pooled = ad::add(tape, ad::reduce_max(tape, strip, {2, 3, 4}),
                                  ad::reduce_mean(tape, strip, {2, 3, 4}));
    const Tensor flat =
        ad::reshape(tape, pooled, Shape{{b, f_agg.shape[1]}});
    Tensor emb = ad::matmul(tape, flat, w[head_w_[std::size_t(p)]]);
    emb = ad::add(tape, emb, w[head_b_[std::size_t(p)]]);
    parts.push_back(ad::reshape(tape, emb, Shape{{b, 1, cfg_.embed_dim}}));
  }
  return ad::concat(tape, parts, 1);
}

Tensor Supernet::class_logits(Tape& tape, const Tensor& f_final,
                              const std::vector<Tensor>& w) const {
  const std::int64_t b = f_final.shape[0];
  const Tensor mean_part = ad::reshape(
      tape, ad::reduce_mean(tape, f_final, {1}), Shape{{b, cfg_.embed_dim}});
  return ad::add(tape, ad::matmul(tape, mean_part, w[cls_w_]), w[cls_b_]);
}

Tensor Supernet::embed(Tape& tape, const Tensor& sil, const Tensor& dstf,
                       const std::vector<Tensor>& w, const Tensor* alpha,
                       const std::array<OpKind, kNumEdges>* discrete) const {
  const Tensor fs = feature_extract(tape, sil, w);
  const Tensor fd = feature_extract(tape, dstf, w);
  const Tensor fmd = cell_forward(tape, fs, fd, w, alpha, discrete);
  const Tensor fagg = gem_pool(tape, fmd, w);
  return embedding_head(tape, fagg, w);
}

Supernet::LossInfo Supernet::total_loss(Tape& tape, const Tensor& f_final,
                                        const Tensor& logits,
                                        const std::vector<int>& labels) const {
  const std::int64_t b = f_final.shape[0];
  if (std::int64_t(labels.size()) != b)
    throw ContractError("total_loss: labels do not match batch size");
  for (int l : labels)
    if (l < 0 || l >= int(cfg_.num_classes))
      throw ContractError("total_loss: label out of range");

  LossInfo info;
  int distinct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    bool seen = false;
    for (std::size_t j = 0; j < i; ++j) seen |= labels[j] == labels[i];
    if (!seen) ++distinct;
  }
  info.single_identity = distinct < 2;

  // Batch-all triplet, per part, averaged over parts. The triplet mask and
  // the positive-hinge count are data-independent constants on the tape.
  Tensor mask = Tensor::zeros(Shape{{b, b, b}});
  for (std::int64_t a = 0; a < b; ++a)
    for (std::int64_t p = 0; p < b; ++p)
      for (std::int64_t n = 0; n < b; ++n)
        if (a != p && labels[std::size_t(a)] == labels[std::size_t(p)] &&
            labels[std::size_t(a)] != labels[std::size_t(n)])
          mask.ptr()[(a * b + p) * b + n] = 1.0;

  Tensor triplet_sum;  // scalar accumulation across parts
  bool have_triplet = false;
  for (std::int64_t part = 0; part < cfg_.parts; ++part) {
    const Tensor e = ad::reshape(tape, ad::slice(tape, f_final, 1, part, 1),
                                 Shape{{b, cfg_.embed_dim}});
    const Tensor sq = ad::reduce_sum(tape, ad::mul(tape, e, e), {1});  // (b,1)
    const Tensor gram = ad::matmul(tape, e, e, false, true);           // (b,b)
    const Tensor sq_row = ad::reshape(tape, sq, Shape{{1, b}});
    const Tensor d2 = ad::sub(tape, ad::add(tape, sq, sq_row),
                              ad::mul_scalar(tape, gram, 2.0));
    const Tensor dist = ad::sqrt_op(tape, ad::clamp_min(tape, d2, 1e-12));
    const Tensor dap = ad::reshape(tape, dist, Shape{{b, b, 1}});
    const Tensor dan = ad::reshape(tape, dist, Shape{{b, 1, b}});
    const Tensor hinge =
        ad::add_scalar(tape, ad::sub(tape, dap, dan), cfg_.margin);
    std::int64_t active = 0;
    for (std::int64_t i = 0; i < hinge.numel(); ++i)
      if (mask.ptr()[i] == 1.0 && hinge.ptr()[i] > 0.0) ++active;
    if (active == 0) continue;
    const Tensor masked = ad::mul(tape, ad::relu(tape, hinge), mask);
    const Tensor part_loss =
        ad::mul_scalar(tape, ad::reduce_sum(tape, masked, {0, 1, 2}),
                       1.0 / double(active));
    triplet_sum = have_triplet ? ad::add(tape, triplet_sum, part_loss)
                               : part_loss;
    have_triplet = true;
  }
  Tensor triplet = have_triplet
                       ? ad::mul_scalar(tape, triplet_sum, 1.0 / double(cfg_.parts))
                       : Tensor::zeros(Shape{{1, 1, 1}});

  Tensor onehot = Tensor::zeros(Shape{{b, cfg_.num_classes}});
  for (std::int64_t i = 0; i < b; ++i)
    onehot.ptr()[i * cfg_.num_classes + labels[std::size_t(i)]] = 1.0;
  const Tensor logsm = ad::log_softmax(tape, logits, 1);
  const Tensor ce = ad::mul_scalar(
      tape, ad::reduce_sum(tape, ad::mul(tape, logsm, onehot), {0, 1}),
      -1.0 / double(b));

  const Tensor triplet_flat =
      ad::reshape(tape, triplet, Shape{{1, 1}});
  info.total = ad::reshape(
      tape, ad::add(tape, triplet_flat, ad::reshape(tape, ce, Shape{{1, 1}})),
      Shape{{1}});
  info.triplet = triplet.ptr()[0];
  info.ce = ce.ptr()[0];
  return info;
}

Supernet::LossInfo Supernet::loss(
    Tape& tape, const Batch& batch, const std::vector<Tensor>& w,
    const Tensor* alpha, const std::array<OpKind, kNumEdges>* discrete) const {
  if (!(batch.sil.shape == batch.dstf.shape))
    throw ContractError("loss: descriptor batches differ in shape");
  if (batch.sil.shape[2] != cfg_.clip_len)
    throw ContractError("loss: clip length " +
                        std::to_string(batch.sil.shape[2]) +
                        " does not match configured " +
                        std::to_string(cfg_.clip_len));
  const Tensor f_final =
      embed(tape, batch.sil, batch.dstf, w, alpha, discrete);
  const Tensor logits = class_logits(tape, f_final, w);
  return total_loss(tape, f_final, logits, batch.labels);
}

void Supernet::clamp_gem() {
  double& k = (*weights_.entry(gem_k_).value.data)[0];
  if (k < 1.0) k = 1.0;
}

CellArchitecture Supernet::architecture() const {
  CellArchitecture arch;
  const Tensor& a = alphas_.at("alpha");
  for (int e = 0; e < kNumEdges; ++e)
    for (int o = 0; o < kNumOps; ++o)
      arch.alpha[std::size_t(e)][std::size_t(o)] =
          a.ptr()[e * kNumOps + o];
  return arch;
}

void Supernet::set_alpha(const CellArchitecture& arch) {
  Tensor& a = alphas_.at("alpha");
  for (int e = 0; e < kNumEdges; ++e)
    for (int o = 0; o < kNumOps; ++o)
      a.ptr()[e * kNumOps + o] = arch.alpha[std::size_t(e)][std::size_t(o)];
}

std::vector<ad::GradcheckSpec> gait_op_gradchecks() {
  std::vector<ad::GradcheckSpec> specs;
  const OpContext ctx{4, 3};
  const Shape xshape{{2, 4, 3, 4, 4}};
  for (int o = 0; o < kNumOps; ++o) {
    const OpKind kind = OpKind(o);
    ad::GradcheckSpec s;
    s.name = op_name(kind);
    s.shapes.push_back(xshape);
    const auto param_specs = op_param_specs(kind, ctx);
    for (const auto& ps : param_specs) s.shapes.push_back(ps.shape);
    s.build = [kind](Tape& t, const std::vector<Tensor>& in) {
      OpParams op;
      op.kind = kind;
      op.w.assign(in.begin() + 1, in.end());
      return apply_op(t, in[0], op);
    };
    if (kind == OpKind::MaxPool3) s.sample = ad::margin_sampler();
    specs.push_back(std::move(s));
  }
  return specs;
}

namespace {

// Tiny shared fixture for the composite checks: 2 identities, 2 clips.
struct CompositeFixture {
  std::shared_ptr<Supernet> net;
  Supernet::Batch batch;

  CompositeFixture() {
    SupernetConfig cfg;
    cfg.extractor.channels = {2, 3};
    cfg.extractor.pool_after = {0};
    cfg.parts = 2;
    cfg.embed_dim = 4;
    cfg.num_classes = 2;
    cfg.clip_len = 4;
    net = std::make_shared<Supernet>(cfg, 0xC0FFEE);
    Rng rng(31);
    const Shape in{{2, 1, 4, 4, 4}};
    batch.sil = Tensor::zeros(in);
    batch.dstf = Tensor::zeros(in);
    for (std::int64_t i = 0; i < batch.sil.numel(); ++i) {
      batch.sil.ptr()[i] = rng.uniform();
      batch.dstf.ptr()[i] = rng.uniform(-1.0, 1.0);
    }
    batch.labels = {0, 1};
  }
};

}  // namespace

ad::GradcheckSpec composite_weight_gradcheck() {
  auto fix = std::make_shared<CompositeFixture>();
  ad::GradcheckSpec s;
  s.name = "composite_w";
  for (std::size_t i = 0; i < fix->net->weights().size(); ++i)
    s.shapes.push_back(fix->net->weights().entry(i).value.shape);
  const Tensor alpha_const = [&] {
    Tensor a = Tensor::zeros(Shape{{kNumEdges, kNumOps}});
    Rng rng(77);
    for (std::int64_t i = 0; i < a.numel(); ++i) a.ptr()[i] = 0.3 * rng.normal();
    return a;
  }();
  s.build = [fix, alpha_const](Tape& t, const std::vector<Tensor>& in) {
    return fix->net->loss(t, fix->batch, in, &alpha_const, nullptr).total;
  };
  // Weight magnitudes near initialization keep activations in range.
  s.sample = [fix](Rng& rng, std::vector<std::vector<double>>& vals) {
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double* init = fix->net->weights().entry(i).value.ptr();
      for (std::size_t j = 0; j < vals[i].size(); ++j)
        vals[i][j] = init[j] + 0.05 * rng.normal();
    }
  };
  return s;
}

ad::GradcheckSpec composite_alpha_gradcheck() {
  auto fix = std::make_shared<CompositeFixture>();
  ad::GradcheckSpec s;
  s.name = "composite_alpha";
  s.shapes.push_back(Shape{{kNumEdges, kNumOps}});
  s.build = [fix](Tape& t, const std::vector<Tensor>& in) {
    std::vector<Tensor> w;
    for (std::size_t i = 0; i < fix->net->weights().size(); ++i)
      w.push_back(fix->net->weights().entry(i).value);  // constants
    return fix->net->loss(t, fix->batch, w, &in[0], nullptr).total;
  };
  return s;
}

}  // namespace clash::net
