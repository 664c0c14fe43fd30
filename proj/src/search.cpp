#include "clash/search.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include "clash/adam.hpp"
#include "clash/errors.hpp"

namespace clash::net {

using ad::Adam;
using ad::AdamConfig;
using ad::Tape;
using ad::Tensor;

void validate(const SearchConfig& cfg) {
  auto bad = [](const std::string& field, const std::string& why) {
    throw ContractError("config: " + field + " " + why);
  };
  if (cfg.u < 1) bad("u", "must be >= 1");
  if (!(cfg.lr_w >= 0.0) || !std::isfinite(cfg.lr_w))
    bad("lr_w", "must be finite and >= 0");
  if (!(cfg.lr_alpha >= 0.0) || !std::isfinite(cfg.lr_alpha))
    bad("lr_alpha", "must be finite and >= 0");
  if (cfg.p < 1) bad("p", "must be >= 1");
  if (cfg.k < 1) bad("k", "must be >= 1");
  if (cfg.iterations < 0) bad("iterations", "must be >= 0");
  if (cfg.retrain_iterations < 0) bad("retrain_iterations", "must be >= 0");
  if (!(cfg.val_fraction > 0.0 && cfg.val_fraction < 1.0))
    bad("val_fraction", "must lie in (0,1)");
  if (cfg.checkpoint_every < 0) bad("checkpoint_every", "must be >= 0");
  if (!(cfg.net.margin >= 0.0)) bad("margin", "must be >= 0");
  if (cfg.net.parts < 1) bad("parts", "must be >= 1");
  if (cfg.net.embed_dim < 1) bad("embed_dim", "must be >= 1");
  if (cfg.net.clip_len < 1) bad("clip_len", "must be >= 1");
  if (cfg.net.num_classes < 1) bad("num_classes", "must be >= 1");
  if (cfg.net.extractor.channels.empty())
    bad("extractor", "needs at least one layer");
  for (auto c : cfg.net.extractor.channels)
    if (c < 1) bad("extractor", "channel counts must be >= 1");
}

namespace {

Supernet::Batch to_net_batch(data::ClipBatch&& b) {
  return {std::move(b.sil), std::move(b.dstf), std::move(b.labels)};
}

std::string checkpoint_path(const std::string& out_dir, int step) {
  char name[32];
  std::snprintf(name, sizeof(name), "checkpoint_%06d.ckpt", step);
  return out_dir + "/" + name;
}

// Merged weight+alpha snapshot so a single file restores the whole state.
std::string write_checkpoint(const std::string& out_dir, int step,
                             const Supernet& net) {
  std::vector<ad::NamedTensor> items = ad::snapshot(net.weights());
  for (auto& item : ad::snapshot(net.alphas())) items.push_back(std::move(item));
  const std::string path = checkpoint_path(out_dir, step);
  ad::save_checkpoint(path, items);
  return path;
}

[[noreturn]] void numeric_abort(const std::string& what, int iteration,
                                const std::string& last_good) {
  throw NumericError(
      what + " (outer iteration " + std::to_string(iteration) +
      "; last good checkpoint: " + (last_good.empty() ? "none" : last_good) +
      ")");
}

}  // namespace

SearchResult search(const SearchConfig& cfg, const data::GaitDataset& train,
                    const data::GaitDataset& val, const std::string& out_dir) {
  validate(cfg);
  Supernet net(cfg.net, seed_combine(cfg.seed, 100));
  Rng batch_rng(seed_combine(cfg.seed, 101));
  Adam opt_w(AdamConfig{cfg.lr_w, 0.9, 0.999, 1e-8});
  Adam opt_a(AdamConfig{cfg.lr_alpha, 0.5, 0.999, 1e-8});

  SearchResult res;
  res.alpha_history.push_back(net.architecture().alpha);
  std::string last_good;

  for (int it = 1; it <= cfg.iterations; ++it) {
    // Lower level: u weight steps at the current alpha.
    for (int s = 0; s < cfg.u; ++s) {
      Tape tape;
      const auto w = net.weights().leaves(tape);
      const auto a = net.alphas().leaves(tape);
      const auto batch = to_net_batch(
          data::sample_batch(train, cfg.p, cfg.k, cfg.net.clip_len, batch_rng));
      try {
        const auto info = net.loss(tape, batch, w, &a[0], nullptr);
        const double value = info.total.scalar();
        if (!std::isfinite(value))
          throw NumericError("search: non-finite training loss");
        tape.backward(info.total);
        opt_w.step(net.weights(), tape, w);
        net.clamp_gem();
        res.train_loss.push_back(value);
        res.w_steps += 1;
        if (info.single_identity) res.single_identity_warnings += 1;
      } catch (const NumericError& e) {
        numeric_abort(e.what(), it, last_good);
      }
    }

    // Upper level: one alpha step on a validation batch, first order
    // (the gradient is taken at the current weights, no unrolling).
    {
      Tape tape;
      const auto w = net.weights().leaves(tape);
      const auto a = net.alphas().leaves(tape);
      const auto batch = to_net_batch(
          data::sample_batch(val, cfg.p, cfg.k, cfg.net.clip_len, batch_rng));
      try {
        const auto info = net.loss(tape, batch, w, &a[0], nullptr);
        const double value = info.total.scalar();
        if (!std::isfinite(value))
          throw NumericError("search: non-finite validation loss");
        tape.backward(info.total);
        opt_a.step(net.alphas(), tape, a);
        res.val_loss.push_back(value);
        res.alpha_steps += 1;
        if (info.single_identity) res.single_identity_warnings += 1;
      } catch (const NumericError& e) {
        numeric_abort(e.what(), it, last_good);
      }
    }

    if (!out_dir.empty() && cfg.checkpoint_every > 0 &&
        (it % cfg.checkpoint_every == 0 || it == cfg.iterations)) {
      last_good = write_checkpoint(out_dir, it, net);
    }

    res.alpha_history.push_back(net.architecture().alpha);
  }

  res.arch = net.architecture();
  return res;
}

RetrainResult retrain(const SearchConfig& cfg, const CellArchitecture& arch,
                      const data::GaitDataset& train, int iterations,
                      const std::string& out_dir) {
  validate(cfg);
  if (!arch.discrete)
    throw ContractError("retrain: architecture has no discrete choices");

  RetrainResult res;
  res.net = std::make_unique<Supernet>(cfg.net, seed_combine(cfg.seed, 200));
  Rng batch_rng(seed_combine(cfg.seed, 201));
  Adam opt_w(AdamConfig{cfg.lr_w, 0.9, 0.999, 1e-8});
  std::string last_good;

  for (int it = 1; it <= iterations; ++it) {
    Tape tape;
    const auto w = res.net->weights().leaves(tape);
    const auto batch = to_net_batch(
        data::sample_batch(train, cfg.p, cfg.k, cfg.net.clip_len, batch_rng));
    try {
      const auto info =
          res.net->loss(tape, batch, w, nullptr, &*arch.discrete);
      const double value = info.total.scalar();
      if (!std::isfinite(value))
        throw NumericError("retrain: non-finite training loss");
      tape.backward(info.total);
      opt_w.step(res.net->weights(), tape, w);
      res.net->clamp_gem();
      res.train_loss.push_back(value);
      if (info.single_identity) res.single_identity_warnings += 1;
    } catch (const NumericError& e) {
      numeric_abort(e.what(), it, last_good);
    }

    if (!out_dir.empty() && cfg.checkpoint_every > 0 &&
        (it % cfg.checkpoint_every == 0 || it == iterations)) {
      last_good = write_checkpoint(out_dir, it, *res.net);
    }
  }
  return res;
}

namespace {

// Mean over disjoint clip windows of the flattened (parts*D) embedding.
std::vector<double> sequence_embedding(const Supernet& net,
                                       const CellArchitecture& arch,
                                       const data::GaitSample& sample) {
  const auto windows =
      data::sequence_windows(sample, net.config().clip_len);
  Tape tape;
  const auto w = net.weights().leaves(tape);
  const Tensor e = net.embed(tape, windows.sil, windows.dstf, w, nullptr,
                             &*arch.discrete);
  const std::int64_t n = e.shape[0];
  const std::int64_t dim = e.shape[1] * e.shape[2];
  std::vector<double> out(std::size_t(dim), 0.0);
  const double* p = e.ptr();
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < dim; ++j) out[std::size_t(j)] += p[i * dim + j];
  for (auto& v : out) v /= double(n);
  return out;
}

}  // namespace

double evaluate_rank1(const Supernet& net, const CellArchitecture& arch,
                      const data::GaitDataset& gallery,
                      const data::GaitDataset& probe) {
  if (!arch.discrete)
    throw ContractError("evaluate: architecture has no discrete choices");
  if (gallery.samples.empty()) throw ContractError("evaluate: empty gallery");
  if (probe.samples.empty()) throw ContractError("evaluate: empty probe set");

  std::vector<std::vector<double>> gal;
  gal.reserve(gallery.samples.size());
  for (const auto& s : gallery.samples)
    gal.push_back(sequence_embedding(net, arch, s));

  std::size_t hits = 0;
  for (const auto& s : probe.samples) {
    const auto e = sequence_embedding(net, arch, s);
    std::size_t best = 0;
    double best_d2 = -1.0;
    for (std::size_t g = 0; g < gal.size(); ++g) {
      double d2 = 0.0;
      for (std::size_t j = 0; j < e.size(); ++j) {
        const double d = e[j] - gal[g][j];
        d2 += d * d;
      }
      if (g == 0 || d2 < best_d2) {  // strict <: ties keep the first entry
        best_d2 = d2;
        best = g;
      }
    }
    if (gallery.samples[best].label == s.label) ++hits;
  }
  return double(hits) / double(probe.samples.size());
}

}  // namespace clash::net
