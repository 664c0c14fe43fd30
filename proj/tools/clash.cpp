#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "clash/arch.hpp"
#include "clash/dataset.hpp"
#include "clash/dstf.hpp"
#include "clash/errors.hpp"
#include "clash/gradcheck.hpp"
#include "clash/manifest.hpp"
#include "clash/metrics.hpp"
#include "clash/ops.hpp"
#include "clash/params.hpp"
#include "clash/rng.hpp"
#include "clash/search.hpp"
#include "clash/silhouette.hpp"
#include "clash/supernet.hpp"
#include "clash/textconfig.hpp"
#include "clash/version.hpp"
#include "clash/walker.hpp"

namespace fs = std::filesystem;

namespace {

// Exit codes are a stable contract:
//   0 ok, 2 malformed input/config, 3 degenerate-frame policy,
//   4 non-finite numerics, 5 gradient check failure.
constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitDegenerate = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitGradcheck = 5;

// ---------------------------------------------------------------------------
// Config schema shared by search / retrain / evaluate. One row per key keeps
// --help-config, unknown-key rejection, and the resolved snapshot in sync.

struct ConfigKeyDef {
  const char* key;
  const char* fallback;  // literal echoed when the key is absent
  const char* help;
};

constexpr ConfigKeyDef kConfigSchema[] = {
    {"data", "", "manifest CSV of silhouette sequences; empty uses the built-in walker corpus"},
    {"corpus_ids", "8", "built-in corpus: identities"},
    {"corpus_seqs", "8", "built-in corpus: sequences per identity"},
    {"corpus_frames", "16", "built-in corpus: frames per sequence"},
    {"corpus_height", "16", "built-in corpus: frame height"},
    {"corpus_width", "12", "built-in corpus: frame width"},
    {"corpus_noise", "0", "built-in corpus: per-pixel flip probability"},
    {"corpus_seed", "1", "built-in corpus: generator seed"},
    {"norm", "per-frame", "descriptor normalization: per-frame | per-seq"},
    {"extractor", "8,16,32,32", "extractor channels per layer"},
    {"pool_after", "0,1", "0-based extractor layers followed by 2x2 spatial pooling"},
    {"parts", "4", "horizontal strips in the embedding head"},
    {"embed_dim", "32", "embedding dimension per part"},
    {"clip_len", "8", "frames per training clip"},
    {"margin", "0.2", "triplet margin"},
    {"u", "1", "weight steps per architecture step"},
    {"lr_w", "0.001", "Adam learning rate for weights"},
    {"lr_alpha", "0.001", "Adam learning rate for architecture logits"},
    {"p", "2", "identities per batch"},
    {"k", "2", "clips per identity per batch"},
    {"iterations", "2000", "outer search iterations (= architecture steps)"},
    {"retrain_iterations", "3000", "retraining iterations"},
    {"val_fraction", "0.4", "fraction of the train pool held out for alpha steps"},
    {"seed", "7", "run seed"},
    {"checkpoint_every", "500", "checkpoint period in outer iterations; 0 disables"},
    {"eval_gallery_per_id", "1", "gallery sequences per identity"},
    {"eval_probe_per_id", "2", "probe sequences per identity"},
};

void print_config_schema() {
  std::printf("# key = default  (description)\n");
  for (const auto& d : kConfigSchema)
    std::printf("%s = %s  # %s\n", d.key, d.fallback, d.help);
}

// A fully resolved run: the search configuration plus everything the config
// file controls that sits outside SearchConfig (data source, normalization,
// evaluation protocol). `resolved` echoes one value per schema key, in schema
// order, for the config snapshot and the run manifest.
struct RunSetup {
  clash::net::SearchConfig cfg;
  clash::NormMode norm = clash::NormMode::PerFrame;
  std::string data;          // manifest path; empty -> built-in corpus
  clash::CorpusSpec corpus;  // used when data is empty
  int gallery_n = 1;
  int probe_n = 2;
  std::vector<std::pair<std::string, std::string>> resolved;
};

RunSetup resolve_setup(const clash::TextConfig& tc, const std::string* seed_override) {
  std::vector<std::string> known;
  for (const auto& d : kConfigSchema) known.push_back(d.key);
  const auto unknown = tc.unknown_keys(known);
  if (!unknown.empty())
    throw clash::FormatError("config: unknown key '" + unknown.front() + "'");

  RunSetup s;
  s.data = tc.get_string("data", "");
  s.corpus.ids = int(tc.get_int("corpus_ids", 8));
  s.corpus.seqs_per_id = int(tc.get_int("corpus_seqs", 8));
  s.corpus.frames = int(tc.get_int("corpus_frames", 16));
  s.corpus.height = int(tc.get_int("corpus_height", 16));
  s.corpus.width = int(tc.get_int("corpus_width", 12));
  s.corpus.noise_prob = tc.get_double("corpus_noise", 0.0);
  s.corpus.seed = tc.get_uint("corpus_seed", 1);

  const std::string norm = tc.get_string("norm", "per-frame");
  if (norm == "per-frame")
    s.norm = clash::NormMode::PerFrame;
  else if (norm == "per-seq")
    s.norm = clash::NormMode::PerSequence;
  else
    throw clash::FormatError("config: key 'norm': expected per-frame or per-seq, got '" + norm + "'");

  auto& net = s.cfg.net;
  net.extractor.channels = tc.get_int_list("extractor", {8, 16, 32, 32});
  const auto pools = tc.get_int_list("pool_after", {0, 1});
  net.extractor.pool_after.assign(pools.begin(), pools.end());
  net.parts = tc.get_int("parts", 4);
  net.embed_dim = tc.get_int("embed_dim", 32);
  net.clip_len = tc.get_int("clip_len", 8);
  net.margin = tc.get_double("margin", 0.2);
  // num_classes is derived from the data, never from the config.

  s.cfg.u = int(tc.get_int("u", 1));
  s.cfg.lr_w = tc.get_double("lr_w", 1e-3);
  s.cfg.lr_alpha = tc.get_double("lr_alpha", 1e-3);
  s.cfg.p = int(tc.get_int("p", 2));
  s.cfg.k = int(tc.get_int("k", 2));
  s.cfg.iterations = int(tc.get_int("iterations", 2000));
  s.cfg.retrain_iterations = int(tc.get_int("retrain_iterations", 3000));
  s.cfg.val_fraction = tc.get_double("val_fraction", 0.4);
  s.cfg.seed = tc.get_uint("seed", 7);
  s.cfg.checkpoint_every = int(tc.get_int("checkpoint_every", 500));
  s.gallery_n = int(tc.get_int("eval_gallery_per_id", 1));
  s.probe_n = int(tc.get_int("eval_probe_per_id", 2));
  if (s.gallery_n < 1 || s.probe_n < 1)
    throw clash::FormatError("config: eval_gallery_per_id and eval_probe_per_id must be >= 1");

  if (seed_override) {
    char* end = nullptr;
    s.cfg.seed = std::strtoull(seed_override->c_str(), &end, 10);
    if (end == seed_override->c_str() || *end != '\0')
      throw clash::FormatError("--seed: expected an unsigned integer, got '" + *seed_override + "'");
  }

  // Echo user text verbatim; overrides and absent keys get canonical text.
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%llu", (unsigned long long)s.cfg.seed);
  for (const auto& d : kConfigSchema) {
    std::string v = tc.get_string(d.key, d.fallback);
    if (seed_override && std::string(d.key) == "seed") v = buf;
    s.resolved.emplace_back(d.key, v);
  }
  return s;
}

void write_config_snapshot(const std::string& dir, const RunSetup& s) {
  std::ofstream out(fs::path(dir) / "config.txt", std::ios::binary);
  if (!out) throw clash::FormatError("cannot write config snapshot in " + dir);
  for (const auto& [k, v] : s.resolved) out << k << " = " << v << "\n";
}

// ---------------------------------------------------------------------------
// Input fingerprints. Sequences are digested over their decoded content
// (dims + mask bytes) so the manifest pins what the run actually consumed,
// independent of on-disk encoding details.

std::uint64_t sequence_digest(const clash::SilhouetteSequence& seq) {
  std::vector<std::uint8_t> buf;
  for (const auto& f : seq.frames) {
    buf.push_back(std::uint8_t(f.height));
    buf.push_back(std::uint8_t(f.width));
    buf.insert(buf.end(), f.mask.begin(), f.mask.end());
  }
  return clash::fnv1a(buf.data(), buf.size());
}

std::string sequence_name(const clash::SilhouetteSequence& seq) {
  if (seq.subject_id.empty() && seq.view_id.empty()) return "sequence";
  if (seq.view_id.empty()) return seq.subject_id;
  return seq.subject_id + "_" + seq.view_id;
}

void add_sequence_inputs(clash::RunManifest& m,
                         const std::vector<clash::SilhouetteSequence>& seqs) {
  for (const auto& s : seqs)
    m.inputs.emplace_back(sequence_name(s), sequence_digest(s));
}

// Loads either a manifest CSV (regular file) or a single directory of frames.
std::vector<clash::SilhouetteSequence> load_silhouettes(const std::string& in) {
  if (fs::is_directory(in)) {
    clash::SilhouetteSequence seq = clash::load_sequence_dir(in);
    seq.subject_id = fs::path(in).filename().string();
    return {std::move(seq)};
  }
  if (!fs::exists(in)) throw clash::FormatError("no such input: " + in);
  return clash::load_manifest(in);
}

std::vector<clash::SilhouetteSequence> corpus_or_manifest(const RunSetup& s) {
  if (s.data.empty()) return clash::make_corpus(s.corpus);
  return clash::load_manifest(s.data);
}

// ---------------------------------------------------------------------------
// Deterministic fan-out: runs fn(0..n-1) on `threads` workers in strided
// chunks, then rethrows the lowest-index exception. Output slots are
// preallocated by the caller, so scheduling cannot reorder results.

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errs;
  errs.resize(std::size_t(n));
  std::vector<std::thread> pool;
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += threads) {
        try {
          fn(i);
        } catch (...) {
          errs[std::size_t(i)] = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

std::string fmt_fraction(double v) {
  char buf[32];
  if (v == std::floor(v) && std::abs(v) < 1e15)
    std::snprintf(buf, sizeof(buf), "%.1f", v);
  else
    std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// synthesize: walker corpus -> PGM tree + manifest CSV.

int cmd_synthesize(const std::string& out, const clash::CorpusSpec& spec) {
  const auto seqs = clash::make_corpus(spec);
  fs::create_directories(out);

  std::ofstream csv(fs::path(out) / "manifest.csv", std::ios::binary);
  if (!csv) throw clash::FormatError("cannot write manifest.csv in " + out);
  csv << "subject_id,view_id,path\n";
  std::size_t frames = 0;
  for (const auto& seq : seqs) {
    const std::string rel = seq.subject_id + "/" + seq.view_id;
    clash::save_sequence_dir((fs::path(out) / rel).string(), seq);
    csv << seq.subject_id << "," << seq.view_id << "," << rel << "\n";
    frames += seq.frames.size();
  }
  csv.close();

  clash::RunManifest m;
  m.command = "synthesize";
  m.seed = spec.seed;
  char buf[32];
  auto put = [&](const char* k, long long v) {
    std::snprintf(buf, sizeof(buf), "%lld", v);
    m.config.emplace_back(k, buf);
  };
  put("ids", spec.ids);
  put("seqs_per_id", spec.seqs_per_id);
  put("frames", spec.frames);
  put("height", spec.height);
  put("width", spec.width);
  std::snprintf(buf, sizeof(buf), "%.17g", spec.noise_prob);
  m.config.emplace_back("noise", buf);
  clash::write_manifest(out, m);

  std::printf("sequences=%zu\n", seqs.size());
  std::printf("frames=%zu\n", frames);
  std::printf("manifest=%s\n", (fs::path(out) / "manifest.csv").string().c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// transform: silhouettes -> one .dstf per sequence (+ optional previews).

int cmd_transform(const std::string& in, const std::string& out,
                  const std::string& norm, const std::string& degenerate,
                  bool preview, int threads) {
  clash::NormMode nm;
  if (norm == "per-frame")
    nm = clash::NormMode::PerFrame;
  else if (norm == "per-seq")
    nm = clash::NormMode::PerSequence;
  else
    throw clash::FormatError("--norm: expected per-frame or per-seq, got '" + norm + "'");

  clash::DegeneratePolicy policy;
  if (degenerate == "skip")
    policy = clash::DegeneratePolicy::Skip;
  else if (degenerate == "zero")
    policy = clash::DegeneratePolicy::ZeroFill;
  else if (degenerate == "error")
    policy = clash::DegeneratePolicy::Error;
  else
    throw clash::FormatError("--degenerate: expected skip, zero or error, got '" + degenerate + "'");

  const auto seqs = load_silhouettes(in);
  fs::create_directories(out);

  std::vector<clash::DstfSequence> fields(seqs.size());
  parallel_for(int(seqs.size()), threads, [&](int i) {
    try {
      fields[std::size_t(i)] = clash::transform_sequence(seqs[std::size_t(i)], policy, nm);
    } catch (const clash::EmptyBoundaryError& e) {
      throw clash::EmptyBoundaryError(sequence_name(seqs[std::size_t(i)]) + ": " + e.what());
    }
  });

  std::size_t frames = 0;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const std::string name = sequence_name(seqs[i]);
    clash::save_dstf((fs::path(out) / (name + ".dstf")).string(), fields[i]);
    frames += fields[i].frames.size();
    if (preview) {
      const fs::path pdir = fs::path(out) / "preview" / name;
      fs::create_directories(pdir);
      char fname[32];
      for (std::size_t t = 0; t < fields[i].frames.size(); ++t) {
        std::snprintf(fname, sizeof(fname), "%04zu.pgm", t);
        clash::save_pgm_file((pdir / fname).string(),
                             clash::dstf_preview(fields[i].frames[t]));
      }
    }
  }

  clash::RunManifest m;
  m.command = "transform";
  m.config.emplace_back("in", in);
  m.config.emplace_back("norm", norm);
  m.config.emplace_back("degenerate", degenerate);
  m.config.emplace_back("preview", preview ? "1" : "0");
  add_sequence_inputs(m, seqs);
  clash::write_manifest(out, m);

  std::printf("sequences=%zu\n", seqs.size());
  std::printf("frames=%zu\n", frames);
  std::printf("out=%s\n", out.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// metrics: per-frame entropies, corpus summary, GEnI maps.

int cmd_metrics(const std::string& sil_in, const std::string& dstf_in,
                int bins, const std::string& out_csv, int threads) {
  if (bins < 2) throw clash::FormatError("--bins must be >= 2");
  const auto seqs = load_silhouettes(sil_in);
  if (!fs::is_directory(dstf_in))
    throw clash::FormatError("no such dstf directory: " + dstf_in);

  struct SeqMetrics {
    std::vector<double> sil_h, dstf_h;
    clash::GeniMap geni;
  };
  std::vector<SeqMetrics> per(seqs.size());
  std::vector<clash::DstfSequence> fields(seqs.size());
  std::vector<std::string> names(seqs.size());
  std::vector<std::string> dstf_paths(seqs.size());
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    names[i] = sequence_name(seqs[i]);
    dstf_paths[i] = (fs::path(dstf_in) / (names[i] + ".dstf")).string();
    if (!fs::exists(dstf_paths[i]))
      throw clash::FormatError("missing descriptor file: " + dstf_paths[i]);
  }

  parallel_for(int(seqs.size()), threads, [&](int i) {
    const auto& sil = seqs[std::size_t(i)];
    auto& slot = per[std::size_t(i)];
    fields[std::size_t(i)] = clash::load_dstf(dstf_paths[std::size_t(i)]);
    const auto& dstf = fields[std::size_t(i)];
    if (dstf.frames.size() != sil.frames.size())
      throw clash::ContractError("sequence " + names[std::size_t(i)] + ": " +
                                 std::to_string(sil.frames.size()) + " silhouette vs " +
                                 std::to_string(dstf.frames.size()) + " descriptor frames");
    for (const auto& f : sil.frames) slot.sil_h.push_back(clash::image_entropy(f, bins));
    for (const auto& f : dstf.frames) slot.dstf_h.push_back(clash::image_entropy(f, bins));
    slot.geni = clash::geni(sil);
  });

  const fs::path csv_path(out_csv);
  const fs::path out_dir = csv_path.parent_path().empty() ? fs::path(".") : csv_path.parent_path();
  fs::create_directories(out_dir);
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) throw clash::FormatError("cannot write " + out_csv);
  csv << "sequence,frame,sil_entropy,dstf_entropy,ratio\n";
  char row[160];
  double sum_sil = 0.0, sum_dstf = 0.0;
  std::size_t frames = 0;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    for (std::size_t t = 0; t < per[i].sil_h.size(); ++t) {
      std::snprintf(row, sizeof(row), "%s,%zu,%.9g,%.9g,\n", names[i].c_str(), t,
                    per[i].sil_h[t], per[i].dstf_h[t]);
      csv << row;
      sum_sil += per[i].sil_h[t];
      sum_dstf += per[i].dstf_h[t];
      ++frames;
    }
    clash::save_pgm_file((out_dir / ("geni_" + names[i] + ".pgm")).string(),
                         clash::geni_to_gray(per[i].geni));
  }
  const double mean_sil = frames ? sum_sil / double(frames) : 0.0;
  const double mean_dstf = frames ? sum_dstf / double(frames) : 0.0;
  if (mean_sil <= 0.0)
    throw clash::NumericError("metrics: zero mean silhouette entropy, ratio undefined");
  const double ratio = mean_dstf / mean_sil;
  std::snprintf(row, sizeof(row), "all,mean,%.9g,%.9g,%.9g\n", mean_sil, mean_dstf, ratio);
  csv << row;
  csv.close();

  clash::RunManifest m;
  m.command = "metrics";
  m.config.emplace_back("sil", sil_in);
  m.config.emplace_back("dstf", dstf_in);
  m.config.emplace_back("bins", std::to_string(bins));
  add_sequence_inputs(m, seqs);
  for (const auto& p : dstf_paths) m.inputs.emplace_back(p, clash::fnv1a_file(p));
  clash::write_manifest(out_dir.string(), m);

  std::printf("sequences=%zu\n", seqs.size());
  std::printf("frames=%zu\n", frames);
  std::printf("mean_sil_entropy=%.9g\n", mean_sil);
  std::printf("mean_dstf_entropy=%.9g\n", mean_dstf);
  std::printf("entropy_ratio=%.9g\n", ratio);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// search / retrain / evaluate share data loading and the protocol split.

struct LoadedData {
  clash::data::GaitDataset all;
  clash::data::ProtocolSplit protocol;
  std::vector<clash::SilhouetteSequence> seqs;
};

LoadedData prepare_data(RunSetup& s) {
  LoadedData d;
  d.seqs = corpus_or_manifest(s);
  d.all = clash::data::build_dataset(d.seqs, s.norm);
  d.protocol = clash::data::split_protocol(d.all, s.gallery_n, s.probe_n, s.cfg.seed);
  s.cfg.net.num_classes = d.all.num_classes;
  return d;
}

clash::RunManifest run_manifest(const char* command, const RunSetup& s,
                                const LoadedData& d) {
  clash::RunManifest m;
  m.command = command;
  m.seed = s.cfg.seed;
  m.config = s.resolved;
  if (!s.data.empty()) m.inputs.emplace_back(s.data, clash::fnv1a_file(s.data));
  add_sequence_inputs(m, d.seqs);
  return m;
}

void write_loss_csv(const std::string& path,
                    const std::vector<std::pair<const char*, const std::vector<double>*>>& phases) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw clash::FormatError("cannot write " + path);
  out << "phase,step,loss\n";
  char row[96];
  for (const auto& [phase, losses] : phases)
    for (std::size_t i = 0; i < losses->size(); ++i) {
      std::snprintf(row, sizeof(row), "%s,%zu,%.17g\n", phase, i + 1, (*losses)[i]);
      out << row;
    }
}

void write_alpha_history(const std::string& path,
                         const std::vector<std::array<std::array<double, clash::net::kNumOps>,
                                                      clash::net::kNumEdges>>& hist) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw clash::FormatError("cannot write " + path);
  out << "step";
  for (int e = 0; e < clash::net::kNumEdges; ++e)
    for (int o = 0; o < clash::net::kNumOps; ++o)
      out << ",e" << e << "_" << clash::net::op_name(clash::net::OpKind(o));
  out << "\n";
  char cell[40];
  for (std::size_t r = 0; r < hist.size(); ++r) {
    out << r;
    for (const auto& edge : hist[r])
      for (double a : edge) {
        std::snprintf(cell, sizeof(cell), ",%.17g", a);
        out << cell;
      }
    out << "\n";
  }
}

int cmd_search(RunSetup s, const std::string& out) {
  LoadedData d = prepare_data(s);
  auto [train, val] = clash::data::split_dataset(d.protocol.train, s.cfg.val_fraction, s.cfg.seed);
  clash::net::validate(s.cfg);
  fs::create_directories(out);
  write_config_snapshot(out, s);

  const auto res = clash::net::search(s.cfg, train, val, out);

  const auto arch = clash::net::discretize(res.arch);
  clash::net::save_architecture((fs::path(out) / "architecture.txt").string(), arch);
  write_alpha_history((fs::path(out) / "alpha_history.csv").string(), res.alpha_history);
  write_loss_csv((fs::path(out) / "loss.csv").string(),
                 {{"train", &res.train_loss}, {"val", &res.val_loss}});
  clash::write_manifest(out, run_manifest("search", s, d));

  std::printf("w_steps=%lld\n", (long long)res.w_steps);
  std::printf("alpha_steps=%lld\n", (long long)res.alpha_steps);
  if (!res.train_loss.empty()) {
    std::printf("train_loss_first=%.9g\n", res.train_loss.front());
    std::printf("train_loss_final=%.9g\n", res.train_loss.back());
  }
  if (!res.val_loss.empty()) {
    std::printf("val_loss_first=%.9g\n", res.val_loss.front());
    std::printf("val_loss_final=%.9g\n", res.val_loss.back());
  }
  std::printf("single_identity_warnings=%d\n", res.single_identity_warnings);
  std::printf("architecture=%s\n", (fs::path(out) / "architecture.txt").string().c_str());
  for (int e = 0; e < clash::net::kNumEdges; ++e)
    std::printf("edge%d=%s\n", e, clash::net::op_name((*arch.discrete)[std::size_t(e)]));
  return kExitOk;
}

int cmd_retrain(RunSetup s, const std::string& arch_path, const std::string& out) {
  LoadedData d = prepare_data(s);
  clash::net::CellArchitecture arch = clash::net::load_architecture(arch_path);
  if (!arch.discrete) arch = clash::net::discretize(arch);
  clash::net::validate(s.cfg);
  fs::create_directories(out);
  write_config_snapshot(out, s);

  const auto res = clash::net::retrain(s.cfg, arch, d.protocol.train,
                                       s.cfg.retrain_iterations, out);

  auto items = clash::ad::snapshot(res.net->weights());
  const auto alpha_items = clash::ad::snapshot(res.net->alphas());
  items.insert(items.end(), alpha_items.begin(), alpha_items.end());
  const std::string weights_path = (fs::path(out) / "weights_final.ckpt").string();
  clash::ad::save_checkpoint(weights_path, items);
  write_loss_csv((fs::path(out) / "loss.csv").string(), {{"retrain", &res.train_loss}});

  auto m = run_manifest("retrain", s, d);
  m.inputs.emplace_back(arch_path, clash::fnv1a_file(arch_path));
  clash::write_manifest(out, m);

  std::printf("iterations=%d\n", s.cfg.retrain_iterations);
  if (!res.train_loss.empty()) {
    std::printf("train_loss_first=%.9g\n", res.train_loss.front());
    std::printf("train_loss_final=%.9g\n", res.train_loss.back());
  }
  std::printf("single_identity_warnings=%d\n", res.single_identity_warnings);
  std::printf("weights=%s\n", weights_path.c_str());
  return kExitOk;
}

int cmd_evaluate(RunSetup s, const std::string& arch_path,
                 const std::string& weights_path, const std::string& out) {
  LoadedData d = prepare_data(s);
  clash::net::CellArchitecture arch = clash::net::load_architecture(arch_path);
  if (!arch.discrete) arch = clash::net::discretize(arch);
  clash::net::validate(s.cfg);

  clash::net::Supernet net(s.cfg.net, clash::seed_combine(s.cfg.seed, 200));
  const auto items = clash::ad::load_checkpoint(weights_path);
  clash::ad::restore(net.weights(), items);
  clash::ad::restore(net.alphas(), items);

  const double r1 = clash::net::evaluate_rank1(net, arch, d.protocol.gallery, d.protocol.probe);

  if (!out.empty()) {
    fs::create_directories(out);
    write_config_snapshot(out, s);
    auto m = run_manifest("evaluate", s, d);
    m.inputs.emplace_back(arch_path, clash::fnv1a_file(arch_path));
    m.inputs.emplace_back(weights_path, clash::fnv1a_file(weights_path));
    clash::write_manifest(out, m);
    std::ofstream res(fs::path(out) / "result.txt", std::ios::binary);
    res << "rank1=" << fmt_fraction(r1) << "\n";
  }

  std::printf("gallery=%zu\n", d.protocol.gallery.samples.size());
  std::printf("probes=%zu\n", d.protocol.probe.samples.size());
  std::printf("rank1=%s\n", fmt_fraction(r1).c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// gradcheck: finite-difference audit of every primitive and candidate op.

// Forward equals x*x, but one factor is detached from the tape, so the
// reported gradient is x instead of 2x. Exercises the failure path honestly:
// the checker must flag it, the CLI must exit 5 naming it.
clash::ad::GradcheckSpec injected_fault_spec() {
  clash::ad::GradcheckSpec s;
  s.name = "injected-fault";
  s.shapes.push_back(clash::ad::Shape{{2, 1, 2, 2, 2}});
  s.build = [](clash::ad::Tape& t, const std::vector<clash::ad::Tensor>& in) {
    clash::ad::Tensor detached = in[0];
    detached.node = -1;
    return clash::ad::mul(t, detached, in[0]);
  };
  return s;
}

int cmd_gradcheck(const std::string& ops, int trials, std::uint64_t seed,
                  bool inject_fault, const std::string& out) {
  std::vector<clash::ad::GradcheckSpec> specs = clash::ad::primitive_gradchecks();
  for (auto& s : clash::net::gait_op_gradchecks()) specs.push_back(std::move(s));
  specs.push_back(clash::net::composite_weight_gradcheck());
  specs.push_back(clash::net::composite_alpha_gradcheck());
  if (inject_fault) specs.push_back(injected_fault_spec());

  if (ops != "all") {
    // The injected fault must fail the run even when --ops narrows the list.
    std::vector<clash::ad::GradcheckSpec> picked;
    bool matched = false;
    for (auto& s : specs) {
      matched |= s.name == ops;
      if (s.name == ops || (inject_fault && s.name == "injected-fault"))
        picked.push_back(std::move(s));
    }
    if (!matched) {
      std::string names;
      for (const auto& s : specs) names += (names.empty() ? "" : ", ") + s.name;
      throw clash::FormatError("--ops: unknown op '" + ops + "' (available: " + names + ")");
    }
    specs = std::move(picked);
  }

  std::string first_bad;
  std::string table;
  char row[128];
  for (auto& spec : specs) {
    if (trials > 0) spec.trials = trials;
    const auto r = clash::ad::run_gradcheck(spec, seed);
    std::printf("gradcheck.%s=%.3e\n", r.name.c_str(), r.max_rel);
    std::snprintf(row, sizeof(row), "%s,%.3e,%d,%s\n", r.name.c_str(), r.max_rel,
                  r.trials, r.ok ? "ok" : "FAIL");
    table += row;
    if (!r.ok && first_bad.empty()) first_bad = r.name;
  }
  std::printf("gradcheck_ok=%d\n", first_bad.empty() ? 1 : 0);

  if (!out.empty()) {
    fs::create_directories(out);
    std::ofstream csv(fs::path(out) / "gradcheck.csv", std::ios::binary);
    csv << "name,max_rel,trials,status\n" << table;
    clash::RunManifest m;
    m.command = "gradcheck";
    m.seed = seed;
    m.config.emplace_back("ops", ops);
    m.config.emplace_back("trials", std::to_string(trials));
    m.config.emplace_back("inject_fault", inject_fault ? "1" : "0");
    clash::write_manifest(out, m);
  }

  if (!first_bad.empty()) {
    std::fprintf(stderr, "gradcheck failed: %s exceeds the 1e-4 tolerance\n",
                 first_bad.c_str());
    return kExitGradcheck;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"clash " + std::string(clash::kVersion) +
               " - silhouette descriptor and cell-search pipeline"};
  app.require_subcommand(0, 1);
  bool help_config = false;
  app.add_flag("--help-config", help_config, "print the config schema and exit");

  // synthesize
  auto* syn = app.add_subcommand("synthesize", "generate the walker corpus as PGM sequences");
  clash::CorpusSpec spec;
  std::string syn_out;
  syn->add_option("--out", syn_out, "output directory")->required();
  syn->add_option("--ids", spec.ids, "identities");
  syn->add_option("--seqs", spec.seqs_per_id, "sequences per identity");
  syn->add_option("--frames", spec.frames, "frames per sequence");
  syn->add_option("--height", spec.height, "frame height");
  syn->add_option("--width", spec.width, "frame width");
  syn->add_option("--noise", spec.noise_prob, "per-pixel flip probability");
  syn->add_option("--seed", spec.seed, "generator seed");

  // transform
  auto* tr = app.add_subcommand("transform", "silhouettes -> signed distance descriptors");
  std::string tr_in, tr_out, tr_norm = "per-frame", tr_degen = "zero";
  bool tr_preview = false;
  int tr_threads = 1;
  tr->add_option("--in", tr_in, "frame directory or manifest CSV")->required();
  tr->add_option("--out", tr_out, "output directory")->required();
  tr->add_option("--norm", tr_norm, "per-frame | per-seq");
  tr->add_option("--degenerate", tr_degen, "blank-frame policy: skip | zero | error");
  tr->add_flag("--preview", tr_preview, "also write PGM previews");
  tr->add_option("--threads", tr_threads, "worker threads (output is thread-count invariant)");

  // metrics
  auto* me = app.add_subcommand("metrics", "entropy and GEnI report for matched sequences");
  std::string me_sil, me_dstf, me_out;
  int me_bins = 256, me_threads = 1;
  me->add_option("--sil", me_sil, "silhouette directory or manifest CSV")->required();
  me->add_option("--dstf", me_dstf, "directory of .dstf files")->required();
  me->add_option("--bins", me_bins, "histogram bins");
  me->add_option("--out", me_out, "output CSV path")->required();
  me->add_option("--threads", me_threads, "worker threads (output is thread-count invariant)");

  // search / retrain / evaluate
  std::string cfg_path, run_out, run_seed, arch_path, weights_path;
  auto add_run_opts = [&](CLI::App* c, bool needs_out) {
    c->add_option("--config", cfg_path, "structured-text config (see --help-config)");
    auto* o = c->add_option("--out", run_out, "run directory");
    if (needs_out) o->required();
    c->add_option("--seed", run_seed, "override the config seed");
  };
  auto* se = app.add_subcommand("search", "bilevel architecture search");
  add_run_opts(se, true);
  auto* re = app.add_subcommand("retrain", "train a discretized architecture from scratch");
  add_run_opts(re, true);
  re->add_option("--arch", arch_path, "architecture file")->required();
  auto* ev = app.add_subcommand("evaluate", "rank-1 identification on the held-out protocol");
  add_run_opts(ev, false);
  ev->add_option("--arch", arch_path, "architecture file")->required();
  ev->add_option("--weights", weights_path, "checkpoint with trained weights")->required();

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "finite-difference audit of gradients");
  std::string gc_ops = "all", gc_out;
  int gc_trials = 0;
  std::uint64_t gc_seed = 1;
  bool gc_inject = false;
  gc->add_option("--ops", gc_ops, "all or one op/primitive name");
  gc->add_option("--trials", gc_trials, "override trials per check");
  gc->add_option("--seed", gc_seed, "direction-sampling seed");
  gc->add_flag("--inject-fault", gc_inject, "add a deliberately wrong gradient (must fail)");
  gc->add_option("--out", gc_out, "optional report directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  if (help_config) {
    print_config_schema();
    return kExitOk;
  }
  if (app.get_subcommands().empty()) {
    std::fprintf(stderr, "%s\n", app.help().c_str());
    return kExitInput;
  }

  try {
    if (*syn) return cmd_synthesize(syn_out, spec);
    if (*tr) return cmd_transform(tr_in, tr_out, tr_norm, tr_degen, tr_preview, tr_threads);
    if (*me) return cmd_metrics(me_sil, me_dstf, me_bins, me_out, me_threads);
    if (*gc) return cmd_gradcheck(gc_ops, gc_trials, gc_seed, gc_inject, gc_out);

    clash::TextConfig tc = cfg_path.empty() ? clash::TextConfig::parse("")
                                            : clash::TextConfig::load(cfg_path);
    RunSetup setup = resolve_setup(tc, run_seed.empty() ? nullptr : &run_seed);
    if (*se) return cmd_search(std::move(setup), run_out);
    if (*re) return cmd_retrain(std::move(setup), arch_path, run_out);
    if (*ev) return cmd_evaluate(std::move(setup), arch_path, weights_path, run_out);
  } catch (const clash::EmptyBoundaryError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitDegenerate;
  } catch (const clash::NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumeric;
  } catch (const clash::FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  } catch (const clash::ContractError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  }
  return kExitInput;
}
