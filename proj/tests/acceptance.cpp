// Acceptance gate: one PASS/FAIL line per criterion, exit code = number of
// failures. Criteria 1-8 run in-process; 9-10 drive the clash binary on the
// default desk configuration. Thresholds were calibrated on the first desk
// run and are frozen here.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "clash/arch.hpp"
#include "clash/dataset.hpp"
#include "clash/dstf.hpp"
#include "clash/edt.hpp"
#include "clash/errors.hpp"
#include "clash/gradcheck.hpp"
#include "clash/metrics.hpp"
#include "clash/rng.hpp"
#include "clash/search.hpp"
#include "clash/silhouette.hpp"
#include "clash/supernet.hpp"
#include "clash/tape.hpp"
#include "clash/tensor.hpp"
#include "clash/walker.hpp"

#ifndef CLASH_BIN
#error "CLASH_BIN must point at the clash executable"
#endif

namespace fs = std::filesystem;
using clash::ad::Shape;
using clash::ad::Tape;
using clash::ad::Tensor;
using namespace clash::net;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("criterion %2d: %s - %s\n", criterion, pass ? "PASS" : "FAIL",
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double now_s() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof(buf), f, ap);
  va_end(ap);
  return buf;
}

// --- criterion 1: EDT vs O(n^2) brute force on 200 seeded maps ------------

std::vector<std::int32_t> brute_force_edt(const clash::PixelClassMap& m) {
  std::vector<std::int32_t> out(std::size_t(m.height) * m.width);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      std::int64_t best = -1;
      for (int by = 0; by < m.height; ++by)
        for (int bx = 0; bx < m.width; ++bx) {
          if (m.at(by, bx) != clash::PixelClass::Boundary) continue;
          const std::int64_t d2 = std::int64_t(y - by) * (y - by) +
                                  std::int64_t(x - bx) * (x - bx);
          if (best < 0 || d2 < best) best = d2;
        }
      out[std::size_t(y) * m.width + x] = std::int32_t(best);
    }
  return out;
}

void criterion_1() {
  const double t0 = now_s();
  clash::Rng rng(404);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int h = 1 + int(rng.uniform_int(32));
    const int w = 1 + int(rng.uniform_int(32));
    clash::PixelClassMap m;
    m.height = h;
    m.width = w;
    m.classes.resize(std::size_t(h) * w);
    bool any = false;
    for (auto& c : m.classes) {
      const std::uint64_t r = rng.uniform_int(4);
      c = r == 0 ? clash::PixelClass::Boundary
                 : (r == 1 ? clash::PixelClass::Foreground
                           : clash::PixelClass::Background);
      any = any || c == clash::PixelClass::Boundary;
    }
    if (!any) m.classes[rng.uniform_int(m.classes.size())] = clash::PixelClass::Boundary;

    const auto fast = clash::edt_squared(m);
    const auto slow = brute_force_edt(m);
    if (fast != slow) {
      report(1, false, fmt("map %d (%dx%d): exact mismatch", trial, h, w));
      return;
    }
    ++checked;
  }
  const double dt = now_s() - t0;
  report(1, checked == 200 && dt < 5.0,
         fmt("200/200 maps exact vs brute force in %.2f s (budget 5 s)", dt));
}

// --- criteria 2-4 share the shipped corpus and its descriptors ------------

struct CorpusData {
  std::vector<clash::SilhouetteSequence> sil;
  std::vector<clash::DstfSequence> dstf;
};

CorpusData shipped_corpus() {
  CorpusData d;
  d.sil = clash::make_corpus(clash::CorpusSpec{});  // 8 ids x 8 seqs x 16 frames
  for (const auto& s : d.sil)
    d.dstf.push_back(clash::transform_sequence(s, clash::DegeneratePolicy::Error));
  return d;
}

void criterion_2(const CorpusData& c) {
  std::size_t frames = 0;
  for (std::size_t i = 0; i < c.sil.size(); ++i)
    for (std::size_t t = 0; t < c.sil[i].frames.size(); ++t) {
      const auto classes = clash::classify_pixels(c.sil[i].frames[t]);
      const auto& f = c.dstf[i].frames[t];
      double fore_max = 0.0, back_min = 0.0;
      bool fore = false, back = false;
      for (int y = 0; y < f.height; ++y)
        for (int x = 0; x < f.width; ++x) {
          const double v = f.field[std::size_t(y) * f.width + x];
          if (v < -1.0 || v > 1.0 || !std::isfinite(v)) {
            report(2, false, fmt("%s/%s frame %zu: value %g out of [-1,1]",
                                 c.sil[i].subject_id.c_str(),
                                 c.sil[i].view_id.c_str(), t, v));
            return;
          }
          switch (classes.at(y, x)) {
            case clash::PixelClass::Boundary:
              if (v != 0.0) {
                report(2, false, fmt("frame %zu: boundary pixel not 0", t));
                return;
              }
              break;
            case clash::PixelClass::Foreground:
              if (v <= 0.0) {
                report(2, false, fmt("frame %zu: foreground pixel %g <= 0", t, v));
                return;
              }
              fore = true;
              fore_max = std::max(fore_max, v);
              break;
            case clash::PixelClass::Background:
              if (v >= 0.0) {
                report(2, false, fmt("frame %zu: background pixel %g >= 0", t, v));
                return;
              }
              back = true;
              back_min = std::min(back_min, v);
              break;
          }
        }
      if ((fore && fore_max != 1.0) || (back && back_min != -1.0)) {
        report(2, false, fmt("frame %zu: extrema %g/%g not exactly +-1", t,
                             fore_max, back_min));
        return;
      }
      ++frames;
    }
  report(2, true, fmt("sign partition, [-1,1] range and exact +-1 extrema on "
                      "%zu frames (8 ids x 8 seqs x 16)", frames));
}

void criterion_3(const CorpusData& c) {
  double sil_sum = 0.0, dstf_sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < c.sil.size(); ++i) {
    for (const auto& f : c.sil[i].frames) sil_sum += clash::image_entropy(f, 256);
    for (const auto& f : c.dstf[i].frames) dstf_sum += clash::image_entropy(f, 256);
    n += c.sil[i].frames.size();
  }
  const double ratio = (dstf_sum / double(n)) / (sil_sum / double(n));
  report(3, ratio >= 2.0,
         fmt("mean descriptor/silhouette entropy ratio %.3f at 256 bins "
             "(threshold 2.0, no upper bound)", ratio));
}

void criterion_4(const CorpusData& c) {
  std::size_t pairs = 0, dstf_wins = 0;
  for (std::size_t i = 0; i < c.sil.size(); ++i)
    for (std::size_t t = 1; t < c.sil[i].frames.size(); ++t) {
      const auto ds = clash::frame_difference(c.sil[i], t);
      const auto dd = clash::frame_difference(c.dstf[i], t);
      ++pairs;
      if (dd.changed_fraction > ds.changed_fraction) ++dstf_wins;
    }
  const double frac = double(dstf_wins) / double(pairs);
  report(4, frac >= 0.95,
         fmt("descriptor changed-pixel fraction exceeds silhouette on "
             "%zu/%zu consecutive pairs (%.1f%%, threshold 95%%)",
             dstf_wins, pairs, 100.0 * frac));
}

void criterion_5() {
  const double t0 = now_s();
  std::vector<clash::ad::GradcheckSpec> specs = clash::ad::primitive_gradchecks();
  for (auto& s : gait_op_gradchecks()) specs.push_back(std::move(s));
  double worst = 0.0;
  std::string worst_name = "-";
  for (const auto& spec : specs) {
    if (spec.trials < 20) {
      report(5, false, spec.name + ": fewer than 20 trials");
      return;
    }
    const auto r = clash::ad::run_gradcheck(spec, 0xACCE57);
    if (r.max_rel > worst) {
      worst = r.max_rel;
      worst_name = r.name;
    }
    if (!r.ok) {
      report(5, false, fmt("%s: max relative error %.3e >= 1e-4",
                           r.name.c_str(), r.max_rel));
      return;
    }
  }
  const double dt = now_s() - t0;
  report(5, dt < 120.0,
         fmt("%zu primitives+ops, worst %.3e (%s) < 1e-4, %.1f s "
             "(budget 120 s)", specs.size(), worst, worst_name.c_str(), dt));
}

// --- criteria 6-7: GeM limits and mixed-op semantics ----------------------

SupernetConfig toy_net() {
  SupernetConfig cfg;
  cfg.extractor.channels = {2, 3};
  cfg.extractor.pool_after = {0};
  cfg.parts = 2;
  cfg.embed_dim = 4;
  cfg.num_classes = 2;
  cfg.clip_len = 4;
  return cfg;
}

Tensor random_tensor(const Shape& s, std::uint64_t seed, double lo, double hi) {
  Tensor t = Tensor::zeros(s);
  clash::Rng rng(seed);
  for (std::int64_t i = 0; i < t.numel(); ++i) t.ptr()[i] = rng.uniform(lo, hi);
  return t;
}

void criterion_6() {
  {  // k = 1 -> temporal mean within 1e-9
    Supernet net(toy_net(), 5);
    net.weights().at("gem.k").ptr()[0] = 1.0;
    Tape tape;
    const auto w = net.weights().leaves(tape);
    const Tensor x = random_tensor(Shape{{2, 3, 4, 4, 3}}, 11, 0.5, 2.0);
    const Tensor g = net.gem_pool(tape, x, w);
    const std::int64_t plane = 4 * 3;
    for (std::int64_t bc = 0; bc < 2 * 3; ++bc)
      for (std::int64_t s = 0; s < plane; ++s) {
        double mean = 0.0;
        for (std::int64_t t = 0; t < 4; ++t)
          mean += x.ptr()[(bc * 4 + t) * plane + s];
        mean /= 4.0;
        const double v = g.ptr()[bc * plane + s];
        if (std::abs(v - mean) > 1e-9 * std::max(1.0, std::abs(mean))) {
          report(6, false, fmt("k=1: pool %g vs temporal mean %g", v, mean));
          return;
        }
      }
  }
  {  // k = 64, T = 8 -> inside [max * 8^(-1/64), max]
    SupernetConfig cfg = toy_net();
    cfg.clip_len = 8;
    Supernet net(cfg, 5);
    net.weights().at("gem.k").ptr()[0] = 64.0;
    Tape tape;
    const auto w = net.weights().leaves(tape);
    const Tensor x = random_tensor(Shape{{1, 3, 8, 4, 3}}, 13, 0.5, 2.0);
    const Tensor g = net.gem_pool(tape, x, w);
    const std::int64_t plane = 4 * 3;
    const double lo = std::pow(8.0, -1.0 / 64.0);
    for (std::int64_t c = 0; c < 3; ++c)
      for (std::int64_t s = 0; s < plane; ++s) {
        double mx = 0.0;
        for (std::int64_t t = 0; t < 8; ++t)
          mx = std::max(mx, x.ptr()[(c * 8 + t) * plane + s]);
        const double v = g.ptr()[c * plane + s];
        if (v < mx * lo - 1e-12 || v > mx + 1e-12) {
          report(6, false,
                 fmt("k=64: pool %g outside [%g, %g]", v, mx * lo, mx));
          return;
        }
      }
  }
  report(6, true, "k=1 equals temporal mean (1e-9); k=64,T=8 inside the "
                  "analytic max band");
}

void criterion_7() {
  const Shape fs{{1, 3, 4, 4, 3}};
  const Tensor x = random_tensor(fs, 7, -1.0, 1.0);
  const Tensor y = random_tensor(fs, 9, -1.0, 1.0);
  {  // uniform alpha on edge 0, other edges saturated on Zero
    Supernet net(toy_net(), 5);
    CellArchitecture arch{};
    for (int e = 1; e < kNumEdges; ++e)
      arch.alpha[std::size_t(e)][std::size_t(OpKind::Zero)] = 40.0;
    net.set_alpha(arch);
    Tape tape;
    const auto w = net.weights().leaves(tape);
    const auto a = net.alphas().leaves(tape);
    const Tensor mixed = net.cell_forward(tape, x, y, w, &a[0], nullptr);

    Tensor acc = Tensor::zeros(fs);
    for (int o = 0; o < kNumOps; ++o) {
      OpParams op;
      op.kind = OpKind(o);
      const std::string prefix =
          std::string("cell.e0.") + op_name(OpKind(o)) + ".";
      for (std::size_t i = 0; i < net.weights().size(); ++i)
        if (net.weights().entry(i).name.rfind(prefix, 0) == 0)
          op.w.push_back(net.weights().entry(i).value);
      const Tensor branch = apply_op(tape, x, op);
      for (std::int64_t i = 0; i < acc.numel(); ++i)
        acc.ptr()[i] += branch.ptr()[i] / double(kNumOps);
    }
    for (std::int64_t i = 0; i < mixed.numel(); ++i)
      if (std::abs(mixed.ptr()[i] - acc.ptr()[i]) >
          1e-9 * std::max(1.0, std::abs(acc.ptr()[i]))) {
        report(7, false, fmt("uniform alpha: %g vs branch mean %g",
                             mixed.ptr()[i], acc.ptr()[i]));
        return;
      }
  }
  {  // saturated alpha vs the discrete branch
    Supernet net(toy_net(), 5);
    const std::array<OpKind, kNumEdges> choices = {
        OpKind::DepthwiseSepConv3, OpKind::SkipConnect, OpKind::AvgPool3,
        OpKind::ChannelAttention, OpKind::MaxPool3};
    CellArchitecture arch{};
    for (int e = 0; e < kNumEdges; ++e)
      arch.alpha[std::size_t(e)][std::size_t(choices[std::size_t(e)])] = 40.0;
    net.set_alpha(arch);
    Tape tape;
    const auto w = net.weights().leaves(tape);
    const auto a = net.alphas().leaves(tape);
    const Tensor relaxed = net.cell_forward(tape, x, y, w, &a[0], nullptr);
    const Tensor discrete = net.cell_forward(tape, x, y, w, nullptr, &choices);
    for (std::int64_t i = 0; i < relaxed.numel(); ++i)
      if (std::abs(relaxed.ptr()[i] - discrete.ptr()[i]) >
          1e-9 * std::max(1.0, std::abs(discrete.ptr()[i]))) {
        report(7, false, fmt("saturated alpha: %g vs discrete %g",
                             relaxed.ptr()[i], discrete.ptr()[i]));
        return;
      }
  }
  report(7, true, "uniform alpha = mean of branches and saturated alpha = "
                  "single branch, both within 1e-9");
}

void criterion_8() {
  clash::CorpusSpec spec;
  spec.ids = 4;
  spec.seqs_per_id = 4;
  spec.frames = 8;
  spec.seed = 21;
  const auto data =
      clash::data::build_dataset(clash::make_corpus(spec), clash::NormMode::PerFrame);
  const auto [train, val] = clash::data::split_dataset(data, 0.5, 3);

  std::string counts;
  for (const int u : {1, 2, 5}) {
    SearchConfig cfg;
    cfg.net = toy_net();
    cfg.net.num_classes = data.num_classes;
    cfg.u = u;
    cfg.iterations = 4;
    cfg.checkpoint_every = 0;
    const auto res = search(cfg, train, val, "");
    counts += fmt("%su=%d: %lld/%lld", counts.empty() ? "" : ", ", u,
                  (long long)res.w_steps, (long long)res.alpha_steps);
    if (res.w_steps != std::int64_t(u) * res.alpha_steps ||
        res.alpha_steps != 4) {
      report(8, false, fmt("u=%d: w_steps=%lld alpha_steps=%lld", u,
                           (long long)res.w_steps, (long long)res.alpha_steps));
      return;
    }
  }
  report(8, true, "w_steps = u x alpha_steps exactly (" + counts + ")");
}

// --- criteria 9-10: the desk-scale run through the CLI --------------------

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd =
      std::string(CLASH_BIN) + " " + args + " >" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return (status >= 0 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Mean of the val-phase losses over [begin, begin+n) in step order.
double val_window_mean(const std::vector<double>& val, std::size_t begin,
                       std::size_t n) {
  double s = 0.0;
  for (std::size_t i = begin; i < begin + n; ++i) s += val[i];
  return s / double(n);
}

std::vector<double> parse_val_losses(const fs::path& loss_csv) {
  std::ifstream in(loss_csv);
  std::vector<double> out;
  std::string line;
  while (std::getline(in, line))
    if (line.rfind("val,", 0) == 0)
      out.push_back(std::strtod(line.c_str() + line.rfind(',') + 1, nullptr));
  return out;
}

void criteria_9_and_10() {
  const fs::path dir = fs::temp_directory_path() / "clash_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);

  // Criterion 9: default toy config (8 ids, extractor 8,16,32,32, 2000+3000
  // iterations, seed 7), all defaults of the tool itself.
  const double t0 = now_s();
  const int rc_search =
      run_cli("search --out " + (dir / "a").string(), dir / "search.log");
  const int rc_retrain =
      run_cli("retrain --arch " + (dir / "a" / "architecture.txt").string() +
                  " --out " + (dir / "r").string(),
              dir / "retrain.log");
  const int rc_eval =
      run_cli("evaluate --arch " + (dir / "a" / "architecture.txt").string() +
                  " --weights " + (dir / "r" / "weights_final.ckpt").string(),
              dir / "eval.log");
  const double wall = now_s() - t0;

  if (rc_search != 0 || rc_retrain != 0 || rc_eval != 0) {
    report(9, false, fmt("exit codes search=%d retrain=%d evaluate=%d",
                         rc_search, rc_retrain, rc_eval));
    report(10, false, "skipped: criterion 9 run failed");
    return;
  }

  // Validation loss must fall >= 20% from its initial-window mean.
  // Window = 100 alpha steps (of 2000), frozen after the calibration run.
  const auto val = parse_val_losses(dir / "a" / "loss.csv");
  const std::size_t window = 100;
  bool ok = true;
  std::string detail;
  if (val.size() < 2 * window) {
    ok = false;
    detail = fmt("only %zu val losses", val.size());
  } else {
    const double head = val_window_mean(val, 0, window);
    const double tail = val_window_mean(val, val.size() - window, window);
    const double drop = 1.0 - tail / head;
    if (drop < 0.20) ok = false;
    detail = fmt("val loss %.3f -> %.3f (drop %.1f%%, need >= 20%%)", head,
                 tail, 100.0 * drop);
  }

  // Discretization must yield a valid 5-edge architecture.
  try {
    const auto arch =
        clash::net::load_architecture((dir / "a" / "architecture.txt").string());
    if (!arch.discrete) {
      ok = false;
      detail += "; architecture export lacks discrete choices";
    }
  } catch (const std::exception& e) {
    ok = false;
    detail += fmt("; architecture invalid: %s", e.what());
  }

  // Held-out rank-1 >= 0.8 (chance 0.125), parsed from the eval stdout.
  const std::string eval_out = slurp(dir / "eval.log");
  const auto pos = eval_out.find("rank1=");
  double r1 = -1.0;
  if (pos == std::string::npos) {
    ok = false;
    detail += "; evaluate printed no rank1";
  } else {
    r1 = std::strtod(eval_out.c_str() + pos + 6, nullptr);
    if (r1 < 0.8) ok = false;
    detail += fmt("; rank1 %.4f (need >= 0.8, chance 0.125)", r1);
  }

  if (wall > 600.0) ok = false;
  detail += fmt("; wall %.0f s (budget 600 s)", wall);
  report(9, ok, detail);

  // Criterion 10: same seed, byte-identical architecture + alpha history.
  const int rc_b =
      run_cli("search --out " + (dir / "b").string(), dir / "search_b.log");
  if (rc_b != 0) {
    report(10, false, fmt("repeat search exited %d", rc_b));
    return;
  }
  const bool arch_same = slurp(dir / "a" / "architecture.txt") ==
                         slurp(dir / "b" / "architecture.txt");
  const bool hist_same = slurp(dir / "a" / "alpha_history.csv") ==
                         slurp(dir / "b" / "alpha_history.csv");
  report(10, arch_same && hist_same,
         fmt("repeat run: architecture export %s, alpha history %s",
             arch_same ? "byte-identical" : "DIFFERS",
             hist_same ? "byte-identical" : "DIFFERS"));
}

}  // namespace

int main() {
  criterion_1();
  const CorpusData corpus = shipped_corpus();
  criterion_2(corpus);
  criterion_3(corpus);
  criterion_4(corpus);
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criteria_9_and_10();
  std::printf("%s (%d/10)\n", g_failures == 0 ? "ALL CRITERIA PASS" : "FAILURES",
              10 - g_failures);
  return g_failures;
}
