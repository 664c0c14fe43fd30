#include "clash/dstf.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>

#include "clash/errors.hpp"

namespace clash {

namespace {

constexpr std::uint8_t kDstfVersion = 1;

struct RegionMax {
  double fore = 0.0;
  double back = 0.0;
};

RegionMax region_max(const BiDtFrame& bd, const PixelClassMap& classes) {
  RegionMax m;
  for (std::size_t i = 0; i < bd.dist.size(); ++i) {
    switch (classes.classes[i]) {
      case PixelClass::Foreground:
        if (bd.dist[i] > m.fore) m.fore = bd.dist[i];
        break;
      case PixelClass::Background:
        if (bd.dist[i] > m.back) m.back = bd.dist[i];
        break;
      case PixelClass::Boundary:
        break;
    }
  }
  return m;
}

DstfFrame apply_sign(const BiDtFrame& bd, const PixelClassMap& classes,
                     const RegionMax& m) {
  DstfFrame out;
  out.height = bd.height;
  out.width = bd.width;
  out.field.assign(bd.dist.size(), 0.0);
  for (std::size_t i = 0; i < bd.dist.size(); ++i) {
    switch (classes.classes[i]) {
      case PixelClass::Foreground:
        out.field[i] = m.fore > 0.0 ? bd.dist[i] / m.fore : 0.0;
        break;
      case PixelClass::Background:
        out.field[i] = m.back > 0.0 ? -bd.dist[i] / m.back : 0.0;
        break;
      case PixelClass::Boundary:
        break;
    }
  }
  return out;
}

void write_u32le(std::FILE* f, std::uint32_t v) {
  const std::uint8_t b[4] = {std::uint8_t(v), std::uint8_t(v >> 8),
                             std::uint8_t(v >> 16), std::uint8_t(v >> 24)};
  std::fwrite(b, 1, 4, f);
}

std::uint32_t read_u32le(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 |
         std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}

}  // namespace

DstfFrame sign_and_normalize(const BiDtFrame& bd,
                             const PixelClassMap& classes) {
  if (bd.height != classes.height || bd.width != classes.width)
    throw ContractError("sign_and_normalize: dimension mismatch");
  return apply_sign(bd, classes, region_max(bd, classes));
}

DstfSequence transform_sequence(const SilhouetteSequence& seq,
                                DegeneratePolicy policy, NormMode norm) {
  DstfSequence out;
  std::vector<BiDtFrame> dts;
  std::vector<PixelClassMap> maps;
  std::vector<bool> degenerate;
  dts.reserve(seq.frames.size());

  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    const PixelClassMap classes = classify_pixels(seq.frames[t]);
    bool empty = true;
    for (auto c : classes.classes)
      if (c == PixelClass::Boundary) { empty = false; break; }
    if (empty) {
      switch (policy) {
        case DegeneratePolicy::Error:
          throw EmptyBoundaryError("frame " + std::to_string(t) +
                                   " has no boundary pixels");
        case DegeneratePolicy::Skip:
          continue;
        case DegeneratePolicy::ZeroFill:
          break;
      }
    }
    BiDtFrame bd;
    if (empty) {
      bd.height = seq.frames[t].height;
      bd.width = seq.frames[t].width;
      bd.dist.assign(std::size_t(bd.height) * bd.width, 0.0);
    } else {
      bd = bi_dt(seq.frames[t]);
    }
    dts.push_back(std::move(bd));
    maps.push_back(classes);
    degenerate.push_back(empty);
  }

  RegionMax seq_max;
  if (norm == NormMode::PerSequence) {
    for (std::size_t t = 0; t < dts.size(); ++t) {
      if (degenerate[t]) continue;
      const RegionMax m = region_max(dts[t], maps[t]);
      seq_max.fore = std::max(seq_max.fore, m.fore);
      seq_max.back = std::max(seq_max.back, m.back);
    }
  }

  for (std::size_t t = 0; t < dts.size(); ++t) {
    const RegionMax m = norm == NormMode::PerSequence
                            ? seq_max
                            : region_max(dts[t], maps[t]);
    out.frames.push_back(apply_sign(dts[t], maps[t], m));
  }
  return out;
}

void save_dstf(const std::string& path, const DstfSequence& seq) {
  if (seq.frames.empty()) throw ContractError("save_dstf: empty sequence");
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(
      std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!f) throw FormatError("cannot open " + path + " for writing");
  std::fwrite("DSTF", 1, 4, f.get());
  std::fputc(kDstfVersion, f.get());
  write_u32le(f.get(), std::uint32_t(seq.frames.size()));
  write_u32le(f.get(), std::uint32_t(seq.frames[0].height));
  write_u32le(f.get(), std::uint32_t(seq.frames[0].width));
  for (const auto& fr : seq.frames) {
    for (double v : fr.field) {
      const float x = float(v);
      std::uint32_t bits;
      std::memcpy(&bits, &x, 4);
      write_u32le(f.get(), bits);
    }
  }
}

DstfSequence load_dstf(const std::string& path) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(
      std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!f) throw FormatError("cannot open " + path);
  std::fseek(f.get(), 0, SEEK_END);
  const long len = std::ftell(f.get());
  std::fseek(f.get(), 0, SEEK_SET);
  std::vector<std::uint8_t> buf(len > 0 ? std::size_t(len) : 0);
  if (!buf.empty() && std::fread(buf.data(), 1, buf.size(), f.get()) != buf.size())
    throw FormatError("short read on " + path);

  if (buf.size() < 17 || std::memcmp(buf.data(), "DSTF", 4) != 0)
    throw FormatError(path + ": missing DSTF magic", 0);
  if (buf[4] != kDstfVersion)
    throw FormatError(path + ": unsupported DSTF version", 4);
  const std::uint32_t T = read_u32le(&buf[5]);
  const std::uint32_t H = read_u32le(&buf[9]);
  const std::uint32_t W = read_u32le(&buf[13]);
  if (T == 0 || H == 0 || W == 0)
    throw FormatError(path + ": zero dimension", 5);
  const std::size_t need = 17 + std::size_t(T) * H * W * 4;
  if (buf.size() != need)
    throw FormatError(path + ": payload size mismatch", buf.size());

  DstfSequence seq;
  const std::uint8_t* p = &buf[17];
  for (std::uint32_t t = 0; t < T; ++t) {
    DstfFrame fr;
    fr.height = int(H);
    fr.width = int(W);
    fr.field.resize(std::size_t(H) * W);
    for (auto& v : fr.field) {
      const std::uint32_t bits = read_u32le(p);
      p += 4;
      float x;
      std::memcpy(&x, &bits, 4);
      if (!(x >= -1.0f && x <= 1.0f))
        throw FormatError(path + ": value outside [-1,1]",
                          std::size_t(p - buf.data()) - 4);
      v = double(x);
    }
    seq.frames.push_back(std::move(fr));
  }
  return seq;
}

GrayImage dstf_preview(const DstfFrame& frame) {
  GrayImage img;
  img.height = frame.height;
  img.width = frame.width;
  img.px.resize(frame.field.size());
  for (std::size_t i = 0; i < frame.field.size(); ++i)
    img.px[i] =
        std::uint8_t(std::lround((frame.field[i] + 1.0) / 2.0 * 255.0));
  return img;
}

}  // namespace clash
