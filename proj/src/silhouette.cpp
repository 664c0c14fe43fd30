#include "clash/silhouette.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "clash/errors.hpp"

namespace fs = std::filesystem;

namespace clash {

SilhouetteFrame threshold_frame(const GrayImage& img) {
  SilhouetteFrame f;
  f.height = img.height;
  f.width = img.width;
  f.mask.resize(img.px.size());
  for (std::size_t i = 0; i < img.px.size(); ++i)
    f.mask[i] = img.px[i] >= 128 ? 1 : 0;
  return f;
}

SilhouetteFrame load_pgm(const std::uint8_t* data, std::size_t size) {
  return threshold_frame(parse_pgm(data, size));
}

SilhouetteFrame load_pgm_file_frame(const std::string& path) {
  return threshold_frame(load_pgm_file(path));
}

GrayImage frame_to_gray(const SilhouetteFrame& frame) {
  GrayImage img;
  img.height = frame.height;
  img.width = frame.width;
  img.px.resize(frame.mask.size());
  for (std::size_t i = 0; i < frame.mask.size(); ++i)
    img.px[i] = frame.mask[i] ? 255 : 0;
  return img;
}

PixelClassMap classify_pixels(const SilhouetteFrame& frame) {
  PixelClassMap map;
  map.height = frame.height;
  map.width = frame.width;
  map.classes.resize(frame.mask.size(), PixelClass::Background);
  const int h = frame.height, w = frame.width;
  auto bg_or_exterior = [&](int y, int x) {
    return y < 0 || y >= h || x < 0 || x >= w || frame.at(y, x) == 0;
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (frame.at(y, x) == 0) continue;
      const bool edge = bg_or_exterior(y - 1, x) || bg_or_exterior(y + 1, x) ||
                        bg_or_exterior(y, x - 1) || bg_or_exterior(y, x + 1);
      map.classes[std::size_t(y) * w + x] =
          edge ? PixelClass::Boundary : PixelClass::Foreground;
    }
  }
  return map;
}

SilhouetteSequence load_sequence_dir(const std::string& dir) {
  std::vector<std::string> names;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm")
      names.push_back(entry.path().string());
  }
  if (ec) throw FormatError("cannot list directory " + dir);
  if (names.empty()) throw FormatError("no .pgm frames in " + dir);
  std::sort(names.begin(), names.end());

  SilhouetteSequence seq;
  for (const auto& name : names) {
    SilhouetteFrame f = load_pgm_file_frame(name);
    if (!seq.frames.empty() && (f.height != seq.frames[0].height ||
                                f.width != seq.frames[0].width))
      throw FormatError("frame dimension mismatch at " + name);
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

std::vector<SilhouetteSequence> load_manifest(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw FormatError("cannot open manifest " + csv_path);
  const fs::path base = fs::path(csv_path).parent_path();

  std::vector<SilhouetteSequence> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && line == "subject_id,view_id,path") continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? std::string::npos
                                            : line.find(',', c1 + 1);
    if (c2 == std::string::npos)
      throw FormatError("manifest row " + std::to_string(lineno) +
                        " needs subject_id,view_id,path");
    SilhouetteSequence seq = load_sequence_dir(
        (base / line.substr(c2 + 1)).string());
    seq.subject_id = line.substr(0, c1);
    seq.view_id = line.substr(c1 + 1, c2 - c1 - 1);
    out.push_back(std::move(seq));
  }
  if (out.empty()) throw FormatError("manifest " + csv_path + " lists no sequences");
  return out;
}

void save_sequence_dir(const std::string& dir, const SilhouetteSequence& seq) {
  fs::create_directories(dir);
  char name[32];
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    std::snprintf(name, sizeof(name), "%04zu.pgm", t);
    save_pgm_file((fs::path(dir) / name).string(), frame_to_gray(seq.frames[t]));
  }
}

}  // namespace clash
