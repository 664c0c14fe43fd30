#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "clash/pgm.hpp"

namespace clash {

// Binary mask, row-major, values exactly 0 (background) or 1 (foreground).
struct SilhouetteFrame {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> mask;

  std::uint8_t at(int y, int x) const { return mask[std::size_t(y) * width + x]; }
};

enum class PixelClass : std::uint8_t { Background = 0, Foreground = 1, Boundary = 2 };

struct PixelClassMap {
  int height = 0;
  int width = 0;
  std::vector<PixelClass> classes;

  PixelClass at(int y, int x) const { return classes[std::size_t(y) * width + x]; }
};

struct SilhouetteSequence {
  std::vector<SilhouetteFrame> frames;
  std::string subject_id;  // optional label
  std::string view_id;     // optional label
};

// Grayscale -> binary mask at the fixed threshold 128 (>= is foreground).
SilhouetteFrame threshold_frame(const GrayImage& img);

// Convenience: parse + threshold. Errors carry byte offsets (see parse_pgm).
SilhouetteFrame load_pgm(const std::uint8_t* data, std::size_t size);
SilhouetteFrame load_pgm_file_frame(const std::string& path);

// Mask -> grayscale with foreground 255, background 0.
GrayImage frame_to_gray(const SilhouetteFrame& frame);

// Boundary = foreground pixel with a 4-connected background neighbor; the
// grid exterior counts as background. Remaining foreground is Foreground.
PixelClassMap classify_pixels(const SilhouetteFrame& frame);

// Directory of .pgm frames, ordered by filename (zero-padded numeric names
// sort correctly). All frames must share dimensions.
SilhouetteSequence load_sequence_dir(const std::string& dir);

// Manifest CSV: one row per sequence, "subject_id,view_id,path" with path
// relative to the manifest file. An optional header row is skipped.
std::vector<SilhouetteSequence> load_manifest(const std::string& csv_path);

void save_sequence_dir(const std::string& dir, const SilhouetteSequence& seq);

}  // namespace clash
