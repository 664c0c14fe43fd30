#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace clash {

// Raw 8-bit grayscale image as stored in a binary (P5) PGM file.
struct GrayImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> px;  // row-major, height*width entries
};

// Parses a binary PGM (P5, maxval <= 255). Malformed input raises
// FormatError carrying the byte offset of the first offending byte.
GrayImage parse_pgm(const std::uint8_t* data, std::size_t size);
GrayImage load_pgm_file(const std::string& path);

void save_pgm_file(const std::string& path, const GrayImage& img);

}  // namespace clash
