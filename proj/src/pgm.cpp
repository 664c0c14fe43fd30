#include "clash/pgm.hpp"

#include <cstdio>
#include <memory>

#include "clash/errors.hpp"

namespace clash {

namespace {

struct Cursor {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t pos = 0;

  bool eof() const { return pos >= size; }
  std::uint8_t peek() const { return data[pos]; }

  // Header whitespace; '#' starts a comment running to end of line.
  void skip_ws_and_comments() {
    while (!eof()) {
      const std::uint8_t c = peek();
      if (c == '#') {
        while (!eof() && peek() != '\n') ++pos;
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        ++pos;
      } else {
        return;
      }
    }
  }

  int read_uint(const char* field) {
    skip_ws_and_comments();
    if (eof()) throw FormatError(std::string("truncated before ") + field, pos);
    if (peek() < '0' || peek() > '9')
      throw FormatError(std::string("expected digit in ") + field, pos);
    long v = 0;
    while (!eof() && peek() >= '0' && peek() <= '9') {
      v = v * 10 + (peek() - '0');
      if (v > 1'000'000'000)
        throw FormatError(std::string(field) + " out of range", pos);
      ++pos;
    }
    return static_cast<int>(v);
  }
};

}  // namespace

GrayImage parse_pgm(const std::uint8_t* data, std::size_t size) {
  Cursor c{data, size};
  if (size < 2 || data[0] != 'P' || data[1] != '5') {
    if (size >= 2 && data[0] == 'P')
      throw FormatError("unsupported PGM variant, only binary P5 is accepted",
                        1);
    throw FormatError("missing P5 magic", 0);
  }
  c.pos = 2;

  GrayImage img;
  img.width = c.read_uint("width");
  img.height = c.read_uint("height");
  const int maxval = c.read_uint("maxval");
  if (img.width <= 0 || img.height <= 0)
    throw FormatError("zero image dimension", c.pos);
  if (maxval < 1 || maxval > 255)
    throw FormatError("maxval must be in [1,255]", c.pos);

  // Exactly one whitespace byte separates maxval from the payload.
  if (c.eof()) throw FormatError("truncated before payload", c.pos);
  const std::uint8_t sep = c.peek();
  if (sep != ' ' && sep != '\t' && sep != '\r' && sep != '\n')
    throw FormatError("expected single whitespace before payload", c.pos);
  ++c.pos;

  const std::size_t need =
      static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
  if (size - c.pos < need)
    throw FormatError("truncated payload", size);
  img.px.assign(data + c.pos, data + c.pos + need);
  return img;
}

GrayImage load_pgm_file(const std::string& path) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(
      std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!f) throw FormatError("cannot open " + path);
  std::fseek(f.get(), 0, SEEK_END);
  const long len = std::ftell(f.get());
  std::fseek(f.get(), 0, SEEK_SET);
  std::vector<std::uint8_t> buf(len > 0 ? static_cast<std::size_t>(len) : 0);
  if (!buf.empty() && std::fread(buf.data(), 1, buf.size(), f.get()) != buf.size())
    throw FormatError("short read on " + path);
  try {
    return parse_pgm(buf.data(), buf.size());
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what(), e.byte_offset());
  }
}

void save_pgm_file(const std::string& path, const GrayImage& img) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(
      std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!f) throw FormatError("cannot open " + path + " for writing");
  std::fprintf(f.get(), "P5\n%d %d\n255\n", img.width, img.height);
  if (std::fwrite(img.px.data(), 1, img.px.size(), f.get()) != img.px.size())
    throw FormatError("short write on " + path);
}

}  // namespace clash
