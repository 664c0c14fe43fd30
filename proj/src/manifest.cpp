#include "clash/manifest.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "clash/errors.hpp"
#include "clash/version.hpp"

namespace clash {

std::uint64_t fnv1a(const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("manifest: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string s = buf.str();
  return fnv1a(s.data(), s.size());
}

std::string manifest_text(const RunManifest& m) {
  std::ostringstream out;
  out << "clash-run v1\n";
  out << "version " << kVersion << "\n";
  out << "command " << m.command << "\n";
  out << "seed " << m.seed << "\n";
  for (const auto& [k, v] : m.config) out << "config " << k << " = " << v << "\n";
  for (const auto& [path, digest] : m.inputs) {
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(digest));
    out << "input " << path << " fnv1a=" << hex << "\n";
  }
  return out.str();
}

void write_manifest(const std::string& dir, const RunManifest& m) {
  const std::string path = dir + "/manifest.txt";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("manifest: cannot write '" + path + "'");
  out << manifest_text(m);
}

}  // namespace clash
