#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace clash {

// FNV-1a 64-bit digest, used to fingerprint run inputs.
std::uint64_t fnv1a(const void* data, std::size_t n);
std::uint64_t fnv1a_file(const std::string& path);

// Run record dropped into every output directory. Contains only
// reproducibility-relevant fields (no timestamps, no host data), so equal
// runs produce byte-identical manifests.
struct RunManifest {
  std::string command;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> config;  // resolved, ordered
  std::vector<std::pair<std::string, std::uint64_t>> inputs;  // path -> digest
};

std::string manifest_text(const RunManifest& m);
void write_manifest(const std::string& dir, const RunManifest& m);

}  // namespace clash
