#pragma once

#include <array>
#include <optional>
#include <string>

#include "clash/gait_ops.hpp"

namespace clash::net {

inline constexpr int kNumEdges = 5;

// Searchable edges of the MD cell, in canonical order. n1/n2 are the two
// descriptor inputs; n3/n4 the intermediate nodes; the output node sums
// n3 + n4 and is not searchable.
struct EdgeDef {
  const char* from;
  const char* to;
};
inline constexpr std::array<EdgeDef, kNumEdges> kEdges = {{
    {"in_X", "n3"},
    {"in_Y", "n3"},
    {"in_X", "n4"},
    {"in_Y", "n4"},
    {"n3", "n4"},
}};

struct CellArchitecture {
  // alpha[e][o]: architecture logit for op o on edge e (60 values).
  std::array<std::array<double, kNumOps>, kNumEdges> alpha{};
  std::optional<std::array<OpKind, kNumEdges>> discrete;
};

// Per-edge argmax over alpha; ties resolve to the lowest OpKind index.
// All 5 edges are retained.
CellArchitecture discretize(const CellArchitecture& relaxed);

// Structured-text round trip. Export output is byte-stable for identical
// architectures (fixed %.17g formatting, no timestamps).
std::string export_architecture(const CellArchitecture& arch);
void save_architecture(const std::string& path, const CellArchitecture& arch);
CellArchitecture parse_architecture(const std::string& text);
CellArchitecture load_architecture(const std::string& path);

}  // namespace clash::net
