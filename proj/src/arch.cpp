#include "clash/arch.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "clash/errors.hpp"

namespace clash::net {

CellArchitecture discretize(const CellArchitecture& relaxed) {
  CellArchitecture out = relaxed;
  std::array<OpKind, kNumEdges> choice{};
  for (int e = 0; e < kNumEdges; ++e) {
    int best = 0;
    for (int o = 1; o < kNumOps; ++o)
      if (relaxed.alpha[std::size_t(e)][std::size_t(o)] >
          relaxed.alpha[std::size_t(e)][std::size_t(best)])
        best = o;
    choice[std::size_t(e)] = OpKind(best);
  }
  out.discrete = choice;
  return out;
}

std::string export_architecture(const CellArchitecture& arch) {
  std::string out;
  out += "clash-architecture v1\n";
  out += "edges 5\n";
  out += "ops 12\n";
  char buf[64];
  for (int e = 0; e < kNumEdges; ++e) {
    std::snprintf(buf, sizeof buf, "edge %d from %s to %s\n", e,
                  kEdges[std::size_t(e)].from, kEdges[std::size_t(e)].to);
    out += buf;
    std::snprintf(buf, sizeof buf, "alpha %d", e);
    out += buf;
    for (int o = 0; o < kNumOps; ++o) {
      std::snprintf(buf, sizeof buf, " %.17g",
                    arch.alpha[std::size_t(e)][std::size_t(o)]);
      out += buf;
    }
    out += "\n";
    if (arch.discrete) {
      std::snprintf(buf, sizeof buf, "choice %d %s\n", e,
                    op_name((*arch.discrete)[std::size_t(e)]));
      out += buf;
    }
  }
  return out;
}

void save_architecture(const std::string& path,
                       const CellArchitecture& arch) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ContractError("architecture: cannot open '" + path + "'");
  const std::string text = export_architecture(arch);
  f.write(text.data(), std::streamsize(text.size()));
  if (!f) throw ContractError("architecture: short write to '" + path + "'");
}

namespace {

[[noreturn]] void parse_fail(int line, const std::string& what) {
  throw ContractError("architecture: line " + std::to_string(line) + ": " +
                      what);
}

}  // namespace

CellArchitecture parse_architecture(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  const auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty()) return true;
    }
    return false;
  };
  if (!next_line() || line != "clash-architecture v1")
    parse_fail(lineno ? lineno : 1, "expected header 'clash-architecture v1'");
  if (!next_line() || line != "edges 5") parse_fail(lineno, "expected 'edges 5'");
  if (!next_line() || line != "ops 12") parse_fail(lineno, "expected 'ops 12'");

  CellArchitecture arch;
  std::array<OpKind, kNumEdges> choice{};
  bool any_choice = false;
  int seen_edges = 0;
  while (next_line()) {
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "edge") {
      int e = -1;
      std::string from, to, fromv, tov;
      ls >> e >> from >> fromv >> to >> tov;
      if (e != seen_edges) parse_fail(lineno, "edges out of order");
      if (from != "from" || to != "to" ||
          fromv != kEdges[std::size_t(e)].from ||
          tov != kEdges[std::size_t(e)].to)
        parse_fail(lineno, "edge endpoints do not match the MD cell");
      ++seen_edges;
    } else if (kw == "alpha") {
      int e = -1;
      ls >> e;
      if (e < 0 || e >= kNumEdges) parse_fail(lineno, "alpha edge out of range");
      for (int o = 0; o < kNumOps; ++o)
        if (!(ls >> arch.alpha[std::size_t(e)][std::size_t(o)]))
          parse_fail(lineno, "expected 12 alpha values");
      double extra;
      if (ls >> extra) parse_fail(lineno, "more than 12 alpha values");
    } else if (kw == "choice") {
      int e = -1;
      std::string name;
      ls >> e >> name;
      if (e < 0 || e >= kNumEdges)
        parse_fail(lineno, "choice edge out of range");
      choice[std::size_t(e)] = op_from_name(name);
      any_choice = true;
    } else {
      parse_fail(lineno, "unknown keyword '" + kw + "'");
    }
  }
  if (seen_edges != kNumEdges) parse_fail(lineno, "missing edges");
  if (any_choice) arch.discrete = choice;
  return arch;
}

CellArchitecture load_architecture(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ContractError("architecture: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << f.rdbuf();
  try {
    return parse_architecture(buf.str());
  } catch (const ContractError& e) {
    throw ContractError(path + ": " + e.what());
  }
}

}  // namespace clash::net
