#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "clash/arch.hpp"
#include "clash/errors.hpp"
#include "clash/manifest.hpp"
#include "clash/textconfig.hpp"
#include "doctest.h"

using clash::ContractError;
using clash::FormatError;
using clash::RunManifest;
using clash::TextConfig;
using clash::net::CellArchitecture;
using clash::net::OpKind;

TEST_CASE("config text parses keys, comments, and blanks") {
  const auto cfg = TextConfig::parse(
      "# run setup\n"
      "u = 2\n"
      "lr_w = 0.001   # weight step size\n"
      "\n"
      "  extractor = 8,16,32,32\n"
      "name = desk run\n");
  CHECK(cfg.get_int("u", 0) == 2);
  CHECK(cfg.get_double("lr_w", 0.0) == 0.001);
  CHECK(cfg.get_string("name", "") == "desk run");
  CHECK(cfg.get_int_list("extractor", {}) ==
        std::vector<std::int64_t>{8, 16, 32, 32});
  CHECK(cfg.get_int("missing", 41) == 41);
  CHECK(cfg.has("u"));
  CHECK_FALSE(cfg.has("missing"));
}

TEST_CASE("config rejects malformed lines with line numbers") {
  CHECK_THROWS_WITH_AS(TextConfig::parse("u = 1\nbogus line\n"),
                       doctest::Contains("line 2"), FormatError);
  CHECK_THROWS_WITH_AS(TextConfig::parse("= 3\n"), doctest::Contains("line 1"),
                       FormatError);
  CHECK_THROWS_WITH_AS(TextConfig::parse("u = 1\nu = 2\n"),
                       doctest::Contains("duplicate key 'u'"), FormatError);
}

TEST_CASE("typed getters reject unparseable values by key") {
  const auto cfg = TextConfig::parse("u = abc\nseed = -4\nlr = 1..2\n");
  CHECK_THROWS_WITH_AS(cfg.get_int("u", 0), doctest::Contains("'u'"),
                       FormatError);
  CHECK_THROWS_AS(cfg.get_uint("seed", 0), FormatError);
  CHECK_THROWS_AS(cfg.get_double("lr", 0.0), FormatError);
  CHECK_THROWS_AS(cfg.get_int_list("u", {}), FormatError);
}

TEST_CASE("unknown keys surface in entry order") {
  const auto cfg = TextConfig::parse("a = 1\nzz = 2\nb = 3\nyy = 4\n");
  CHECK(cfg.unknown_keys({"a", "b"}) ==
        std::vector<std::string>{"zz", "yy"});
  CHECK(cfg.unknown_keys({"a", "b", "zz", "yy"}).empty());
}

TEST_CASE("set adds or replaces while keeping order") {
  auto cfg = TextConfig::parse("a = 1\nb = 2\n");
  cfg.set("a", "9");
  cfg.set("c", "3");
  CHECK(cfg.get_int("a", 0) == 9);
  CHECK(cfg.entries().size() == 3);
  CHECK(cfg.entries()[2].first == "c");
}

TEST_CASE("fnv1a matches published vectors") {
  CHECK(clash::fnv1a("", 0) == 0xcbf29ce484222325ull);
  CHECK(clash::fnv1a("a", 1) == 0xaf63dc4c8601ec8cull);
  CHECK(clash::fnv1a("foobar", 6) == 0x85944171f73967e8ull);
}

TEST_CASE("manifest text is deterministic and timestamp-free") {
  RunManifest m;
  m.command = "search";
  m.seed = 7;
  m.config = {{"u", "1"}, {"lr_w", "0.001"}};
  m.inputs = {{"corpus/manifest.csv", 0x85944171f73967e8ull}};
  const std::string text = clash::manifest_text(m);
  CHECK(text ==
        "clash-run v1\n"
        "version 0.1.0\n"
        "command search\n"
        "seed 7\n"
        "config u = 1\n"
        "config lr_w = 0.001\n"
        "input corpus/manifest.csv fnv1a=85944171f73967e8\n");
  CHECK(clash::manifest_text(m) == text);

  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "clash_manifest_test";
  fs::create_directories(dir);
  clash::write_manifest(dir.string(), m);
  std::ifstream in(dir / "manifest.txt", std::ios::binary);
  std::string got((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  CHECK(got == text);
  fs::remove_all(dir);
}

TEST_CASE("discretize takes the per-edge argmax") {
  CellArchitecture relaxed{};
  relaxed.alpha[0][5] = 2.0;
  relaxed.alpha[1][11] = 0.5;
  relaxed.alpha[2][0] = 1.0;
  relaxed.alpha[3][7] = 3.0;
  relaxed.alpha[4][4] = 0.25;
  const auto d = clash::net::discretize(relaxed);
  REQUIRE(d.discrete.has_value());
  CHECK((*d.discrete)[0] == OpKind::MaxPool3);
  CHECK((*d.discrete)[1] == OpKind::SelfAttention);
  CHECK((*d.discrete)[2] == OpKind::DepthwiseSepConv3);
  CHECK((*d.discrete)[3] == OpKind::Zero);
  CHECK((*d.discrete)[4] == OpKind::AvgPool3);
}

TEST_CASE("discretization ties resolve to the lowest op index") {
  CellArchitecture relaxed{};  // all logits equal on every edge
  const auto d = clash::net::discretize(relaxed);
  for (const auto kind : *d.discrete)
    CHECK(kind == OpKind::DepthwiseSepConv3);

  CellArchitecture two{};
  two.alpha[2][3] = 4.0;
  two.alpha[2][9] = 4.0;  // equal maxima: index 3 wins
  const auto d2 = clash::net::discretize(two);
  CHECK((*d2.discrete)[2] == OpKind::AtrousConv5Rate2);
}

TEST_CASE("architecture export round-trips byte-identically") {
  CellArchitecture arch{};
  double v = -1.0;
  for (auto& row : arch.alpha)
    for (auto& x : row) x = (v += 0.0625) * 1.7e-3;
  const auto d = clash::net::discretize(arch);
  const std::string text = clash::net::export_architecture(d);
  const CellArchitecture back = clash::net::parse_architecture(text);
  CHECK(clash::net::export_architecture(back) == text);
  REQUIRE(back.discrete.has_value());
  for (int e = 0; e < clash::net::kNumEdges; ++e)
    CHECK((*back.discrete)[std::size_t(e)] ==
          (*d.discrete)[std::size_t(e)]);

  // Relaxed-only exports (no choice lines) round-trip too.
  const std::string relaxed_text = clash::net::export_architecture(arch);
  CHECK_FALSE(clash::net::parse_architecture(relaxed_text)
                  .discrete.has_value());
  CHECK(clash::net::export_architecture(
            clash::net::parse_architecture(relaxed_text)) == relaxed_text);
}

TEST_CASE("architecture files save and load") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "clash_arch_test";
  fs::create_directories(dir);
  const fs::path path = dir / "arch.txt";
  CellArchitecture arch{};
  arch.alpha[1][6] = 0.75;
  const auto d = clash::net::discretize(arch);
  clash::net::save_architecture(path.string(), d);
  const auto back = clash::net::load_architecture(path.string());
  CHECK(clash::net::export_architecture(back) ==
        clash::net::export_architecture(d));
  CHECK_THROWS_AS(clash::net::load_architecture((dir / "absent.txt").string()),
                  ContractError);
  fs::remove_all(dir);
}

TEST_CASE("architecture parsing reports the offending line") {
  const std::string good = clash::net::export_architecture(
      clash::net::CellArchitecture{});
  CHECK_THROWS_WITH_AS(clash::net::parse_architecture("not an arch\n"),
                       doctest::Contains("line 1"), ContractError);
  // Truncate after the header: missing edges must be rejected.
  const std::string header = good.substr(0, good.find("edge 0"));
  CHECK_THROWS_AS(clash::net::parse_architecture(header), ContractError);
  // Corrupt one endpoint name.
  std::string bad = good;
  const auto pos = bad.find("from in_X");
  bad.replace(pos, 9, "from in_Q");
  CHECK_THROWS_AS(clash::net::parse_architecture(bad), ContractError);
}
