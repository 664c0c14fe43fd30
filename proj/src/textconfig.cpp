#include "clash/textconfig.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "clash/errors.hpp"

namespace clash {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& want) {
  throw FormatError("config: key '" + key + "': expected " + want +
                    ", got '" + value + "'");
}

std::int64_t parse_int(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(value.c_str(), &end, 10);
  if (errno != 0 || end == value.c_str() || *end != '\0')
    bad_value(key, value, "an integer");
  return v;
}

}  // namespace

TextConfig TextConfig::parse(const std::string& text) {
  TextConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError("config: missing '=' (line " + std::to_string(lineno) +
                        ")");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw FormatError("config: empty key (line " + std::to_string(lineno) +
                        ")");
    if (cfg.find(key) != nullptr)
      throw FormatError("config: duplicate key '" + key + "' (line " +
                        std::to_string(lineno) + ")");
    cfg.entries_.emplace_back(key, value);
  }
  return cfg;
}

TextConfig TextConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

const std::string* TextConfig::find(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return &v;
  return nullptr;
}

bool TextConfig::has(const std::string& key) const {
  return find(key) != nullptr;
}

void TextConfig::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries_)
    if (k == key) {
      v = value;
      return;
    }
  entries_.emplace_back(key, value);
}

std::string TextConfig::get_string(const std::string& key,
                                   const std::string& fallback) const {
  const std::string* v = find(key);
  return v ? *v : fallback;
}

std::int64_t TextConfig::get_int(const std::string& key,
                                 std::int64_t fallback) const {
  const std::string* v = find(key);
  return v ? parse_int(key, *v) : fallback;
}

std::uint64_t TextConfig::get_uint(const std::string& key,
                                   std::uint64_t fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  errno = 0;
  char* end = nullptr;
  const unsigned long long x = std::strtoull(v->c_str(), &end, 10);
  if (errno != 0 || end == v->c_str() || *end != '\0' || v->front() == '-')
    bad_value(key, *v, "a non-negative integer");
  return x;
}

double TextConfig::get_double(const std::string& key, double fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(v->c_str(), &end);
  if (errno != 0 || end == v->c_str() || *end != '\0')
    bad_value(key, *v, "a number");
  return x;
}

std::vector<std::int64_t> TextConfig::get_int_list(
    const std::string& key, const std::vector<std::int64_t>& fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  std::vector<std::int64_t> out;
  std::string item;
  std::istringstream in(*v);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) bad_value(key, *v, "a comma-separated integer list");
    out.push_back(parse_int(key, item));
  }
  if (out.empty()) bad_value(key, *v, "a comma-separated integer list");
  return out;
}

std::vector<std::string> TextConfig::unknown_keys(
    const std::vector<std::string>& known) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : entries_) {
    bool ok = false;
    for (const auto& name : known)
      if (k == name) {
        ok = true;
        break;
      }
    if (!ok) out.push_back(k);
  }
  return out;
}

}  // namespace clash
