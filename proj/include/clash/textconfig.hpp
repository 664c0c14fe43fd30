#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace clash {

// Line-oriented "key = value" text. '#' starts a comment (full line or
// trailing); blank lines are ignored; duplicate keys are rejected. Entry
// order is preserved so resolved configs serialize deterministically.
class TextConfig {
 public:
  static TextConfig parse(const std::string& text);
  static TextConfig load(const std::string& path);

  bool has(const std::string& key) const;
  void set(const std::string& key, const std::string& value);  // add or replace

  // Typed getters return the fallback when the key is absent and reject
  // malformed values with a format error naming the key.
  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::vector<std::int64_t> get_int_list(
      const std::string& key, const std::vector<std::int64_t>& fallback) const;

  // Keys not present in `known`, in entry order (for strict validation).
  std::vector<std::string> unknown_keys(
      const std::vector<std::string>& known) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const {
    return entries_;
  }

 private:
  const std::string* find(const std::string& key) const;

  std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace clash
