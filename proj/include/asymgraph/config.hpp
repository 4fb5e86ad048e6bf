#pragma once

#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "asymgraph/common.hpp"
#include "asymgraph/features.hpp"
#include "asymgraph/graph.hpp"

namespace asymgraph {

/// Plain-text `key = value` configuration. '#' starts a comment. Typed getters record
/// which keys were consumed so unknown keys can be rejected.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(std::istream& in, std::string_view source = "config") {
    KeyValueConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string_view sv = detail::strip_cr(line);
      if (const auto hash = sv.find('#'); hash != std::string_view::npos) sv = sv.substr(0, hash);
      sv = trim(sv);
      if (sv.empty()) continue;
      const auto eq = sv.find('=');
      if (eq == std::string_view::npos)
        throw UsageError(fmt::format("{} line {}: expected 'key = value'", source, lineno));
      const auto key = std::string(trim(sv.substr(0, eq)));
      const auto value = std::string(trim(sv.substr(eq + 1)));
      if (key.empty()) throw UsageError(fmt::format("{} line {}: empty key", source, lineno));
      cfg.values_[key] = value;
    }
    return cfg;
  }

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string get_string(const std::string& key, const std::string& def) const {
    used_.insert(key);
    auto it = values_.find(key);
    return it == values_.end() ? def : it->second;
  }

  double get_double(const std::string& key, double def) const {
    used_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    return to_double(key, it->second);
  }

  std::uint64_t get_uint(const std::string& key, std::uint64_t def) const {
    used_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    return to_uint(key, it->second);
  }

  bool get_bool(const std::string& key, bool def) const {
    used_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    const auto& v = it->second;
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw UsageError(fmt::format("config key '{}': expected a boolean, got '{}'", key, v));
  }

  std::vector<std::uint64_t> get_uint_list(const std::string& key, const std::vector<std::uint64_t>& def) const {
    used_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    std::vector<std::uint64_t> out;
    for (auto part : detail::split(it->second, ',')) out.push_back(to_uint(key, std::string(trim(part))));
    return out;
  }

  std::vector<double> get_double_list(const std::string& key, const std::vector<double>& def) const {
    used_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    std::vector<double> out;
    for (auto part : detail::split(it->second, ',')) out.push_back(to_double(key, std::string(trim(part))));
    return out;
  }

  /// Keys present in the file that no getter asked for.
  std::vector<std::string> unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_)
      if (!used_.count(k)) out.push_back(k);
    return out;
  }

  void reject_unused() const {
    const auto unused = unused_keys();
    if (!unused.empty()) throw UsageError(fmt::format("unknown config key(s): {}", fmt::join(unused, ", ")));
  }

 private:
  static std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
  }

  static double to_double(const std::string& key, const std::string& v) {
    double out = 0;
    if (!detail::parse_double(v, out))
      throw UsageError(fmt::format("config key '{}': expected a number, got '{}'", key, v));
    return out;
  }

  static std::uint64_t to_uint(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
      throw UsageError(fmt::format("config key '{}': expected a non-negative integer, got '{}'", key, v));
    return out;
  }

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

}  // namespace asymgraph
