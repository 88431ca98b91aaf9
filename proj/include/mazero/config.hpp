#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mazero/core.hpp"

namespace mazero {

// Flat `key = value` document. Lines starting with '#' are comments.
// Keys are dotted (e.g. `search.rho`); values are raw strings parsed on read.
class ConfigMap {
 public:
  static ConfigMap Parse(std::string_view text);
  static ConfigMap Load(const std::string& path);

  // Accepts a single `key=value` override.
  void SetPair(std::string_view pair);
  void Set(const std::string& key, const std::string& value) { values_[key] = value; }
  void Merge(const ConfigMap& other);

  bool Has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> Raw(const std::string& key) const;

  // Each getter leaves `out` untouched when the key is absent and marks the
  // key consumed so that unknown keys can be reported.
  void Get(const std::string& key, int& out) const;
  void Get(const std::string& key, long long& out) const;
  void Get(const std::string& key, std::uint64_t& out) const;
  void Get(const std::string& key, double& out) const;
  void Get(const std::string& key, bool& out) const;
  void Get(const std::string& key, std::string& out) const;

  // Keys never read by any Get call.
  std::vector<std::string> Unconsumed() const;

  std::string ToText() const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  mutable std::map<std::string, bool> consumed_;
};

std::string FormatDouble(double x);

}  // namespace mazero
