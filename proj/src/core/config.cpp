#include "mazero/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mazero {
namespace {

std::string Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void BadValue(const std::string& key, const std::string& value,
                           const char* type) {
  Fail(ErrorKind::kUsage,
       "config key '" + key + "': cannot parse '" + value + "' as " + type);
}

}  // namespace

ConfigMap ConfigMap::Parse(std::string_view text) {
  ConfigMap m;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = Trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      Fail(ErrorKind::kUsage, "config line " + std::to_string(lineno) +
                                  " lacks '=': " + t);
    }
    m.values_[Trim(t.substr(0, eq))] = Trim(t.substr(eq + 1));
  }
  return m;
}

ConfigMap ConfigMap::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return Parse(ss.str());
}

void ConfigMap::SetPair(std::string_view pair) {
  const auto eq = pair.find('=');
  if (eq == std::string_view::npos) {
    Fail(ErrorKind::kUsage, "override '" + std::string(pair) + "' must be key=value");
  }
  values_[Trim(pair.substr(0, eq))] = Trim(pair.substr(eq + 1));
}

void ConfigMap::Merge(const ConfigMap& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

std::optional<std::string> ConfigMap::Raw(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  consumed_[key] = true;
  return it->second;
}

void ConfigMap::Get(const std::string& key, int& out) const {
  long long v = out;
  Get(key, v);
  out = static_cast<int>(v);
}

void ConfigMap::Get(const std::string& key, long long& out) const {
  auto raw = Raw(key);
  if (!raw) return;
  long long v = 0;
  auto [p, ec] = std::from_chars(raw->data(), raw->data() + raw->size(), v);
  if (ec != std::errc() || p != raw->data() + raw->size()) BadValue(key, *raw, "integer");
  out = v;
}

void ConfigMap::Get(const std::string& key, std::uint64_t& out) const {
  auto raw = Raw(key);
  if (!raw) return;
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(raw->data(), raw->data() + raw->size(), v);
  if (ec != std::errc() || p != raw->data() + raw->size()) BadValue(key, *raw, "unsigned integer");
  out = v;
}

void ConfigMap::Get(const std::string& key, double& out) const {
  auto raw = Raw(key);
  if (!raw) return;
  char* end = nullptr;
  const double v = std::strtod(raw->c_str(), &end);
  if (raw->empty() || end != raw->c_str() + raw->size()) BadValue(key, *raw, "real");
  out = v;
}

void ConfigMap::Get(const std::string& key, bool& out) const {
  auto raw = Raw(key);
  if (!raw) return;
  if (*raw == "true" || *raw == "1" || *raw == "on") {
    out = true;
  } else if (*raw == "false" || *raw == "0" || *raw == "off") {
    out = false;
  } else {
    BadValue(key, *raw, "boolean");
  }
}

void ConfigMap::Get(const std::string& key, std::string& out) const {
  auto raw = Raw(key);
  if (raw) out = *raw;
}

std::vector<std::string> ConfigMap::Unconsumed() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) {
    if (!consumed_.count(k)) out.push_back(k);
  }
  return out;
}

std::string ConfigMap::ToText() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

std::string FormatDouble(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace mazero
