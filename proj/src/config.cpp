// isonmt/config.cpp

// Copyright 2026  isonmt authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "isonmt/config.hpp"

#include <cstdlib>
#include <sstream>

namespace isonmt {

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
  std::vector<std::string> lines;
  try {
    lines = read_lines(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  std::string text;
  for (const auto& l : lines) {
    text += l;
    text += '\n';
  }
  return parse_string(text);
}

KeyValueConfig KeyValueConfig::parse_string(const std::string& text) {
  KeyValueConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::string stripped = trim(line);
    if (stripped.empty()) continue;
    auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected `key = value`, got: " + stripped);
    }
    std::string key = trim(stripped.substr(0, eq));
    std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    }
    cfg.values_[key] = value;
  }
  return cfg;
}

std::string KeyValueConfig::get_string(const std::string& key,
                                       const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::string KeyValueConfig::require_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing required config key: " + key);
  return it->second;
}

long KeyValueConfig::get_int(const std::string& key, long fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  char* end = nullptr;
  long v = std::strtol(it->second.c_str(), &end, 10);
  if (end == it->second.c_str() || *end != '\0') {
    throw ConfigError("config key `" + key + "`: not an integer: " + it->second);
  }
  return v;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  char* end = nullptr;
  double v = std::strtod(it->second.c_str(), &end);
  if (end == it->second.c_str() || *end != '\0') {
    throw ConfigError("config key `" + key + "`: not a number: " + it->second);
  }
  return v;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key `" + key + "`: not a boolean: " + v);
}

std::vector<double> KeyValueConfig::get_double_list(
    const std::string& key, const std::vector<double>& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<double> out;
  std::string item;
  std::istringstream in(it->second);
  while (std::getline(in, item, ',')) {
    std::string s = trim(item);
    if (s.empty()) continue;
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') {
      throw ConfigError("config key `" + key + "`: bad list element: " + s);
    }
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("config key `" + key + "`: empty list");
  return out;
}

std::string KeyValueConfig::to_string() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    out += k;
    out += " = ";
    out += v;
    out += '\n';
  }
  return out;
}

}  // namespace isonmt
