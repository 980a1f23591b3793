// isonmt/config.hpp

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

#ifndef ISONMT_CONFIG_HPP_
#define ISONMT_CONFIG_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "isonmt/common.hpp"

namespace isonmt {

// `key = value` lines, `#` starts a comment, blank lines ignored.
// Keys are kept in sorted order so a resolved dump is reproducible.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse_file(const std::string& path);
  static KeyValueConfig parse_string(const std::string& text);

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;

  long get_int(const std::string& key, long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  /// Comma-separated list of doubles, e.g. "0.3,0.2,0.1".
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }

  /// Resolved `key = value` rendering, one line per key.
  std::string to_string() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace isonmt

#endif  // ISONMT_CONFIG_HPP_
