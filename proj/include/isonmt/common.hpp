// isonmt/common.hpp

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

#ifndef ISONMT_COMMON_HPP_
#define ISONMT_COMMON_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace isonmt {

// Error categories map onto CLI exit codes: ConfigError -> 3, usage -> 2,
// everything else -> 1.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct DataError : Error {
  using Error::Error;
};

struct CodecError : Error {
  using Error::Error;
};

struct CheckpointError : Error {
  using Error::Error;
};

struct TrainingError : Error {
  using Error::Error;
};

std::string trim(std::string_view s);

/// Whitespace tokenization; runs of whitespace collapse, no empty tokens.
std::vector<std::string> tokenize(std::string_view text);

/// Tokenize and re-join with single spaces.
std::string normalize_whitespace(std::string_view text);

std::string join_tokens(const std::vector<std::string>& tokens);

/// Reads a whole text file into lines (LF or CRLF, final newline optional).
std::vector<std::string> read_lines(const std::string& path);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace isonmt

#endif  // ISONMT_COMMON_HPP_
