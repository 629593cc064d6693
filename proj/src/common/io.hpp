/*
 * Copyright 2026 The predgap Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef PREDGAP_COMMON_IO_HPP_
#define PREDGAP_COMMON_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace predgap {

using Json = nlohmann::ordered_json;

// Shortest decimal form that parses back to the same double.
std::string FormatDouble(double v);
std::string FormatOptional(const std::optional<double>& v);

// Minimal RFC 4180 CSV: comma delimiter, '\n' line endings, fields quoted
// only when they contain a comma, quote or newline. Empty field = missing.
class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void WriteRow(const std::vector<std::string>& fields);
  void Close();

 private:
  std::filesystem::path path_;
  std::string buffer_;
  bool closed_ = false;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column; throws DependencyError when absent.
  size_t Column(std::string_view name) const;
};

CsvTable ReadCsv(const std::filesystem::path& path);

std::optional<double> ParseOptionalDouble(std::string_view field);
double ParseDouble(std::string_view field);
int64_t ParseInt(std::string_view field);

std::string ReadFile(const std::filesystem::path& path);
void WriteFile(const std::filesystem::path& path, std::string_view content);
Json ReadJsonFile(const std::filesystem::path& path);
// Pretty-printed with a trailing newline; keys keep insertion order, so
// output is byte-stable.
void WriteJsonFile(const std::filesystem::path& path, const Json& value);

// Lowercase hex SHA-256 of a byte string / a file's content.
std::string Sha256Hex(std::string_view bytes);
std::string Sha256File(const std::filesystem::path& path);

// 64-bit FNV-1a, used for schema hashes embedded in model files.
uint64_t Fnv1a64(std::string_view bytes);
std::string HexU64(uint64_t v);

}  // namespace predgap

#endif  // PREDGAP_COMMON_IO_HPP_
