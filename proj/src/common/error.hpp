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

#ifndef PREDGAP_COMMON_ERROR_HPP_
#define PREDGAP_COMMON_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace predgap {

// Error categories map one-to-one onto the C API status codes and the CLI
// exit codes (2 config, 3 dependency, 4 invariant).
enum class ErrorKind {
  kInvalidArgument = 1,
  kConfig = 2,
  kDependency = 3,
  kInvariant = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what)
      : Error(ErrorKind::kInvalidArgument, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorKind::kConfig, what) {}
};

class DependencyError : public Error {
 public:
  explicit DependencyError(const std::string& what)
      : Error(ErrorKind::kDependency, what) {}
};

class InvariantError : public Error {
 public:
  explicit InvariantError(const std::string& what)
      : Error(ErrorKind::kInvariant, what) {}
};

}  // namespace predgap

#endif  // PREDGAP_COMMON_ERROR_HPP_
