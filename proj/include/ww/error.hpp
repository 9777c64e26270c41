// Copyright 2026 The Wakeword Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace ww {

/// Base class for every error raised by the toolkit. `kind()` is a stable
/// machine-readable tag used by the CLI when it reports failures.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

// Malformed input file or record.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& m) : Error("format", m) {}
};

// Well-formed input that uses a feature we do not handle (e.g. a codec).
class UnsupportedError : public Error {
 public:
  explicit UnsupportedError(const std::string& m) : Error("unsupported", m) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& m) : Error("config", m) {}
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& m) : Error("dimension", m) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& m) : Error("io", m) {}
};

class ChecksumError : public Error {
 public:
  explicit ChecksumError(const std::string& m) : Error("checksum", m) {}
};

class VersionError : public Error {
 public:
  explicit VersionError(const std::string& m) : Error("version", m) {}
};

class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& m) : Error("training", m) {}
};

}  // namespace ww
