/**
 * Copyright 2026 The Plasmodium Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace plasmodium {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unusable configuration: missing class directories, invalid parameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data that cannot be used as given (undecodable images, bad files).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Incompatible tensor or layer shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

/// A model cannot be written to, or faithfully read back from, an export
/// bundle.
class ExportError : public Error {
 public:
  using Error::Error;
};

/// A pretrained weight snapshot could not be located or read.
class SnapshotUnavailable : public Error {
 public:
  SnapshotUnavailable(const std::string& what, std::string path)
      : Error(what), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace plasmodium
