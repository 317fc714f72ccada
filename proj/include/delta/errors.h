//
// Copyright 2026 The Delta Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef DELTA_ERRORS_H_
#define DELTA_ERRORS_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace delta {

// Precondition violations are reported with std::invalid_argument. The types
// below cover failures that callers (mostly the CLI) map to distinct exit
// codes.

// Malformed or inconsistent input data (IDX files, tensor files, checkpoints).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
  DataError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte offset " +
                           std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_ = 0;
};

// Anything that breaks the private/public channel contract: undecodable
// frames, frames outside a phase whitelist, raw residual floats on the wire.
class ProtocolViolation : public std::runtime_error {
 public:
  explicit ProtocolViolation(const std::string& what)
      : std::runtime_error(what) {}
};

class FrameDecodeError : public ProtocolViolation {
 public:
  FrameDecodeError(const std::string& what, std::size_t offset)
      : ProtocolViolation("frame decode: " + what + " (at byte offset " +
                          std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// Non-finite loss or gradient during training.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace delta

#endif  // DELTA_ERRORS_H_
