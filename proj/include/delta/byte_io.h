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

#ifndef DELTA_BYTE_IO_H_
#define DELTA_BYTE_IO_H_

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "delta/errors.h"

namespace delta {

// Little-endian encoder for the repo's binary formats.
class ByteWriter {
 public:
  void Bytes(std::string_view s) {
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void U8(std::uint8_t v) { out_.push_back(v); }
  void U32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void U64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void F64(double v) { U64(std::bit_cast<std::uint64_t>(v)); }
  void F64s(std::span<const double> vs) {
    out_.reserve(out_.size() + 8 * vs.size());
    for (double v : vs) F64(v);
  }
  void Raw(std::span<const std::uint8_t> bytes) {
    out_.insert(out_.end(), bytes.begin(), bytes.end());
  }

  std::vector<std::uint8_t> Take() { return std::move(out_); }
  std::size_t size() const { return out_.size(); }

 private:
  std::vector<std::uint8_t> out_;
};

// Little-endian decoder; `Fail` decides which exception type carries the
// offset so frame and file parsers can report their own error kinds.
template <typename Fail>
class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> data, Fail fail)
      : data_(data), fail_(fail) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

  void Expect(std::string_view magic, const char* what) {
    Need(magic.size(), what);
    if (std::memcmp(data_.data() + pos_, magic.data(), magic.size()) != 0) {
      fail_(std::string("bad magic, expected ") + what, pos_);
    }
    pos_ += magic.size();
  }
  std::uint8_t U8(const char* what) {
    Need(1, what);
    return data_[pos_++];
  }
  std::uint32_t U32(const char* what) {
    Need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  std::uint64_t U64(const char* what) {
    Need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    }
    pos_ += 8;
    return v;
  }
  double F64(const char* what) { return std::bit_cast<double>(U64(what)); }
  std::span<const std::uint8_t> Raw(std::size_t n, const char* what) {
    Need(n, what);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  void ExpectEnd() {
    if (pos_ != data_.size()) fail_("trailing bytes", pos_);
  }

 private:
  void Need(std::size_t n, const char* what) {
    if (data_.size() - pos_ < n) {
      fail_(std::string("truncated while reading ") + what, pos_);
    }
  }

  std::span<const std::uint8_t> data_;
  Fail fail_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> ReadFileBytes(const std::string& path);
void WriteFileBytes(const std::string& path,
                    std::span<const std::uint8_t> bytes);

}  // namespace delta

#endif  // DELTA_BYTE_IO_H_
