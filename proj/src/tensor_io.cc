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

#include "delta/tensor_io.h"

#include <cmath>
#include <fstream>
#include <iterator>

#include "delta/byte_io.h"
#include "delta/errors.h"

namespace delta {

std::vector<std::uint8_t> ReadFileBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>());
}

void WriteFileBytes(const std::string& path,
                    std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to " + path);
}

std::vector<std::uint8_t> EncodeTensor(const Tensor3& t) {
  ByteWriter w;
  w.Bytes("DLT0");
  w.U32(static_cast<std::uint32_t>(t.channels()));
  w.U32(static_cast<std::uint32_t>(t.height()));
  w.U32(static_cast<std::uint32_t>(t.width()));
  w.F64s(t.values());
  return w.Take();
}

Tensor3 DecodeTensor(std::span<const std::uint8_t> bytes) {
  auto fail = [](const std::string& what, std::size_t offset) {
    throw DataError("tensor file: " + what, offset);
  };
  ByteReader r(bytes, fail);
  r.Expect("DLT0", "DLT0");
  const std::uint32_t c = r.U32("channel count");
  const std::uint32_t h = r.U32("height");
  const std::uint32_t w = r.U32("width");
  if (c == 0 || h == 0 || w == 0) fail("zero dimension", 4);
  const std::uint64_t n = std::uint64_t{c} * h * w;
  if (r.remaining() / 8 < n) fail("truncated payload", r.offset());
  std::vector<double> data(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::size_t at = r.offset();
    data[i] = r.F64("payload");
    if (!std::isfinite(data[i])) fail("non-finite value", at);
  }
  r.ExpectEnd();
  return Tensor3(c, h, w, std::move(data));
}

void WriteTensorFile(const std::string& path, const Tensor3& t) {
  WriteFileBytes(path, EncodeTensor(t));
}

Tensor3 ReadTensorFile(const std::string& path) {
  return DecodeTensor(ReadFileBytes(path));
}

}  // namespace delta
