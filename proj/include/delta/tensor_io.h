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

#ifndef DELTA_TENSOR_IO_H_
#define DELTA_TENSOR_IO_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "delta/tensor.h"

namespace delta {

// "DLT0", u32 c, u32 h, u32 w (little-endian), then c*h*w little-endian
// IEEE-754 doubles in (channel, row, col) order.
std::vector<std::uint8_t> EncodeTensor(const Tensor3& t);
// Throws DataError with the failing byte offset.
Tensor3 DecodeTensor(std::span<const std::uint8_t> bytes);

void WriteTensorFile(const std::string& path, const Tensor3& t);
Tensor3 ReadTensorFile(const std::string& path);

}  // namespace delta

#endif  // DELTA_TENSOR_IO_H_
