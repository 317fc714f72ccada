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

#ifndef DELTA_RNG_H_
#define DELTA_RNG_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

namespace delta {

// Philox4x32-10 (Salmon et al., SC'11): a keyed bijection on 128-bit
// counters. Output depends only on (key, counter), so any element of any
// stream can be regenerated independently of call order.
std::array<std::uint32_t, 4> Philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

// Sequential view of one Philox stream. The 64-bit seed is the key; the
// counter is (block index low, block index high, stream low, stream high).
//
// Uniform doubles take the top 53 bits of a 64-bit word; normals use
// Box-Muller on two uniforms from the same block, so one block yields two
// normals.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t NextU64();
  // Uniform on the open interval (0, 1).
  double Uniform();
  double Normal();
  // Uniform integer in [0, n), n > 0 (Lemire's rejection method).
  std::uint64_t Below(std::uint64_t n);

  template <typename T>
  void Shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(Below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  void Refill();

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;  // 32-bit words consumed from buffer_
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace delta

#endif  // DELTA_RNG_H_
