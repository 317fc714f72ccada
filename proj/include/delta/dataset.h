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

#ifndef DELTA_DATASET_H_
#define DELTA_DATASET_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "delta/layers.h"
#include "delta/tensor.h"

namespace delta {

// Labelled images plus a train/validation split given as index lists. A
// sample's id is its index in `images`.
struct Dataset {
  std::vector<Tensor3> images;
  std::vector<std::size_t> labels;
  std::size_t num_classes = 0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;

  std::size_t size() const { return images.size(); }
  Shape shape() const;
  // Throws DataError on mixed shapes, labels outside [0, L), or a class with
  // no training sample.
  void Validate() const;
};

// Deterministic shuffle, then the last round(fraction * N) samples go to
// validation.
void SplitTrainVal(Dataset& data, double val_fraction, std::uint64_t seed);

// Images whose class is split between a smooth low-rank component and a
// fine-grained high-frequency one.
//
// With pair_split, class k = 2g + b. The low-frequency part (channel
// directions m_1..m_rank times smooth maps built from cosines up to
// freq_cutoff half-cycles per image) depends only on the group g, with
// per-sample jitter. The bit b is carried by a pattern of amplitude
// residual_amp along m_1 with sign 2b - 1: on the sub-lattice of pixels whose
// coordinates are multiples of residual_stride it is the highest-order
// residual_block-point DCT-II basis function in both axes, tiled; elsewhere
// it is zero. A stride-residual_stride convolution with kernel size up to
// 2 * residual_stride - 1 and "same" padding maps it to a multiple of the
// tiled basis function, which a block lowpass on residual_block blocks
// removes exactly. Without pair_split each class gets its own smooth template
// and no pattern. Pixel noise is i.i.d. N(0, noise^2).
struct SyntheticParams {
  std::size_t n = 2000;
  std::size_t classes = 4;
  std::size_t channels = 3;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t rank = 2;
  std::size_t freq_cutoff = 2;
  double noise = 0.1;
  double jitter = 0.3;
  double residual_amp = 0.5;
  std::size_t residual_stride = 2;
  std::size_t residual_block = 8;
  bool pair_split = true;
  std::uint64_t seed = 1;
};

Dataset MakeSynthetic(const SyntheticParams& params);

// IDX (big-endian) images (magic 0x00000803, dims n, rows, cols, unsigned
// bytes) and labels (magic 0x00000801, dim n). Pixels are scaled by 1/255.
// num_classes = 0 infers max label + 1. Errors carry the byte offset.
Dataset ParseIdx(std::span<const std::uint8_t> images,
                 std::span<const std::uint8_t> labels,
                 std::size_t num_classes = 0);
Dataset LoadIdx(const std::string& images_path, const std::string& labels_path,
                std::size_t num_classes = 0);

}  // namespace delta

#endif  // DELTA_DATASET_H_
