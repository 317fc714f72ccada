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

#include "delta/dataset.h"

#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "delta/byte_io.h"
#include "delta/errors.h"
#include "delta/rng.h"

namespace delta {
namespace {

constexpr std::uint64_t kSplitStream = 0x5000;
constexpr std::uint64_t kTemplateStream = 0x5001;
constexpr std::uint64_t kSampleStreamBase = 0x10000;

// Smooth map: sum of a (cutoff + 1)^2 grid of separable cosines with the
// given coefficients, normalized to unit RMS over the image.
std::vector<double> SmoothMap(std::span<const double> coeffs,
                              std::size_t cutoff, std::size_t h,
                              std::size_t w) {
  std::vector<double> map(h * w, 0.0);
  const double pi = std::numbers::pi;
  std::size_t i = 0;
  for (std::size_t fy = 0; fy <= cutoff; ++fy) {
    for (std::size_t fx = 0; fx <= cutoff; ++fx, ++i) {
      for (std::size_t y = 0; y < h; ++y) {
        const double cy = std::cos(pi * fy * (y + 0.5) / h);
        for (std::size_t x = 0; x < w; ++x) {
          map[y * w + x] += coeffs[i] * cy * std::cos(pi * fx * (x + 0.5) / w);
        }
      }
    }
  }
  double ss = 0.0;
  for (double v : map) ss += v * v;
  const double rms = std::sqrt(ss / static_cast<double>(map.size()));
  if (rms > 0.0) {
    for (double& v : map) v /= rms;
  }
  return map;
}

std::uint32_t BigEndian32(ByteReader<void (*)(const std::string&, std::size_t)>&
                              reader,
                          const char* what) {
  const auto b = reader.Raw(4, what);
  return (static_cast<std::uint32_t>(b[0]) << 24) |
         (static_cast<std::uint32_t>(b[1]) << 16) |
         (static_cast<std::uint32_t>(b[2]) << 8) | b[3];
}

[[noreturn]] void IdxImagesFail(const std::string& what, std::size_t offset) {
  throw DataError("idx images: " + what, offset);
}

[[noreturn]] void IdxLabelsFail(const std::string& what, std::size_t offset) {
  throw DataError("idx labels: " + what, offset);
}

}  // namespace

Shape Dataset::shape() const {
  return images.empty() ? Shape{} : ShapeOf(images.front());
}

void Dataset::Validate() const {
  if (images.empty()) throw DataError("dataset: no samples");
  if (labels.size() != images.size()) {
    throw DataError("dataset: image and label counts differ");
  }
  const Shape s = shape();
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (ShapeOf(images[i]) != s) {
      throw DataError("dataset: sample " + std::to_string(i) + " has shape " +
                      images[i].ShapeString() + ", expected " + s.ToString());
    }
    if (labels[i] >= num_classes) {
      throw DataError("dataset: label " + std::to_string(labels[i]) +
                      " of sample " + std::to_string(i) + " outside [0, " +
                      std::to_string(num_classes) + ")");
    }
  }
  std::vector<bool> seen(num_classes, false);
  for (std::size_t i : train) {
    if (i >= images.size()) throw DataError("dataset: bad train index");
    seen[labels[i]] = true;
  }
  for (std::size_t i : val) {
    if (i >= images.size()) throw DataError("dataset: bad validation index");
  }
  for (std::size_t l = 0; l < num_classes; ++l) {
    if (!seen[l]) {
      throw DataError("dataset: class " + std::to_string(l) +
                      " has no training sample");
    }
  }
}

void SplitTrainVal(Dataset& data, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) {
    throw std::invalid_argument("val_fraction must be in [0, 1)");
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  RandomStream rng(seed, kSplitStream);
  rng.Shuffle(std::span<std::size_t>(order));
  const auto n_val = static_cast<std::size_t>(
      std::llround(val_fraction * static_cast<double>(data.size())));
  data.train.assign(order.begin(), order.end() - n_val);
  data.val.assign(order.end() - n_val, order.end());
}

Dataset MakeSynthetic(const SyntheticParams& p) {
  if (p.n == 0 || p.classes < 2 || p.channels == 0 || p.height == 0 ||
      p.width == 0 || p.rank == 0) {
    throw std::invalid_argument("synthetic: sizes must be positive");
  }
  if (p.rank > p.channels) {
    throw std::invalid_argument("synthetic: rank exceeds channel count");
  }
  if (!(p.noise >= 0.0) || !(p.jitter >= 0.0) || !(p.residual_amp >= 0.0)) {
    throw std::invalid_argument("synthetic: amplitudes must be >= 0");
  }
  if (p.residual_stride == 0 || p.residual_block == 0) {
    throw std::invalid_argument("synthetic: residual stride/block must be > 0");
  }
  const std::size_t c = p.channels, h = p.height, w = p.width;
  const std::size_t n_coeffs = (p.freq_cutoff + 1) * (p.freq_cutoff + 1);
  const std::size_t groups = p.pair_split ? (p.classes + 1) / 2 : p.classes;

  // Shared structure: orthonormal channel directions and one coefficient set
  // per (group, direction).
  RandomStream trng(p.seed, kTemplateStream);
  std::vector<std::vector<double>> dirs;
  for (std::size_t j = 0; j < p.rank; ++j) {
    std::vector<double> m(c);
    for (double& v : m) v = trng.Normal();
    for (const auto& prev : dirs) {
      double d = 0.0;
      for (std::size_t i = 0; i < c; ++i) d += m[i] * prev[i];
      for (std::size_t i = 0; i < c; ++i) m[i] -= d * prev[i];
    }
    double norm = 0.0;
    for (double v : m) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : m) v /= norm;
    dirs.push_back(std::move(m));
  }
  std::vector<std::vector<double>> coeffs(groups * p.rank);
  for (auto& cf : coeffs) {
    cf.resize(n_coeffs);
    for (double& v : cf) v = trng.Normal();
  }

  std::vector<double> pattern(h * w, 0.0);
  {
    const std::size_t st = p.residual_stride, blk = p.residual_block;
    const double pi = std::numbers::pi;
    auto basis = [&](std::size_t i) {
      return std::cos(pi * (2.0 * (i % blk) + 1.0) * (blk - 1) / (2.0 * blk));
    };
    for (std::size_t y = 0; y < h; y += st) {
      for (std::size_t x = 0; x < w; x += st) {
        pattern[y * w + x] = basis(y / st) * basis(x / st);
      }
    }
  }

  Dataset data;
  data.num_classes = p.classes;
  data.images.reserve(p.n);
  data.labels.reserve(p.n);
  for (std::size_t i = 0; i < p.n; ++i) {
    RandomStream rng(p.seed, kSampleStreamBase + i);
    const std::size_t label = i % p.classes;
    const std::size_t group = p.pair_split ? label / 2 : label;
    Tensor3 img(c, h, w);
    std::vector<double> cf(n_coeffs);
    for (std::size_t j = 0; j < p.rank; ++j) {
      const auto& base = coeffs[group * p.rank + j];
      for (std::size_t k = 0; k < n_coeffs; ++k) {
        cf[k] = base[k] + p.jitter * rng.Normal();
      }
      const std::vector<double> map = SmoothMap(cf, p.freq_cutoff, h, w);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double a = dirs[j][ch];
        auto plane = img.channel(ch);
        for (std::size_t k = 0; k < plane.size(); ++k) plane[k] += a * map[k];
      }
    }
    if (p.pair_split && p.residual_amp > 0.0) {
      const double sign = (label % 2 == 1) ? 1.0 : -1.0;
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double a = sign * p.residual_amp * dirs[0][ch];
        auto plane = img.channel(ch);
        for (std::size_t k = 0; k < plane.size(); ++k) {
          plane[k] += a * pattern[k];
        }
      }
    }
    for (double& v : img.values()) v += 0.5 + p.noise * rng.Normal();
    data.images.push_back(std::move(img));
    data.labels.push_back(label);
  }
  data.train.resize(p.n);
  std::iota(data.train.begin(), data.train.end(), 0);
  return data;
}

Dataset ParseIdx(std::span<const std::uint8_t> images,
                 std::span<const std::uint8_t> labels,
                 std::size_t num_classes) {
  using Reader = ByteReader<void (*)(const std::string&, std::size_t)>;
  Reader ir(images, IdxImagesFail);
  if (BigEndian32(ir, "magic") != 0x00000803) {
    IdxImagesFail("bad magic, expected 0x00000803", 0);
  }
  const std::uint32_t n = BigEndian32(ir, "image count");
  const std::uint32_t rows = BigEndian32(ir, "row count");
  const std::uint32_t cols = BigEndian32(ir, "column count");
  if (n == 0 || rows == 0 || cols == 0) {
    IdxImagesFail("zero dimension", 4);
  }
  Reader lr(labels, IdxLabelsFail);
  if (BigEndian32(lr, "magic") != 0x00000801) {
    IdxLabelsFail("bad magic, expected 0x00000801", 0);
  }
  const std::uint32_t n_labels = BigEndian32(lr, "label count");
  if (n_labels != n) {
    IdxLabelsFail("label count " + std::to_string(n_labels) +
                      " differs from image count " + std::to_string(n),
                  4);
  }
  Dataset data;
  data.images.reserve(n);
  const std::size_t plane = static_cast<std::size_t>(rows) * cols;
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto px = ir.Raw(plane, "pixels");
    Tensor3 img(1, rows, cols);
    for (std::size_t k = 0; k < plane; ++k) img[k] = px[k] / 255.0;
    data.images.push_back(std::move(img));
  }
  ir.ExpectEnd();
  std::size_t max_label = 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::size_t at = lr.offset();
    const std::size_t label = lr.U8("label");
    if (num_classes != 0 && label >= num_classes) {
      IdxLabelsFail("label " + std::to_string(label) + " >= " +
                        std::to_string(num_classes),
                    at);
    }
    max_label = std::max(max_label, label);
    data.labels.push_back(label);
  }
  lr.ExpectEnd();
  data.num_classes = num_classes != 0 ? num_classes : max_label + 1;
  data.train.resize(n);
  std::iota(data.train.begin(), data.train.end(), 0);
  return data;
}

Dataset LoadIdx(const std::string& images_path, const std::string& labels_path,
                std::size_t num_classes) {
  return ParseIdx(ReadFileBytes(images_path), ReadFileBytes(labels_path),
                  num_classes);
}

}  // namespace delta
