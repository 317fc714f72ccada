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

#ifndef DELTA_PRIVACY_H_
#define DELTA_PRIVACY_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "delta/tensor.h"

namespace delta {

// Budget of the one-shot residual release and the Gaussian noise that
// achieves it under batch subsampling with probability p.
//
//   delta'   = delta / p
//   epsilon' = ln(1 + (e^epsilon - 1) / p)
//   sigma    = C * sqrt(2 ln(2 / delta') / epsilon')
//
// epsilon = +inf means no perturbation (sigma = 0).
struct PrivacyParams {
  double epsilon = 0.0;
  double delta = 0.0;
  double p = 1.0;
  double clip = 1.0;
  double eps_prime = 0.0;
  double delta_prime = 0.0;
  double sigma = 0.0;

  bool unbounded() const;
};

struct AmplifiedBudget {
  double epsilon;
  double delta;
};

// Subsampling amplification: epsilon = ln(1 + p(e^eps' - 1)),
// delta = p * delta'. Rejects eps' <= 0, delta' outside (0, 1), p outside
// (0, 1].
AmplifiedBudget Amplify(double eps_prime, double delta_prime, double p);

// Inverts Amplify for the target (epsilon, delta) and sets sigma. Rejects
// delta / p >= 1.
PrivacyParams Calibrate(double epsilon, double delta, double p, double clip);

// Accountant output: keys epsilon, delta, p, C, eps_prime, delta_prime, sigma
// with 12 significant digits.
std::string AccountantJson(const PrivacyParams& params);

// Noise stream ids. Every perturbed tensor draws from Philox stream
// (seed, domain + index), so a sample's noise never depends on schedule.
inline constexpr std::uint64_t kTrainNoiseDomain = 0;
inline constexpr std::uint64_t kValidationNoiseDomain = std::uint64_t{1} << 40;
inline constexpr std::uint64_t kInferenceNoiseDomain = std::uint64_t{2} << 40;

// x + N(0, sigma^2 I) drawn from stream (seed, stream).
Tensor3 Perturb(const Tensor3& x, double sigma, std::uint64_t seed,
                std::uint64_t stream);

// Binary tensor packed channel-major, most significant bit first.
class BitTensor {
 public:
  BitTensor() = default;
  BitTensor(std::size_t channels, std::size_t height, std::size_t width);
  // Rejects a byte count different from ceil(c*h*w / 8) and nonzero padding
  // bits.
  BitTensor(std::size_t channels, std::size_t height, std::size_t width,
            std::vector<std::uint8_t> packed);

  std::size_t channels() const { return c_; }
  std::size_t height() const { return h_; }
  std::size_t width() const { return w_; }
  std::size_t size() const { return c_ * h_ * w_; }

  bool Get(std::size_t i) const {
    return (packed_[i >> 3] >> (7 - (i & 7))) & 1u;
  }
  void Set(std::size_t i, bool bit);

  const std::vector<std::uint8_t>& packed() const { return packed_; }
  // {0.0, 1.0} tensor, the form the residual model consumes.
  Tensor3 ToFloats() const;

  friend bool operator==(const BitTensor&, const BitTensor&) = default;

 private:
  std::size_t c_ = 0;
  std::size_t h_ = 0;
  std::size_t w_ = 0;
  std::vector<std::uint8_t> packed_;
};

// 0 where the value is negative, 1 where it is >= 0.
BitTensor Quantize(const Tensor3& noisy);

// Perturbed, quantized residuals, each produced exactly once. Immutable after
// construction.
class ResidualCache {
 public:
  ResidualCache() = default;
  ResidualCache(std::map<std::uint64_t, BitTensor> entries,
                PrivacyParams params, std::uint64_t seed)
      : entries_(std::move(entries)), params_(params), seed_(seed) {}

  // Throws std::out_of_range on a miss.
  const BitTensor& Get(std::uint64_t sample_id) const;
  bool Contains(std::uint64_t sample_id) const {
    return entries_.contains(sample_id);
  }
  std::size_t size() const { return entries_.size(); }
  const PrivacyParams& params() const { return params_; }
  std::uint64_t seed() const { return seed_; }
  const std::map<std::uint64_t, BitTensor>& entries() const {
    return entries_;
  }

 private:
  std::map<std::uint64_t, BitTensor> entries_;
  PrivacyParams params_;
  std::uint64_t seed_ = 0;
};

// Sensitivity check, perturbation with stream (seed, domain + id), then
// quantization. Throws std::invalid_argument if a residual's l2 norm exceeds
// params.clip by more than 1e-9.
BitTensor ReleaseResidual(const Tensor3& residual, const PrivacyParams& params,
                          std::uint64_t seed, std::uint64_t stream);

ResidualCache BuildCache(std::span<const Tensor3> residuals,
                         std::span<const std::uint64_t> sample_ids,
                         const PrivacyParams& params, std::uint64_t seed);

}  // namespace delta

#endif  // DELTA_PRIVACY_H_
