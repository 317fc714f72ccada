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

#include "delta/privacy.h"

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "delta/rng.h"

namespace delta {
namespace {

void RequireProbability(double p) {
  if (!(p > 0.0 && p <= 1.0)) {
    throw std::invalid_argument("sampling probability must be in (0, 1]");
  }
}

std::string Fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "\"inf\"" : "\"-inf\"";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

bool PrivacyParams::unbounded() const { return std::isinf(epsilon); }

AmplifiedBudget Amplify(double eps_prime, double delta_prime, double p) {
  if (!(eps_prime > 0.0)) {
    throw std::invalid_argument("Amplify: eps' must be > 0");
  }
  if (!(delta_prime > 0.0 && delta_prime < 1.0)) {
    throw std::invalid_argument("Amplify: delta' must be in (0, 1)");
  }
  RequireProbability(p);
  if (std::isinf(eps_prime)) return {eps_prime, p * delta_prime};
  return {std::log1p(p * std::expm1(eps_prime)), p * delta_prime};
}

PrivacyParams Calibrate(double epsilon, double delta, double p, double clip) {
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("Calibrate: epsilon must be > 0");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("Calibrate: delta must be in (0, 1)");
  }
  RequireProbability(p);
  if (!(clip > 0.0) || !std::isfinite(clip)) {
    throw std::invalid_argument("Calibrate: C must be a positive real");
  }
  PrivacyParams out;
  out.epsilon = epsilon;
  out.delta = delta;
  out.p = p;
  out.clip = clip;
  out.delta_prime = delta / p;
  if (!(out.delta_prime < 1.0)) {
    throw std::invalid_argument(
        "Calibrate: delta / p must be < 1 (per-mechanism delta')");
  }
  if (std::isinf(epsilon)) {
    out.eps_prime = epsilon;
    out.sigma = 0.0;
    return out;
  }
  out.eps_prime = std::log1p(std::expm1(epsilon) / p);
  out.sigma =
      clip * std::sqrt(2.0 * std::log(2.0 / out.delta_prime) / out.eps_prime);
  return out;
}

std::string AccountantJson(const PrivacyParams& params) {
  std::string s = "{\n";
  s += "  \"epsilon\": " + Fmt(params.epsilon) + ",\n";
  s += "  \"delta\": " + Fmt(params.delta) + ",\n";
  s += "  \"p\": " + Fmt(params.p) + ",\n";
  s += "  \"C\": " + Fmt(params.clip) + ",\n";
  s += "  \"eps_prime\": " + Fmt(params.eps_prime) + ",\n";
  s += "  \"delta_prime\": " + Fmt(params.delta_prime) + ",\n";
  s += "  \"sigma\": " + Fmt(params.sigma) + "\n";
  s += "}\n";
  return s;
}

Tensor3 Perturb(const Tensor3& x, double sigma, std::uint64_t seed,
                std::uint64_t stream) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("Perturb: sigma must be finite and >= 0");
  }
  if (sigma == 0.0) return x;
  Tensor3 out = x;
  RandomStream rng(seed, stream);
  for (double& v : out.values()) v += sigma * rng.Normal();
  return out;
}

BitTensor::BitTensor(std::size_t channels, std::size_t height,
                     std::size_t width)
    : c_(channels),
      h_(height),
      w_(width),
      packed_((channels * height * width + 7) / 8, 0) {}

BitTensor::BitTensor(std::size_t channels, std::size_t height,
                     std::size_t width, std::vector<std::uint8_t> packed)
    : c_(channels), h_(height), w_(width), packed_(std::move(packed)) {
  const std::size_t n = c_ * h_ * w_;
  if (packed_.size() != (n + 7) / 8) {
    throw std::invalid_argument("BitTensor: packed length mismatch");
  }
  if (n % 8 != 0) {
    const auto mask = static_cast<std::uint8_t>(0xFFu >> (n % 8));
    if (packed_.back() & mask) {
      throw std::invalid_argument("BitTensor: nonzero padding bits");
    }
  }
}

void BitTensor::Set(std::size_t i, bool bit) {
  const auto mask = static_cast<std::uint8_t>(0x80u >> (i & 7));
  if (bit) {
    packed_[i >> 3] |= mask;
  } else {
    packed_[i >> 3] &= static_cast<std::uint8_t>(~mask);
  }
}

Tensor3 BitTensor::ToFloats() const {
  Tensor3 out(c_, h_, w_);
  for (std::size_t i = 0; i < size(); ++i) out[i] = Get(i) ? 1.0 : 0.0;
  return out;
}

BitTensor Quantize(const Tensor3& noisy) {
  BitTensor bits(noisy.channels(), noisy.height(), noisy.width());
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    if (noisy[i] >= 0.0) bits.Set(i, true);
  }
  return bits;
}

const BitTensor& ResidualCache::Get(std::uint64_t sample_id) const {
  auto it = entries_.find(sample_id);
  if (it == entries_.end()) {
    throw std::out_of_range("residual cache miss for sample " +
                            std::to_string(sample_id));
  }
  return it->second;
}

BitTensor ReleaseResidual(const Tensor3& residual, const PrivacyParams& params,
                          std::uint64_t seed, std::uint64_t stream) {
  const double norm = residual.FrobeniusNorm();
  if (norm > params.clip + 1e-9) {
    throw std::invalid_argument(
        "sensitivity violation: residual norm " + std::to_string(norm) +
        " exceeds C = " + std::to_string(params.clip));
  }
  return Quantize(Perturb(residual, params.sigma, seed, stream));
}

ResidualCache BuildCache(std::span<const Tensor3> residuals,
                         std::span<const std::uint64_t> sample_ids,
                         const PrivacyParams& params, std::uint64_t seed) {
  if (residuals.size() != sample_ids.size()) {
    throw std::invalid_argument("BuildCache: residual/id count mismatch");
  }
  std::map<std::uint64_t, BitTensor> entries;
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    const std::uint64_t id = sample_ids[i];
    if (entries.contains(id)) {
      throw std::invalid_argument("BuildCache: duplicate sample id " +
                                  std::to_string(id));
    }
    entries.emplace(id, ReleaseResidual(residuals[i], params, seed,
                                        kTrainNoiseDomain + id));
  }
  return ResidualCache(std::move(entries), params, seed);
}

}  // namespace delta
