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

#ifndef DELTA_CONFIG_H_
#define DELTA_CONFIG_H_

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "delta/dataset.h"
#include "delta/model.h"
#include "delta/training.h"

namespace delta {

// Bad keys, bad values or missing paths in a run configuration.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigKey {
  std::string name;
  std::string help;
};

// Everything a CLI run needs, parsed from a line-oriented `key = value` file
// ('#' starts a comment). Every key has a default, so an empty file is a
// valid synthetic-benchmark run.
struct RunConfig {
  std::string dataset = "synthetic";  // "synthetic" or "idx"
  std::string idx_images;
  std::string idx_labels;
  SyntheticParams synthetic;
  // Synthetic class count; for IDX, 0 infers max label + 1.
  std::size_t num_classes = 4;
  double val_fraction = 0.2;
  DecompositionConfig decomposition{2, 8, 4, 1.0};
  double alpha = 1.0;
  bool batch_norm = true;
  TrainConfig train;
  std::string mode = "bits";  // "bits" or "none" (main-only)
  std::string out = "run";

  static const std::vector<ConfigKey>& Keys();

  // Throws ConfigError naming the key. Paths are checked for existence.
  void Set(const std::string& key, const std::string& value);
  // Applies every line of `text`; errors carry the line number. Duplicate
  // keys are rejected.
  void Apply(const std::string& text);
  // Cross-field checks (dataset kind, mode, fractions, train config).
  void Validate() const;
  // Canonical `key = value` text; Apply(ToText()) reproduces the config.
  std::string ToText() const;

  Dataset LoadDataset() const;
  ModelSpec Spec(Shape input, std::size_t num_classes) const;
};

RunConfig ParseRunConfig(const std::string& text);
RunConfig LoadRunConfig(const std::string& path);

}  // namespace delta

#endif  // DELTA_CONFIG_H_
