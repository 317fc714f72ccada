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

#include "delta/config.h"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <system_error>

#include "delta/errors.h"

namespace delta {
namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double ParseDouble(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError("config: " + key + " expects a number, got '" + v + "'");
  }
  return out;
}

std::size_t ParseCount(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError("config: " + key + " expects a non-negative integer, "
                      "got '" + v + "'");
  }
  return out;
}

bool ParseBool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: " + key + " expects true or false, got '" + v +
                    "'");
}

std::string FormatDouble(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string ExistingPath(const std::string& key, const std::string& v) {
  if (!v.empty() && !std::filesystem::exists(v)) {
    throw ConfigError("config: " + key + " path does not exist: " + v);
  }
  return v;
}

struct Field {
  ConfigKey key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define DELTA_COUNT(name, member, help)                                   \
  Field {                                                                 \
    {name, help},                                                         \
        [](RunConfig& c, const std::string& v) {                          \
          c.member = ParseCount(name, v);                                 \
        },                                                                \
        [](const RunConfig& c) { return std::to_string(c.member); }       \
  }
#define DELTA_REAL(name, member, help)                                    \
  Field {                                                                 \
    {name, help},                                                         \
        [](RunConfig& c, const std::string& v) {                          \
          c.member = ParseDouble(name, v);                                \
        },                                                                \
        [](const RunConfig& c) { return FormatDouble(c.member); }         \
  }
#define DELTA_FLAG(name, member, help)                                    \
  Field {                                                                 \
    {name, help},                                                         \
        [](RunConfig& c, const std::string& v) {                          \
          c.member = ParseBool(name, v);                                  \
        },                                                                \
        [](const RunConfig& c) {                                          \
          return std::string(c.member ? "true" : "false");                \
        }                                                                 \
  }
#define DELTA_TEXT(name, member, help)                                    \
  Field {                                                                 \
    {name, help},                                                         \
        [](RunConfig& c, const std::string& v) { c.member = v; },         \
        [](const RunConfig& c) { return c.member; }                       \
  }
#define DELTA_PATH(name, member, help)                                    \
  Field {                                                                 \
    {name, help},                                                         \
        [](RunConfig& c, const std::string& v) {                          \
          c.member = ExistingPath(name, v);                               \
        },                                                                \
        [](const RunConfig& c) { return c.member; }                       \
  }

const std::vector<Field>& Fields() {
  static const std::vector<Field> fields = {
      DELTA_TEXT("dataset", dataset, "synthetic or idx"),
      DELTA_PATH("idx_images", idx_images, "IDX image file"),
      DELTA_PATH("idx_labels", idx_labels, "IDX label file"),
      DELTA_COUNT("num_classes", num_classes,
                  "class count L (idx: 0 infers it)"),
      DELTA_REAL("val_fraction", val_fraction, "held-out fraction"),
      DELTA_COUNT("synthetic_n", synthetic.n, "synthetic sample count"),
      DELTA_COUNT("synthetic_channels", synthetic.channels, "image channels"),
      DELTA_COUNT("synthetic_height", synthetic.height, "image height"),
      DELTA_COUNT("synthetic_width", synthetic.width, "image width"),
      DELTA_COUNT("synthetic_rank", synthetic.rank, "channel rank"),
      DELTA_COUNT("synthetic_freq_cutoff", synthetic.freq_cutoff,
                  "highest smooth frequency"),
      DELTA_REAL("synthetic_noise", synthetic.noise, "pixel noise std"),
      DELTA_REAL("synthetic_jitter", synthetic.jitter, "per-sample jitter"),
      DELTA_REAL("synthetic_residual_amp", synthetic.residual_amp,
                 "amplitude of the high-frequency class cue"),
      DELTA_FLAG("synthetic_pair_split", synthetic.pair_split,
                 "split classes into smooth group and fine bit"),
      DELTA_COUNT("synthetic_seed", synthetic.seed, "generator seed"),
      DELTA_COUNT("r", decomposition.r, "principal channels kept"),
      DELTA_COUNT("t", decomposition.t, "DCT source block size"),
      DELTA_COUNT("t_prime", decomposition.t_prime, "DCT kept block size"),
      DELTA_REAL("clip", decomposition.clip, "residual clipping scale C"),
      DELTA_REAL("alpha", alpha, "residual logit scale"),
      DELTA_FLAG("batch_norm", batch_norm, "batch norm in residual blocks"),
      DELTA_COUNT("ep1", train.ep1, "stage-1 epochs"),
      DELTA_COUNT("ep2", train.ep2, "stage-2 epochs"),
      DELTA_COUNT("batch_size", train.batch_size, "batch size b"),
      DELTA_REAL("lr", train.lr, "initial learning rate"),
      DELTA_REAL("weight_decay", train.weight_decay, "weight decay"),
      DELTA_REAL("momentum", train.momentum, "SGD momentum"),
      DELTA_REAL("orth_reg", train.orth_reg, "orthogonality coefficient"),
      DELTA_REAL("epsilon", train.epsilon, "privacy epsilon (inf: no noise)"),
      DELTA_REAL("delta", train.delta, "privacy delta"),
      DELTA_REAL("sigma", train.sigma,
                 "noise std; negative derives it from epsilon"),
      DELTA_FLAG("perturb_inference", train.perturb_inference,
                 "perturb residuals released at inference"),
      DELTA_COUNT("seed", train.seed, "seed for split, init and batches"),
      DELTA_TEXT("mode", mode, "bits or none (main-only)"),
      DELTA_TEXT("out", out, "run output directory"),
  };
  return fields;
}

#undef DELTA_COUNT
#undef DELTA_REAL
#undef DELTA_FLAG
#undef DELTA_TEXT
#undef DELTA_PATH

}  // namespace

const std::vector<ConfigKey>& RunConfig::Keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const Field& f : Fields()) out.push_back(f.key);
    return out;
  }();
  return keys;
}

void RunConfig::Set(const std::string& key, const std::string& value) {
  for (const Field& f : Fields()) {
    if (f.key.name == key) {
      f.set(*this, value);
      return;
    }
  }
  throw ConfigError("config: unknown key '" + key + "'");
}

void RunConfig::Apply(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::set<std::string> seen;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    const std::string body = Trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    const std::string where = "config line " + std::to_string(number) + ": ";
    if (eq == std::string::npos) {
      throw ConfigError(where + "expected 'key = value'");
    }
    const std::string key = Trim(body.substr(0, eq));
    if (!seen.insert(key).second) {
      throw ConfigError(where + "duplicate key '" + key + "'");
    }
    try {
      Set(key, Trim(body.substr(eq + 1)));
    } catch (const ConfigError& e) {
      std::string msg = e.what();
      if (msg.rfind("config: ", 0) == 0) msg = msg.substr(8);
      throw ConfigError(where + msg);
    }
  }
}

void RunConfig::Validate() const {
  if (dataset != "synthetic" && dataset != "idx") {
    throw ConfigError("config: dataset must be synthetic or idx");
  }
  if (dataset == "idx" && (idx_images.empty() || idx_labels.empty())) {
    throw ConfigError("config: idx dataset needs idx_images and idx_labels");
  }
  if (mode != "bits" && mode != "none") {
    throw ConfigError("config: mode must be bits or none");
  }
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ConfigError("config: val_fraction must be in (0, 1)");
  }
  if (out.empty()) throw ConfigError("config: out must not be empty");
  try {
    train.Validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

std::string RunConfig::ToText() const {
  std::string s;
  for (const Field& f : Fields()) s += f.key.name + " = " + f.get(*this) + "\n";
  return s;
}

Dataset RunConfig::LoadDataset() const {
  Dataset data;
  if (dataset == "idx") {
    data = LoadIdx(idx_images, idx_labels, num_classes);
  } else {
    SyntheticParams sp = synthetic;
    sp.classes = num_classes;
    data = MakeSynthetic(sp);
  }
  SplitTrainVal(data, val_fraction, train.seed);
  data.Validate();
  return data;
}

ModelSpec RunConfig::Spec(Shape input, std::size_t classes) const {
  ModelSpec spec =
      ModelSpec::Toy(input, classes, decomposition, alpha, batch_norm);
  spec.Validate();
  return spec;
}

RunConfig ParseRunConfig(const std::string& text) {
  RunConfig c;
  c.Apply(text);
  c.Validate();
  return c;
}

RunConfig LoadRunConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseRunConfig(ss.str());
}

}  // namespace delta
