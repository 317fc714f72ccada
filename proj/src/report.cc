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

#include "delta/report.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <tuple>

#include "delta/errors.h"
#include "json.hpp"

namespace delta {
namespace {

using nlohmann::ordered_json;

ordered_json Num(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double ReadNum(const ordered_json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    throw DataError("report: bad number '" + s + "'");
  }
  if (j.is_null()) return NAN;
  return j.get<double>();
}

std::string Fixed(double v, int digits) {
  if (std::isnan(v)) return "-";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string TrainReportJson(const TrainReport& r, const ModelSpec& spec) {
  ordered_json j;
  j["residual_mode"] = r.residual_mode;
  j["spec"] = {
      {"input", {spec.input.c, spec.input.h, spec.input.w}},
      {"num_classes", spec.num_classes},
      {"alpha", Num(spec.alpha)},
      {"r", spec.decomposition.r},
      {"t", spec.decomposition.t},
      {"t_prime", spec.decomposition.t_prime},
      {"clip", Num(spec.decomposition.clip)},
  };
  j["n_train"] = r.n_train;
  j["n_val"] = r.n_val;
  const PrivacyParams& p = r.privacy;
  j["privacy"] = {
      {"epsilon", Num(p.epsilon)},         {"delta", Num(p.delta)},
      {"p", Num(p.p)},                     {"C", Num(p.clip)},
      {"eps_prime", Num(p.eps_prime)},     {"delta_prime", Num(p.delta_prime)},
      {"sigma", Num(p.sigma)},
  };
  j["macs"] = {{"bb", r.macs.bb},
               {"main", r.macs.main},
               {"res", r.macs.res},
               {"private_to_public", Num(r.macs.PrivateToPublic())}};
  j["phase_bytes"] = r.phase_bytes;
  j["compression_ratio"] = Num(r.compression_ratio);
  ordered_json epochs = ordered_json::array();
  for (const EpochStats& e : r.epochs) {
    epochs.push_back({{"stage", e.stage},
                      {"epoch", e.epoch},
                      {"train_loss", Num(e.train_loss)},
                      {"val_main", Num(e.val_main)},
                      {"val_merged", Num(e.val_merged)}});
  }
  j["epochs"] = epochs;
  j["final"] = {{"val_main", Num(r.FinalMain())},
                {"val_merged", Num(r.FinalMerged())}};
  return j.dump(2) + "\n";
}

RunSummary ParseTrainReport(const std::string& json, const std::string& path) {
  RunSummary s;
  s.path = path;
  try {
    const ordered_json j = ordered_json::parse(json);
    s.residual_mode = j.at("residual_mode").get<std::string>();
    const auto& in = j.at("spec").at("input");
    s.input = {in.at(0).get<std::size_t>(), in.at(1).get<std::size_t>(),
               in.at(2).get<std::size_t>()};
    s.num_classes = j.at("spec").at("num_classes").get<std::size_t>();
    const auto& p = j.at("privacy");
    s.privacy.epsilon = ReadNum(p.at("epsilon"));
    s.privacy.delta = ReadNum(p.at("delta"));
    s.privacy.p = ReadNum(p.at("p"));
    s.privacy.clip = ReadNum(p.at("C"));
    s.privacy.eps_prime = ReadNum(p.at("eps_prime"));
    s.privacy.delta_prime = ReadNum(p.at("delta_prime"));
    s.privacy.sigma = ReadNum(p.at("sigma"));
    s.final_main = ReadNum(j.at("final").at("val_main"));
    s.final_merged = ReadNum(j.at("final").at("val_merged"));
  } catch (const ordered_json::exception& e) {
    throw DataError("report " + path + ": " + e.what());
  }
  return s;
}

std::string ComparisonTable(std::vector<RunSummary> runs) {
  auto key = [](const RunSummary& r) {
    const bool main_only = r.residual_mode == "none";
    return std::make_tuple(main_only ? 0 : 1,
                           main_only ? 0.0 : r.privacy.epsilon, r.path);
  };
  std::sort(runs.begin(), runs.end(),
            [&](const RunSummary& a, const RunSummary& b) {
              return key(a) < key(b);
            });
  std::vector<std::vector<std::string>> rows = {
      {"run", "mode", "epsilon", "sigma", "acc_main", "acc_merged"}};
  for (const RunSummary& r : runs) {
    const bool main_only = r.residual_mode == "none";
    rows.push_back({r.path, main_only ? "main-only" : r.residual_mode,
                    main_only ? "-" : Fixed(r.privacy.epsilon, 3),
                    main_only ? "-" : Fixed(r.privacy.sigma, 4),
                    Fixed(r.final_main, 4),
                    main_only ? Fixed(r.final_main, 4)
                              : Fixed(r.final_merged, 4)});
  }
  std::vector<std::size_t> width(rows[0].size(), 0);
  for (const auto& row : rows) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      width[k] = std::max(width[k], row[k].size());
    }
  }
  std::string out;
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t k = 0; k < row.size(); ++k) {
      std::string cell = row[k];
      if (k + 1 < row.size()) cell.resize(width[k] + 2, ' ');
      line += cell;
    }
    out += line + "\n";
  }
  return out;
}

}  // namespace delta
