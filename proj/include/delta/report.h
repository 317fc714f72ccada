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

#ifndef DELTA_REPORT_H_
#define DELTA_REPORT_H_

#include <string>
#include <vector>

#include "delta/model.h"
#include "delta/training.h"

namespace delta {

// report.json for one training run. Non-finite numbers are written as the
// strings "inf" / "-inf"; a missing merged accuracy as null.
std::string TrainReportJson(const TrainReport& report, const ModelSpec& spec);

// The fields of report.json that later commands read back.
struct RunSummary {
  std::string path;
  std::string residual_mode;
  Shape input;
  std::size_t num_classes = 0;
  PrivacyParams privacy;
  double final_main = 0.0;
  double final_merged = 0.0;
};

// Throws DataError on malformed JSON or missing fields.
RunSummary ParseTrainReport(const std::string& json, const std::string& path);

// Plain-text comparison table: main-only runs first, then residual runs by
// ascending epsilon (infinity last), ties by path.
std::string ComparisonTable(std::vector<RunSummary> runs);

}  // namespace delta

#endif  // DELTA_REPORT_H_
