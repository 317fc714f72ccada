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

// Command-line front end: spectrum, account, train, infer, report, sample.
// Exit codes: 0 success, 1 usage, 2 data, 3 protocol violation, 4 divergence.

#include <malloc.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "delta/byte_io.h"
#include "delta/config.h"
#include "delta/decompose.h"
#include "delta/errors.h"
#include "delta/model.h"
#include "delta/privacy.h"
#include "delta/protocol.h"
#include "delta/report.h"
#include "delta/tensor_io.h"
#include "delta/training.h"

namespace delta {
namespace {

namespace fs = std::filesystem;

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kProtocol = 3, kDivergence = 4 };

std::string ReadText(const std::string& path) {
  const std::vector<std::uint8_t> bytes = ReadFileBytes(path);
  return std::string(bytes.begin(), bytes.end());
}

void WriteText(const std::string& path, const std::string& text) {
  WriteFileBytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

// Config file plus one flag per config key; flags win over the file.
class ConfigOptions {
 public:
  explicit ConfigOptions(CLI::App* app) {
    app->add_option("-c,--config", path_, "key = value config file");
    for (const ConfigKey& key : RunConfig::Keys()) {
      options_[key.name] =
          app->add_option("--" + key.name, values_[key.name], key.help);
    }
  }

  RunConfig Build() const {
    RunConfig cfg;
    if (!path_.empty()) {
      if (!fs::exists(path_)) {
        throw ConfigError("config: file does not exist: " + path_);
      }
      cfg.Apply(ReadText(path_));
    }
    for (const auto& [name, option] : options_) {
      if (option->count() > 0) cfg.Set(name, values_.at(name));
    }
    cfg.Validate();
    return cfg;
  }

 private:
  std::string path_;
  std::map<std::string, std::string> values_;
  std::map<std::string, CLI::Option*> options_;
};

std::vector<std::size_t> Range(std::size_t lo, std::size_t hi) {
  std::vector<std::size_t> v(hi - lo + 1);
  std::iota(v.begin(), v.end(), lo);
  return v;
}

void LoadCheckpoint(const std::string& path, Network& net,
                    std::uint64_t hash) {
  DecodeCheckpoint(ReadFileBytes(path), net, hash);
}

int Spectrum(const RunConfig& cfg, std::size_t samples,
             const std::string& source, std::string output) {
  const Dataset data = cfg.LoadDataset();
  const ModelSpec spec = cfg.Spec(data.shape(), data.num_classes);
  std::vector<Tensor3> xs;
  Network bb;
  if (source == "ir") {
    bb = BuildModels(spec, cfg.train.seed).bb;
    LoadCheckpoint((fs::path(cfg.out) / "ckpt" / "bb.dltp").string(), bb,
                   spec.Hash("bb"));
  } else if (source != "image") {
    throw ConfigError("spectrum: --source must be image or ir");
  }
  for (std::size_t k = 0; k < std::min(samples, data.train.size()); ++k) {
    const Tensor3& x = data.images[data.train[k]];
    xs.push_back(source == "ir" ? bb.Infer(x) : x);
  }
  const std::size_t channels = xs.front().channels();
  const std::size_t t = cfg.decomposition.t;
  const std::vector<SpectrumRow> rows =
      MeanSpectrum(xs, Range(1, channels), t, Range(1, t));
  if (output.empty()) {
    fs::create_directories(cfg.out);
    output = (fs::path(cfg.out) / "spectrum.csv").string();
  }
  WriteText(output, SpectrumCsv(rows));
  std::cout << "wrote " << output << " (" << xs.size() << " samples, source "
            << source << ")\n";
  return kOk;
}

int Train(const RunConfig& cfg) {
  const Dataset data = cfg.LoadDataset();
  const ModelSpec spec = cfg.Spec(data.shape(), data.num_classes);
  TrainReport report;
  Transcript transcript;
  const ResidualMode mode =
      cfg.mode == "none" ? ResidualMode::kNone : ResidualMode::kBits;
  Models models =
      RunSplitTraining(spec, BuildModels(spec, cfg.train.seed), data,
                       cfg.train, mode, report, &transcript);

  const fs::path out(cfg.out);
  fs::create_directories(out / "ckpt");
  WriteText((out / "config.txt").string(), cfg.ToText());
  WriteText((out / "report.json").string(), TrainReportJson(report, spec));
  WriteText((out / "transcript.csv").string(), transcript.ToCsv());
  WriteFileBytes((out / "ckpt" / "bb.dltp").string(),
                 EncodeCheckpoint(models.bb, spec.Hash("bb")));
  WriteFileBytes((out / "ckpt" / "main.dltp").string(),
                 EncodeCheckpoint(models.main, spec.Hash("main")));
  WriteFileBytes((out / "ckpt" / "res.dltp").string(),
                 EncodeCheckpoint(models.res, spec.Hash("res")));

  const AuditReport audit = Audit(transcript);
  std::cout << "mode " << report.residual_mode << ", sigma "
            << report.privacy.sigma << "\n"
            << "final val_main " << report.FinalMain() << ", val_merged "
            << report.FinalMerged() << "\n";
  for (const auto& [phase, bytes] : audit.phase_bytes) {
    std::cout << "bytes " << phase << " " << bytes << "\n";
  }
  std::cout << "residual compression " << audit.compression_ratio
            << "x, label-bearing gradient frames "
            << audit.label_bearing_frames << "\n"
            << "wrote " << out.string() << "\n";
  return kOk;
}

int Infer(const std::string& run, const std::string& input, std::size_t id,
          const std::string& transcript_path) {
  const fs::path dir(run);
  const RunConfig cfg = LoadRunConfig((dir / "config.txt").string());
  const RunSummary summary = ParseTrainReport(
      ReadText((dir / "report.json").string()), run);
  const ModelSpec spec = cfg.Spec(summary.input, summary.num_classes);
  Models models = BuildModels(spec, cfg.train.seed);
  LoadCheckpoint((dir / "ckpt" / "bb.dltp").string(), models.bb,
                 spec.Hash("bb"));
  LoadCheckpoint((dir / "ckpt" / "main.dltp").string(), models.main,
                 spec.Hash("main"));
  LoadCheckpoint((dir / "ckpt" / "res.dltp").string(), models.res,
                 spec.Hash("res"));
  const Tensor3 x = ReadTensorFile(input);
  if (ShapeOf(x) != spec.input) {
    throw DataError("infer: input has shape " + x.ShapeString() +
                    ", the model expects " + spec.input.ToString());
  }
  const ResidualRelease release{summary.privacy, cfg.train.seed,
                                kInferenceNoiseDomain + id,
                                cfg.train.perturb_inference};
  Transcript transcript;
  const SplitPrediction p =
      RunSplitInference(spec, models, x, release, &transcript);
  if (!transcript_path.empty()) WriteText(transcript_path, transcript.ToCsv());
  std::cout << p.prediction << "\n";
  return kOk;
}

int Report(const std::vector<std::string>& paths) {
  std::vector<RunSummary> runs;
  for (const std::string& p : paths) {
    const fs::path file =
        fs::is_directory(p) ? fs::path(p) / "report.json" : fs::path(p);
    runs.push_back(ParseTrainReport(ReadText(file.string()), p));
  }
  std::cout << ComparisonTable(runs);
  return kOk;
}

int Sample(const RunConfig& cfg, std::size_t index, const std::string& out) {
  const Dataset data = cfg.LoadDataset();
  if (index >= data.size()) {
    throw ConfigError("sample: index " + std::to_string(index) +
                      " outside the dataset of " +
                      std::to_string(data.size()));
  }
  WriteTensorFile(out, data.images[index]);
  std::cout << "label " << data.labels[index] << "\n";
  return kOk;
}

int Run(int argc, char** argv) {
  CLI::App app{"Split learning with low-rank/low-frequency decomposition and "
               "DP-quantized residuals"};
  app.require_subcommand(1);

  CLI::App* spectrum = app.add_subcommand(
      "spectrum", "relative error of rank-r and low-frequency approximations");
  ConfigOptions spectrum_cfg(spectrum);
  std::size_t spectrum_samples = 64;
  std::string spectrum_source = "image";
  std::string spectrum_output;
  spectrum->add_option("--samples", spectrum_samples,
                       "training samples averaged");
  spectrum->add_option("--source", spectrum_source,
                       "image, or ir (backbone output of the run in --out)");
  spectrum->add_option("--output", spectrum_output,
                       "CSV path (default <out>/spectrum.csv)");

  CLI::App* account =
      app.add_subcommand("account", "noise calibration for (epsilon, delta)");
  double eps = 1.0, delta = 1e-6, p = 1.0, clip = 1.0;
  account->add_option("--epsilon", eps, "target epsilon")->required();
  account->add_option("--delta", delta, "target delta");
  account->add_option("--p", p, "sampling probability");
  account->add_option("--C,--clip", clip, "sensitivity bound");

  CLI::App* train = app.add_subcommand("train", "two-stage split training");
  ConfigOptions train_cfg(train);

  CLI::App* infer = app.add_subcommand("infer", "split inference on a tensor");
  std::string infer_run, infer_input, infer_transcript;
  std::size_t infer_id = 0;
  infer->add_option("--run", infer_run, "run directory")->required();
  infer->add_option("--input", infer_input, "tensor file")->required();
  infer->add_option("--id", infer_id, "noise stream index");
  infer->add_option("--transcript", infer_transcript, "write transcript CSV");

  CLI::App* report =
      app.add_subcommand("report", "compare report.json files of runs");
  std::vector<std::string> report_paths;
  report->add_option("runs", report_paths, "run directories or report files")
      ->required();

  CLI::App* sample =
      app.add_subcommand("sample", "write one dataset image as a tensor file");
  ConfigOptions sample_cfg(sample);
  std::size_t sample_index = 0;
  std::string sample_output;
  sample->add_option("--index", sample_index, "sample index");
  sample->add_option("--output", sample_output, "tensor file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  if (*spectrum) {
    return Spectrum(spectrum_cfg.Build(), spectrum_samples, spectrum_source,
                    spectrum_output);
  }
  if (*account) {
    std::cout << AccountantJson(Calibrate(eps, delta, p, clip));
    return kOk;
  }
  if (*train) return Train(train_cfg.Build());
  if (*infer) return Infer(infer_run, infer_input, infer_id, infer_transcript);
  if (*report) return Report(report_paths);
  return Sample(sample_cfg.Build(), sample_index, sample_output);
}

}  // namespace
}  // namespace delta

int main(int argc, char** argv) {
  // Keep large training buffers on the heap instead of fresh mappings.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  try {
    return delta::Run(argc, argv);
  } catch (const delta::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return delta::kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return delta::kUsage;
  } catch (const delta::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return delta::kData;
  } catch (const delta::ProtocolViolation& e) {
    std::cerr << "protocol violation: " << e.what() << "\n";
    return delta::kProtocol;
  } catch (const delta::DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return delta::kDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return delta::kData;
  }
}
