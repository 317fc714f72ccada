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

#ifndef DELTA_PROTOCOL_H_
#define DELTA_PROTOCOL_H_

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "delta/dataset.h"
#include "delta/model.h"
#include "delta/privacy.h"
#include "delta/training.h"

namespace delta {

// ----------------------------------------------------------------- Frames

enum class FrameKind : std::uint8_t {
  kResidualBits = 1,
  kLogits = 2,
  kGradient = 3,
  kControl = 4,
  // Unquantized residual floats. Decodable so that the audit can name it, but
  // outside every phase whitelist: sending one aborts the run.
  kResidualFloat = 5,
};

std::string FrameKindName(FrameKind kind);

inline constexpr std::uint8_t kFrameVersion = 1;
// "DLTR", version, kind, id, c, h, w.
inline constexpr std::size_t kFrameHeaderBytes = 4 + 1 + 1 + 4 * 4;

// Logits and gradients of a batch of b samples over L classes travel as
// c = b, h = L, w = 1. A residual travels with its tensor dims. Control
// frames have zero dims and no payload.
struct Frame {
  FrameKind kind = FrameKind::kControl;
  std::uint32_t id = 0;
  std::uint32_t c = 0;
  std::uint32_t h = 0;
  std::uint32_t w = 0;
  std::vector<std::uint8_t> bits;  // kResidualBits: ceil(c*h*w / 8) bytes
  std::vector<double> values;      // float kinds: c*h*w values

  std::size_t elements() const {
    return static_cast<std::size_t>(c) * h * w;
  }
  std::size_t PayloadBytes() const;

  static Frame Residual(std::uint32_t id, const BitTensor& bits);
  static Frame Rows(FrameKind kind, std::uint32_t id,
                    const std::vector<std::vector<double>>& rows);
  BitTensor ToBits() const;
  std::vector<std::vector<double>> ToRows() const;
};

// Throws std::invalid_argument when the payload does not match the dims or a
// float is non-finite.
std::vector<std::uint8_t> EncodeFrame(const Frame& frame);
// Throws FrameDecodeError with the offending byte offset.
Frame DecodeFrame(std::span<const std::uint8_t> bytes);

// ------------------------------------------------------------- Transcript

enum class Direction : std::uint8_t { kPrivateToPublic, kPublicToPrivate };
enum class Phase : std::uint8_t { kStage1, kCacheBuild, kStage2, kInference };

std::string DirectionName(Direction d);
std::string PhaseName(Phase p);

struct TranscriptEntry {
  Direction direction;
  FrameKind kind;
  std::size_t bytes;     // encoded frame size, header included
  Phase phase;
  std::size_t elements;  // c*h*w from the header
};

class Transcript {
 public:
  void Append(const TranscriptEntry& entry) { entries_.push_back(entry); }
  const std::vector<TranscriptEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t PhaseBytes(Phase phase) const;
  std::size_t PhaseFrames(Phase phase) const;
  // Header line then `index,direction,kind,bytes,phase` rows.
  std::string ToCsv() const;

 private:
  std::vector<TranscriptEntry> entries_;
};

// Whether `kind` may travel in `direction` during `phase`.
bool Whitelisted(Phase phase, Direction direction, FrameKind kind);

struct AuditReport {
  bool passed = true;
  std::optional<std::size_t> violation_index;
  std::string violation;
  std::map<std::string, std::size_t> phase_bytes;   // every phase listed
  std::map<std::string, std::size_t> phase_frames;
  std::size_t header_bytes = 0;
  std::size_t residual_payload_bytes = 0;
  // Bytes the same residuals would take as 32-bit floats.
  std::size_t residual_float32_bytes = 0;
  // residual_float32_bytes / residual_payload_bytes; 0 without residuals.
  double compression_ratio = 0.0;
  // Gradient frames carry softmax(z_res) - y, from which the public side can
  // recover each label. Counted here so the flow is visible.
  std::size_t label_bearing_frames = 0;
};

AuditReport Audit(const Transcript& transcript);

// ---------------------------------------------------------------- Channel

// In-memory FIFO byte channel shared by the two endpoints. Every send is
// checked against the whitelist of the current phase before anything is
// queued, then logged.
class Channel {
 public:
  void SetPhase(Phase phase) { phase_ = phase; }
  Phase phase() const { return phase_; }

  // Throws ProtocolViolation, leaving queue and transcript untouched, when
  // the frame is outside the whitelist.
  void Send(Direction direction, const Frame& frame);
  bool Pending(Direction direction) const;
  // Throws ProtocolViolation when the queue is empty.
  Frame Receive(Direction direction);

  const Transcript& transcript() const { return transcript_; }

 private:
  Phase phase_ = Phase::kStage1;
  std::deque<std::vector<std::uint8_t>> to_public_;
  std::deque<std::vector<std::uint8_t>> to_private_;
  Transcript transcript_;
};

// -------------------------------------------------------------- Endpoints

// Public environment: owns M_res and, after cache-build, the cached bits.
// Knows the public hyperparameters and nothing about images or labels.
class PublicEndpoint {
 public:
  PublicEndpoint(Network res, const TrainConfig& cfg, PrivacyParams privacy,
                 Channel& channel);

  // One scheduling step: consume one inbound frame, or in stage 2, when no
  // gradient is outstanding, forward the next batch and send its logits.
  void Serve();

  const ResidualCache& cache() const { return cache_; }
  Network& res() { return res_; }
  Network TakeModel() { return std::move(res_); }

 private:
  void StartStage2();

  Network res_;
  TrainConfig cfg_;
  PrivacyParams privacy_;
  Channel* channel_;
  std::map<std::uint64_t, BitTensor> received_;
  std::vector<std::size_t> arrival_;  // sample ids in cache-build order
  ResidualCache cache_;
  std::unique_ptr<ResidualTrainer> trainer_;
  std::vector<std::vector<std::size_t>> schedule_;
  std::uint32_t next_batch_ = 0;
  bool awaiting_gradient_ = false;
};

struct SplitPrediction {
  std::size_t prediction = 0;
  std::vector<double> z_main;
  std::vector<double> z_res;
  BitTensor bits;
};

// Private environment: owns the data, M_bb and M_main. Acts as the residual
// peer of Stage2 by exchanging frames with the public side; `pump` runs one
// public scheduling step.
class PrivateEndpoint : public ResidualPeer {
 public:
  PrivateEndpoint(const ModelSpec& spec, Network bb, Network main,
                  const TrainConfig& cfg, Channel& channel,
                  std::function<void()> pump);

  void Stage1(const Dataset& data, TrainReport& report);
  // Sends one residual-bits frame per training sample, in data.train order.
  void CacheBuild(const Dataset& data);
  void Stage2(const Dataset& data, TrainReport& report);
  // Main-only stage 2: no frames.
  void Stage2MainOnly(const Dataset& data, TrainReport& report);
  SplitPrediction Predict(const Tensor3& x, const ResidualRelease& release);

  std::vector<std::vector<double>> Forward(std::span<const std::size_t> ids,
                                           std::uint32_t batch_index) override;
  void Backward(const std::vector<std::vector<double>>& g_res,
                std::uint32_t batch_index) override;
  std::vector<double> Infer(const Tensor3& residual,
                            const ResidualRelease& release) override;

  Models& models() { return models_; }

 private:
  Frame Await(FrameKind kind, std::uint32_t id);
  std::vector<double> Exchange(const BitTensor& bits);

  ModelSpec spec_;
  Models models_;  // res stays empty
  TrainConfig cfg_;
  Channel* channel_;
  std::function<void()> pump_;
  std::uint32_t inference_id_ = 0;
};

// Both endpoints wired to one channel with a deterministic scheduler. The
// phases of the two-stage procedure can be driven one at a time, so a run
// can be forked after stage 1 by copying the models.
class SplitSession {
 public:
  // `privacy` is the release the public side records with its cache.
  SplitSession(const ModelSpec& spec, Models models, const TrainConfig& cfg,
               const PrivacyParams& privacy);
  SplitSession(const SplitSession&) = delete;
  SplitSession& operator=(const SplitSession&) = delete;

  void Stage1(const Dataset& data, TrainReport& report);
  void CacheBuild(const Dataset& data);
  void Stage2(const Dataset& data, TrainReport& report);
  void Stage2MainOnly(const Dataset& data, TrainReport& report);
  SplitPrediction Predict(const Tensor3& x, const ResidualRelease& release);

  const Transcript& transcript() const { return channel_.transcript(); }
  const ResidualCache& cache() const { return public_->cache(); }
  Models& private_models() { return private_->models(); }
  Network& residual_model() { return public_->res(); }
  // Reassembles the three models; the session is unusable afterwards.
  Models TakeModels();

 private:
  Channel channel_;
  std::unique_ptr<PublicEndpoint> public_;
  std::unique_ptr<PrivateEndpoint> private_;
};

enum class ResidualMode { kBits, kNone };

// The whole two-stage procedure over the protocol. kNone skips cache-build
// and trains M_main alone in stage 2. Fills report (including per-phase
// bytes and the compression ratio) and returns the trained models; the
// transcript is copied to `transcript` when given.
Models RunSplitTraining(const ModelSpec& spec, Models models,
                        const Dataset& data, const TrainConfig& cfg,
                        ResidualMode mode, TrainReport& report,
                        Transcript* transcript = nullptr);

// One split inference on fresh endpoints: one residual-bits frame out, one
// logits frame back. The prediction stays on the private side.
SplitPrediction RunSplitInference(const ModelSpec& spec, const Models& models,
                                  const Tensor3& x,
                                  const ResidualRelease& release,
                                  Transcript* transcript = nullptr);

}  // namespace delta

#endif  // DELTA_PROTOCOL_H_
