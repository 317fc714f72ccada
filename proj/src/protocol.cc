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

#include "delta/protocol.h"

#include <bit>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "delta/errors.h"

namespace delta {
namespace {

constexpr char kMagic[4] = {'D', 'L', 'T', 'R'};
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;

bool IsFloatKind(FrameKind kind) {
  return kind == FrameKind::kLogits || kind == FrameKind::kGradient ||
         kind == FrameKind::kResidualFloat;
}

bool KnownKind(std::uint8_t k) { return k >= 1 && k <= 5; }

std::size_t BitBytes(std::uint64_t n) {
  return static_cast<std::size_t>((n + 7) / 8);
}

void PutU32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t GetU32(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{b[at + i]} << (8 * i);
  return v;
}

std::uint32_t CheckedU32(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint32_t>::max()) {
    throw std::invalid_argument(std::string("frame: ") + what +
                                " does not fit in u32");
  }
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::string FrameKindName(FrameKind kind) {
  switch (kind) {
    case FrameKind::kResidualBits: return "residual-bits";
    case FrameKind::kLogits: return "logits";
    case FrameKind::kGradient: return "gradient";
    case FrameKind::kControl: return "control";
    case FrameKind::kResidualFloat: return "residual-float";
  }
  return "unknown";
}

// ----------------------------------------------------------------- Frames

std::size_t Frame::PayloadBytes() const {
  return kind == FrameKind::kResidualBits ? bits.size()
                                          : values.size() * sizeof(double);
}

Frame Frame::Residual(std::uint32_t id, const BitTensor& bits) {
  Frame f;
  f.kind = FrameKind::kResidualBits;
  f.id = id;
  f.c = CheckedU32(bits.channels(), "channels");
  f.h = CheckedU32(bits.height(), "height");
  f.w = CheckedU32(bits.width(), "width");
  f.bits = bits.packed();
  return f;
}

Frame Frame::Rows(FrameKind kind, std::uint32_t id,
                  const std::vector<std::vector<double>>& rows) {
  if (!IsFloatKind(kind)) {
    throw std::invalid_argument("frame: rows need a float kind");
  }
  if (rows.empty()) throw std::invalid_argument("frame: no rows");
  Frame f;
  f.kind = kind;
  f.id = id;
  f.c = CheckedU32(rows.size(), "row count");
  f.h = CheckedU32(rows[0].size(), "row length");
  f.w = 1;
  for (const auto& row : rows) {
    if (row.size() != rows[0].size()) {
      throw std::invalid_argument("frame: ragged rows");
    }
    f.values.insert(f.values.end(), row.begin(), row.end());
  }
  return f;
}

BitTensor Frame::ToBits() const {
  if (kind != FrameKind::kResidualBits) {
    throw ProtocolViolation("expected a residual-bits frame, got " +
                            FrameKindName(kind));
  }
  return BitTensor(c, h, w, bits);
}

std::vector<std::vector<double>> Frame::ToRows() const {
  if (!IsFloatKind(kind)) {
    throw ProtocolViolation("expected a float frame, got " +
                            FrameKindName(kind));
  }
  const std::size_t len = static_cast<std::size_t>(h) * w;
  std::vector<std::vector<double>> rows(c);
  for (std::size_t i = 0; i < c; ++i) {
    rows[i].assign(values.begin() + i * len, values.begin() + (i + 1) * len);
  }
  return rows;
}

std::vector<std::uint8_t> EncodeFrame(const Frame& f) {
  if (!KnownKind(static_cast<std::uint8_t>(f.kind))) {
    throw std::invalid_argument("frame: unknown kind");
  }
  const std::uint64_t n = std::uint64_t{f.c} * f.h * f.w;
  if (f.kind == FrameKind::kControl) {
    if (n != 0 || !f.bits.empty() || !f.values.empty()) {
      throw std::invalid_argument("frame: control frames carry no payload");
    }
  } else if (f.kind == FrameKind::kResidualBits) {
    if (!f.values.empty() || f.bits.size() != BitBytes(n)) {
      throw std::invalid_argument("frame: bit payload does not match dims");
    }
    if (n % 8 != 0 && (f.bits.back() & (0xFFu >> (n % 8))) != 0) {
      throw std::invalid_argument("frame: nonzero padding bits");
    }
  } else {
    if (!f.bits.empty() || f.values.size() != n) {
      throw std::invalid_argument("frame: float payload does not match dims");
    }
    for (double v : f.values) {
      if (!std::isfinite(v)) {
        throw std::invalid_argument("frame: non-finite payload value");
      }
    }
  }
  std::vector<std::uint8_t> out;
  out.reserve(kFrameHeaderBytes + f.PayloadBytes());
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(kFrameVersion);
  out.push_back(static_cast<std::uint8_t>(f.kind));
  PutU32(out, f.id);
  PutU32(out, f.c);
  PutU32(out, f.h);
  PutU32(out, f.w);
  if (f.kind == FrameKind::kResidualBits) {
    out.insert(out.end(), f.bits.begin(), f.bits.end());
  } else {
    for (double v : f.values) {
      const auto u = std::bit_cast<std::uint64_t>(v);
      for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
      }
    }
  }
  return out;
}

Frame DecodeFrame(std::span<const std::uint8_t> b) {
  if (b.size() < kFrameHeaderBytes) {
    throw FrameDecodeError("truncated header", b.size());
  }
  for (std::size_t i = 0; i < 4; ++i) {
    if (b[i] != static_cast<std::uint8_t>(kMagic[i])) {
      throw FrameDecodeError("bad magic", i);
    }
  }
  if (b[4] != kFrameVersion) {
    throw FrameDecodeError("unsupported version " + std::to_string(b[4]), 4);
  }
  if (!KnownKind(b[5])) {
    throw FrameDecodeError("unknown kind " + std::to_string(b[5]), 5);
  }
  Frame f;
  f.kind = static_cast<FrameKind>(b[5]);
  f.id = GetU32(b, 6);
  f.c = GetU32(b, 10);
  f.h = GetU32(b, 14);
  f.w = GetU32(b, 18);
  const std::uint64_t ch = std::uint64_t{f.c} * f.h;
  if ((f.w != 0 && ch > kMaxElements / f.w) || ch * f.w > kMaxElements) {
    throw FrameDecodeError("dims too large", 10);
  }
  const std::uint64_t n = ch * f.w;
  if (f.kind == FrameKind::kControl && n != 0) {
    throw FrameDecodeError("control frame with nonzero dims", 10);
  }
  const std::size_t payload = f.kind == FrameKind::kResidualBits
                                  ? BitBytes(n)
                                  : static_cast<std::size_t>(n) * 8;
  const std::size_t end = kFrameHeaderBytes + payload;
  if (b.size() < end) throw FrameDecodeError("truncated payload", b.size());
  if (b.size() > end) throw FrameDecodeError("trailing bytes", end);

  if (f.kind == FrameKind::kResidualBits) {
    f.bits.assign(b.begin() + kFrameHeaderBytes, b.end());
    if (n % 8 != 0 && (f.bits.back() & (0xFFu >> (n % 8))) != 0) {
      throw FrameDecodeError("nonzero padding bits", end - 1);
    }
  } else {
    f.values.resize(static_cast<std::size_t>(n));
    for (std::size_t k = 0; k < f.values.size(); ++k) {
      const std::size_t at = kFrameHeaderBytes + 8 * k;
      std::uint64_t u = 0;
      for (int i = 0; i < 8; ++i) u |= std::uint64_t{b[at + i]} << (8 * i);
      f.values[k] = std::bit_cast<double>(u);
      if (!std::isfinite(f.values[k])) {
        throw FrameDecodeError("non-finite value", at);
      }
    }
  }
  return f;
}

// ------------------------------------------------------------- Transcript

std::string DirectionName(Direction d) {
  return d == Direction::kPrivateToPublic ? "private->public"
                                          : "public->private";
}

std::string PhaseName(Phase p) {
  switch (p) {
    case Phase::kStage1: return "stage1";
    case Phase::kCacheBuild: return "cache-build";
    case Phase::kStage2: return "stage2";
    case Phase::kInference: return "inference";
  }
  return "unknown";
}

std::size_t Transcript::PhaseBytes(Phase phase) const {
  std::size_t total = 0;
  for (const auto& e : entries_) {
    if (e.phase == phase) total += e.bytes;
  }
  return total;
}

std::size_t Transcript::PhaseFrames(Phase phase) const {
  std::size_t total = 0;
  for (const auto& e : entries_) {
    if (e.phase == phase) ++total;
  }
  return total;
}

std::string Transcript::ToCsv() const {
  std::ostringstream out;
  out << "index,direction,kind,bytes,phase\n";
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    out << i << ',' << DirectionName(e.direction) << ','
        << FrameKindName(e.kind) << ',' << e.bytes << ','
        << PhaseName(e.phase) << '\n';
  }
  return out.str();
}

bool Whitelisted(Phase phase, Direction direction, FrameKind kind) {
  const bool out = direction == Direction::kPrivateToPublic;
  switch (phase) {
    case Phase::kStage1:
      return false;
    case Phase::kCacheBuild:
      return out && kind == FrameKind::kResidualBits;
    case Phase::kStage2:
      return (!out && kind == FrameKind::kLogits) ||
             (out && kind == FrameKind::kGradient);
    case Phase::kInference:
      return (out && kind == FrameKind::kResidualBits) ||
             (!out && kind == FrameKind::kLogits);
  }
  return false;
}

AuditReport Audit(const Transcript& transcript) {
  AuditReport r;
  for (Phase p : {Phase::kStage1, Phase::kCacheBuild, Phase::kStage2,
                  Phase::kInference}) {
    r.phase_bytes[PhaseName(p)] = 0;
    r.phase_frames[PhaseName(p)] = 0;
  }
  const auto& entries = transcript.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const TranscriptEntry& e = entries[i];
    r.phase_bytes[PhaseName(e.phase)] += e.bytes;
    ++r.phase_frames[PhaseName(e.phase)];
    r.header_bytes += kFrameHeaderBytes;
    if (e.kind == FrameKind::kResidualBits) {
      r.residual_payload_bytes += e.bytes - kFrameHeaderBytes;
      r.residual_float32_bytes += e.elements * 4;
    }
    if (e.kind == FrameKind::kGradient) ++r.label_bearing_frames;
    if (r.passed && !Whitelisted(e.phase, e.direction, e.kind)) {
      r.passed = false;
      r.violation_index = i;
      r.violation = "frame " + std::to_string(i) + ": " +
                    FrameKindName(e.kind) + " " + DirectionName(e.direction) +
                    " not allowed in phase " + PhaseName(e.phase);
    }
  }
  if (r.residual_payload_bytes > 0) {
    r.compression_ratio = static_cast<double>(r.residual_float32_bytes) /
                          static_cast<double>(r.residual_payload_bytes);
  }
  return r;
}

// ---------------------------------------------------------------- Channel

void Channel::Send(Direction direction, const Frame& frame) {
  if (!Whitelisted(phase_, direction, frame.kind)) {
    throw ProtocolViolation(FrameKindName(frame.kind) + " " +
                            DirectionName(direction) +
                            " not allowed in phase " + PhaseName(phase_));
  }
  std::vector<std::uint8_t> bytes = EncodeFrame(frame);
  transcript_.Append(
      {direction, frame.kind, bytes.size(), phase_, frame.elements()});
  (direction == Direction::kPrivateToPublic ? to_public_ : to_private_)
      .push_back(std::move(bytes));
}

bool Channel::Pending(Direction direction) const {
  return !(direction == Direction::kPrivateToPublic ? to_public_ : to_private_)
              .empty();
}

Frame Channel::Receive(Direction direction) {
  auto& queue =
      direction == Direction::kPrivateToPublic ? to_public_ : to_private_;
  if (queue.empty()) {
    throw ProtocolViolation("no frame pending " + DirectionName(direction));
  }
  std::vector<std::uint8_t> bytes = std::move(queue.front());
  queue.pop_front();
  return DecodeFrame(bytes);
}

// ---------------------------------------------------------- Public side

PublicEndpoint::PublicEndpoint(Network res, const TrainConfig& cfg,
                               PrivacyParams privacy, Channel& channel)
    : res_(std::move(res)),
      cfg_(cfg),
      privacy_(privacy),
      channel_(&channel) {}

void PublicEndpoint::StartStage2() {
  cache_ = ResidualCache(std::move(received_), privacy_, cfg_.seed);
  received_.clear();
  for (std::size_t e = 0; e < cfg_.ep2; ++e) {
    for (auto& batch :
         EpochBatches(arrival_, cfg_.batch_size, cfg_.seed, cfg_.ep1 + e)) {
      schedule_.push_back(std::move(batch));
    }
  }
  trainer_ = std::make_unique<ResidualTrainer>(res_, cfg_, schedule_.size());
}

void PublicEndpoint::Serve() {
  constexpr Direction kIn = Direction::kPrivateToPublic;
  constexpr Direction kOut = Direction::kPublicToPrivate;
  switch (channel_->phase()) {
    case Phase::kStage1:
      return;
    case Phase::kCacheBuild: {
      if (!channel_->Pending(kIn)) return;
      const Frame f = channel_->Receive(kIn);
      if (!received_.emplace(f.id, f.ToBits()).second) {
        throw ProtocolViolation("duplicate residual for sample " +
                                std::to_string(f.id));
      }
      arrival_.push_back(f.id);
      return;
    }
    case Phase::kStage2: {
      if (!trainer_) StartStage2();
      if (awaiting_gradient_) {
        if (!channel_->Pending(kIn)) return;
        const Frame f = channel_->Receive(kIn);
        if (f.kind != FrameKind::kGradient || f.id + 1 != next_batch_) {
          throw ProtocolViolation("expected the gradient of batch " +
                                  std::to_string(next_batch_ - 1));
        }
        trainer_->Backward(f.ToRows());
        awaiting_gradient_ = false;
        return;
      }
      if (next_batch_ >= schedule_.size()) {
        throw ProtocolViolation("stage 2 schedule exhausted");
      }
      Batch inputs;
      for (std::size_t id : schedule_[next_batch_]) {
        if (!cache_.Contains(id)) {
          throw ProtocolViolation("cache miss for sample " +
                                  std::to_string(id));
        }
        inputs.push_back(cache_.Get(id).ToFloats());
      }
      channel_->Send(kOut, Frame::Rows(FrameKind::kLogits, next_batch_,
                                       trainer_->Forward(inputs)));
      ++next_batch_;
      awaiting_gradient_ = true;
      return;
    }
    case Phase::kInference: {
      if (!channel_->Pending(kIn)) return;
      const Frame f = channel_->Receive(kIn);
      const std::vector<double> z = res_.Infer(f.ToBits().ToFloats()).values();
      channel_->Send(kOut, Frame::Rows(FrameKind::kLogits, f.id, {z}));
      return;
    }
  }
}

// --------------------------------------------------------- Private side

PrivateEndpoint::PrivateEndpoint(const ModelSpec& spec, Network bb,
                                 Network main, const TrainConfig& cfg,
                                 Channel& channel, std::function<void()> pump)
    : spec_(spec), cfg_(cfg), channel_(&channel), pump_(std::move(pump)) {
  models_.bb = std::move(bb);
  models_.main = std::move(main);
}

void PrivateEndpoint::Stage1(const Dataset& data, TrainReport& report) {
  channel_->SetPhase(Phase::kStage1);
  delta::Stage1(spec_, models_, data, cfg_, report);
}

void PrivateEndpoint::CacheBuild(const Dataset& data) {
  channel_->SetPhase(Phase::kCacheBuild);
  const PrivacyParams privacy =
      cfg_.Privacy(data.train.size(), spec_.decomposition.clip);
  for (std::size_t id : data.train) {
    const Tensor3 residual =
        ExtractFeatures(spec_, models_.bb, data.images[id]).residual;
    const BitTensor bits = ReleaseBits(
        residual, {privacy, cfg_.seed, kTrainNoiseDomain + id, true});
    channel_->Send(Direction::kPrivateToPublic,
                   Frame::Residual(CheckedU32(id, "sample id"), bits));
    pump_();
  }
}

void PrivateEndpoint::Stage2(const Dataset& data, TrainReport& report) {
  channel_->SetPhase(Phase::kStage2);
  delta::Stage2(spec_, models_, data, cfg_, this, report);
}

void PrivateEndpoint::Stage2MainOnly(const Dataset& data,
                                     TrainReport& report) {
  channel_->SetPhase(Phase::kStage2);
  delta::Stage2(spec_, models_, data, cfg_, nullptr, report);
}

Frame PrivateEndpoint::Await(FrameKind kind, std::uint32_t id) {
  constexpr Direction kIn = Direction::kPublicToPrivate;
  // Lockstep: the public side answers within one scheduling step.
  if (!channel_->Pending(kIn)) pump_();
  if (!channel_->Pending(kIn)) {
    throw ProtocolViolation("public endpoint sent no " + FrameKindName(kind) +
                            " frame");
  }
  Frame f = channel_->Receive(kIn);
  if (f.kind != kind || f.id != id) {
    throw ProtocolViolation("expected " + FrameKindName(kind) + " frame " +
                            std::to_string(id) + ", got " +
                            FrameKindName(f.kind) + " frame " +
                            std::to_string(f.id));
  }
  return f;
}

std::vector<std::vector<double>> PrivateEndpoint::Forward(
    std::span<const std::size_t> ids, std::uint32_t batch_index) {
  std::vector<std::vector<double>> rows =
      Await(FrameKind::kLogits, batch_index).ToRows();
  if (rows.size() != ids.size() || rows[0].size() != spec_.num_classes) {
    throw ProtocolViolation("logits frame " + std::to_string(batch_index) +
                            " has the wrong shape");
  }
  return rows;
}

void PrivateEndpoint::Backward(const std::vector<std::vector<double>>& g_res,
                               std::uint32_t batch_index) {
  channel_->Send(Direction::kPrivateToPublic,
                 Frame::Rows(FrameKind::kGradient, batch_index, g_res));
  pump_();
}

std::vector<double> PrivateEndpoint::Exchange(const BitTensor& bits) {
  const Phase previous = channel_->phase();
  channel_->SetPhase(Phase::kInference);
  const std::uint32_t id = inference_id_++;
  channel_->Send(Direction::kPrivateToPublic, Frame::Residual(id, bits));
  std::vector<std::vector<double>> rows =
      Await(FrameKind::kLogits, id).ToRows();
  channel_->SetPhase(previous);
  if (rows.size() != 1 || rows[0].size() != spec_.num_classes) {
    throw ProtocolViolation("inference logits frame has the wrong shape");
  }
  return std::move(rows[0]);
}

std::vector<double> PrivateEndpoint::Infer(const Tensor3& residual,
                                           const ResidualRelease& release) {
  return Exchange(ReleaseBits(residual, release));
}

SplitPrediction PrivateEndpoint::Predict(const Tensor3& x,
                                         const ResidualRelease& release) {
  const PrivateFeatures f = ExtractFeatures(spec_, models_.bb, x);
  SplitPrediction out;
  out.bits = ReleaseBits(f.residual, release);
  out.z_main = models_.main.Infer(f.ir_main).values();
  out.z_res = Exchange(out.bits);
  out.prediction = Argmax(MergeLogits(out.z_main, out.z_res, spec_.alpha));
  return out;
}

// -------------------------------------------------------------- Session

SplitSession::SplitSession(const ModelSpec& spec, Models models,
                           const TrainConfig& cfg,
                           const PrivacyParams& privacy) {
  public_ = std::make_unique<PublicEndpoint>(std::move(models.res), cfg,
                                             privacy, channel_);
  private_ = std::make_unique<PrivateEndpoint>(
      spec, std::move(models.bb), std::move(models.main), cfg, channel_,
      [this] { public_->Serve(); });
}

void SplitSession::Stage1(const Dataset& data, TrainReport& report) {
  private_->Stage1(data, report);
}

void SplitSession::CacheBuild(const Dataset& data) {
  private_->CacheBuild(data);
}

void SplitSession::Stage2(const Dataset& data, TrainReport& report) {
  private_->Stage2(data, report);
}

void SplitSession::Stage2MainOnly(const Dataset& data, TrainReport& report) {
  private_->Stage2MainOnly(data, report);
}

SplitPrediction SplitSession::Predict(const Tensor3& x,
                                      const ResidualRelease& release) {
  return private_->Predict(x, release);
}

Models SplitSession::TakeModels() {
  Models m;
  m.bb = std::move(private_->models().bb);
  m.main = std::move(private_->models().main);
  m.res = public_->TakeModel();
  return m;
}

Models RunSplitTraining(const ModelSpec& spec, Models models,
                        const Dataset& data, const TrainConfig& cfg,
                        ResidualMode mode, TrainReport& report,
                        Transcript* transcript) {
  cfg.Validate();
  report.residual_mode = mode == ResidualMode::kBits ? "bits" : "none";
  report.privacy = cfg.Privacy(data.train.size(), spec.decomposition.clip);
  report.n_train = data.train.size();
  report.n_val = data.val.size();
  report.macs = CountMacs(spec, models);

  SplitSession session(spec, std::move(models), cfg, report.privacy);
  session.Stage1(data, report);
  if (cfg.ep2 > 0) {
    if (mode == ResidualMode::kBits) {
      session.CacheBuild(data);
      session.Stage2(data, report);
    } else {
      session.Stage2MainOnly(data, report);
    }
  }
  const AuditReport audit = Audit(session.transcript());
  if (!audit.passed) throw ProtocolViolation(audit.violation);
  report.phase_bytes = audit.phase_bytes;
  report.compression_ratio = audit.compression_ratio;
  if (transcript) *transcript = session.transcript();
  return session.TakeModels();
}

SplitPrediction RunSplitInference(const ModelSpec& spec, const Models& models,
                                  const Tensor3& x,
                                  const ResidualRelease& release,
                                  Transcript* transcript) {
  SplitSession session(spec, models, TrainConfig{}, release.params);
  SplitPrediction out = session.Predict(x, release);
  if (transcript) *transcript = session.transcript();
  return out;
}

}  // namespace delta
