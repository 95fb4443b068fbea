#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>

#include "vidcascade/frames.hpp"

namespace vidcascade {

enum class OracleKind { ground_truth_file, stub_delay };

struct OracleSpec {
  OracleKind kind = OracleKind::ground_truth_file;
  std::filesystem::path label_path;
  double simulated_latency = 0.0;  // seconds per call, stub kind only
  double t_full = 1.0;             // seconds per frame charged by the cost model

  void validate() const;
};

std::string to_string(OracleKind kind);
OracleKind oracle_kind_from_string(const std::string& s);

/// The expensive reference labeler. Backed by a label track; the stub kind
/// sleeps per call so that cascade speedups show up in wall-clock time.
/// Safe to query from several threads.
class Oracle {
 public:
  Oracle(LabelTrack labels, double simulated_latency = 0.0);
  static Oracle from_spec(const OracleSpec& spec);

  std::uint8_t query(std::uint64_t index) const;
  std::uint64_t invocations() const { return invocations_->load(); }
  void reset_invocations() const { invocations_->store(0); }
  std::size_t size() const { return labels_.size(); }
  double simulated_latency() const { return latency_; }

 private:
  LabelTrack labels_;
  double latency_;
  std::shared_ptr<std::atomic<std::uint64_t>> invocations_;
};

struct LabelingResult {
  LabelTrack labels;  // one entry per requested index, in request order
  std::uint64_t invocation_count = 0;
  double wall_time = 0.0;
};

LabelingResult label_video(const Oracle& oracle, const Video& video);
LabelingResult label_frames(const Oracle& oracle, std::span<const std::uint64_t> indices);

/// Per-pixel rounded mean over the negative frames in `range`.
/// Throws ErrorKind::data when the range holds no negatives.
Frame build_reference_image(const Video& video, const LabelTrack& labels, FrameRange range);
Frame build_reference_image(const Video& video, const LabelTrack& labels);

struct SplitFractions {
  double train = 0.5;
  double crossval = 0.1;
  double eval = 0.4;
};

/// Contiguous split: train, then crossval, then eval. Any remainder after
/// the eval range is left unassigned (held out).
struct DataSplit {
  FrameRange train;
  FrameRange crossval;
  FrameRange eval;
};

DataSplit split_train_eval(std::uint64_t frame_count, SplitFractions fractions, std::uint64_t seed = 0);

}  // namespace vidcascade
