#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "vidcascade/diff_detect.hpp"
#include "vidcascade/frames.hpp"
#include "vidcascade/oracle.hpp"
#include "vidcascade/specialized.hpp"

namespace vidcascade {

struct ModelStage {
  SpecializedModel model;
  ThresholdPair thresholds;
};

struct Preprocessing {
  ChannelStats stats;
  InputDims input;
};

/// Skipping -> difference detector -> specialized model -> oracle. Detector
/// and model are optional; the oracle always terminates the cascade.
struct CascadeConfig {
  std::optional<DiffDetectorConfig> detector;
  std::optional<ModelStage> model;
  OracleSpec oracle;
  Preprocessing preprocessing;

  void validate() const;
};

struct RunStats {
  std::uint64_t frames_total = 0;
  std::uint64_t frames_skipped = 0;
  std::uint64_t frames_checked = 0;  // reached a check point (total - skipped)
  std::uint64_t frames_scored = 0;   // difference metric evaluated
  std::uint64_t frames_suppressed = 0;
  std::uint64_t frames_fired = 0;    // passed on to the model / oracle
  std::uint64_t frames_model_scored = 0;
  std::uint64_t frames_model_decided = 0;
  std::uint64_t frames_oracle = 0;
  double wall_detector = 0.0;
  double wall_model = 0.0;
  double wall_oracle = 0.0;
  double wall_total = 0.0;

  bool partition_holds() const {
    return frames_skipped + frames_suppressed + frames_model_decided + frames_oracle == frames_total;
  }
};

/// Which stages of a config are active; used by factor and lesion reports.
struct StageMask {
  bool skipping = true;
  bool difference = true;
  bool model = true;
};

struct RunOptions {
  std::size_t workers = 1;
  StageMask stages;
};

struct RunResult {
  FrameRange range;
  LabelTrack predicted;  // one entry per frame of range
  RunStats stats;
};

RunResult run_cascade(const CascadeConfig& config, const Video& video, const Oracle& oracle,
                      FrameRange range, const RunOptions& options = {});

/// Whole video, oracle built from config.oracle.
RunResult run_cascade(const CascadeConfig& config, const Video& video);

struct Interval {
  double start_s = 0.0;
  double end_s = 0.0;
  bool operator==(const Interval&) const = default;
};

/// Maximal runs of present labels, in seconds. `first_index` is the frame
/// ordinal of labels[0].
std::vector<Interval> extract_intervals(const LabelTrack& labels, std::uint32_t fps,
                                        std::uint64_t first_index = 0);

}  // namespace vidcascade
