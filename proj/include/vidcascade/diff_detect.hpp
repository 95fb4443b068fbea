#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vidcascade/frames.hpp"

namespace vidcascade {

enum class CompareMode { reference_image, earlier_frame };
enum class DiffMetric { global_mse, blocked_mse };

std::string to_string(CompareMode mode);
std::string to_string(DiffMetric metric);
CompareMode compare_mode_from_string(const std::string& s);
DiffMetric diff_metric_from_string(const std::string& s);

struct DiffDetectorConfig {
  CompareMode mode = CompareMode::reference_image;
  DiffMetric metric = DiffMetric::global_mse;
  std::uint32_t grid = 1;
  std::vector<double> weights;  // grid * grid entries, blocked metric only
  double bias = 0.0;
  double delta_diff = 0.0;
  std::uint32_t t_diff = 1;  // frames
  std::uint32_t t_skip = 1;  // frames
  std::optional<Frame> reference_image;

  void validate() const;
  std::string name() const;  // e.g. "ref/global/skip15" or "prev10/blocked4/skip1"
};

/// Mean over all pixel positions of the squared intensity difference.
double mse(const Frame& a, const Frame& b);

/// Per-block MSE on a grid x grid partition, row-major block order. Pixels
/// left over when grid does not divide a dimension join the last block.
std::vector<double> blocked_mse(const Frame& a, const Frame& b, const VideoMeta& meta,
                                std::uint32_t grid);

struct LogisticHyper {
  double learning_rate = 1.0;
  int iterations = 500;
  double l2 = 1e-4;
};

struct BlockWeights {
  std::vector<double> weights;
  double bias = 0.0;
};

double sigmoid(double z);

/// Logistic regression by full-batch gradient descent on the mean log loss.
/// Features are standardized internally and the fit is folded back into raw
/// feature space, so scaling a column leaves predictions unchanged.
BlockWeights train_block_weights(const std::vector<std::vector<double>>& features,
                                 const LabelTrack& targets, const LogisticHyper& hyper = {});

/// Score of `frame` against `anchor`: raw MSE (global) or the logistic block
/// score (blocked). Pure.
double detector_score(const DiffDetectorConfig& config, const Frame& anchor, const Frame& frame,
                      const VideoMeta& meta);

enum class DdDecision { skipped, suppressed, fired };
std::string to_string(DdDecision d);

struct DdOutcome {
  DdDecision decision = DdDecision::skipped;
  double score = 0.0;  // +inf when fired without an anchor; 0 when skipped
  std::uint8_t label = kAbsent;  // label to emit for skipped/suppressed frames
};

struct DetectorState {
  struct Checked {
    std::uint64_t index;
    Frame frame;
    std::uint8_t label;
  };

  bool initialized = false;
  VideoMeta meta;
  std::optional<Frame> anchor_frame;
  std::optional<std::uint64_t> anchor_index;
  std::uint8_t anchor_label = kAbsent;
  std::uint8_t carried_label = kAbsent;  // label emitted at the last check
  std::optional<std::uint64_t> last_check_index;
  std::optional<std::uint64_t> last_index;
  std::deque<Checked> history;  // earlier-frame mode only
};

DetectorState init_detector_state(const DiffDetectorConfig& config, const VideoMeta& meta);

double dd_score(const DiffDetectorConfig& config, const DetectorState& state, const Frame& frame);

/// Advances the detector by one frame. Frames must arrive in increasing
/// index order. `precomputed_score` lets callers score frames in parallel
/// ahead of time; it must equal what dd_score would return.
DdOutcome dd_step(const DiffDetectorConfig& config, DetectorState& state, const Frame& frame,
                  std::uint64_t index, std::optional<double> precomputed_score = std::nullopt);

/// Feeds back the label emitted downstream for a fired frame.
void dd_record_label(DetectorState& state, std::uint64_t index, std::uint8_t label);

/// Label-independent check schedule for a run starting at range.begin: which
/// frames are checked and which earlier checked frame each one is compared to.
struct CheckPlan {
  std::uint64_t index;
  std::optional<std::uint64_t> anchor;  // earlier-frame mode; nullopt = no anchor yet
};

std::vector<CheckPlan> plan_checks(const DiffDetectorConfig& config, FrameRange range);

}  // namespace vidcascade
