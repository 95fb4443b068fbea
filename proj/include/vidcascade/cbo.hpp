#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "vidcascade/cascade.hpp"
#include "vidcascade/diff_detect.hpp"
#include "vidcascade/frames.hpp"
#include "vidcascade/oracle.hpp"
#include "vidcascade/specialized.hpp"

namespace vidcascade {

struct AccuracyTarget {
  double fp_star = 0.01;
  double fn_star = 0.01;

  void validate() const;
};

/// Largest error count allowed on n frames: count <= rate * n.
std::uint64_t error_budget(double rate, std::uint64_t n);

/// Per-frame execution times (seconds) of the three cascade stages.
struct StageTimes {
  double t_detector = 0.0;
  double t_specialized = 0.0;
  double t_full = 0.0;
};

struct TimingProfile {
  double t_mse = 0.0;          // global metric
  double t_mse_blocked = 0.0;  // blocked metric including the logistic score
  std::map<std::string, double> t_specialized;  // keyed by architecture candidate name
  double t_full = 1.0;

  void validate() const;
  StageTimes stage_times(DiffMetric metric, const std::string& arch_name) const;
};

struct SelectivityEstimate {
  double f_s = 0.0;  // fraction of frames left after skipping
  double f_m = 0.0;  // fraction of checked frames that fire the detector
  double f_c = 0.0;  // fraction of fired frames left uncertain by the model
};

/// f_s T_det + f_s f_m T_spec + f_s f_m f_c T_full
double estimate_cost(const SelectivityEstimate& sel, const StageTimes& times);

SelectivityEstimate selectivities(std::uint64_t total, std::uint64_t checked, std::uint64_t fired,
                                  std::uint64_t uncertain);

/// A detector's behaviour on the held-out evaluation range. Each checked
/// frame owns a group: itself plus the skipped frames after it, which reuse
/// its emitted label. A suppressed check emits the label its anchor check
/// emitted (anchor >= 0), or the fixed inherited label (anchor = -1).
struct DetectorProfile {
  std::uint64_t total_frames = 0;
  std::vector<std::uint64_t> frames;  // checked frame indices
  std::vector<double> scores;         // +inf when no anchor was available
  std::vector<std::uint8_t> reference;
  std::vector<std::uint8_t> inherited;
  std::vector<std::int64_t> anchor;   // position of the anchor check, or -1
  std::vector<std::uint32_t> group_present;
  std::vector<std::uint32_t> group_absent;
  std::vector<std::uint32_t> order;  // positions sorted by decreasing score (stable)

  std::size_t size() const { return frames.size(); }
};

/// Builds a profile from raw per-frame data: `reference` covers the whole
/// range, `check_offsets` are increasing offsets of checked frames into it
/// (the first must be 0). `anchors` holds earlier check positions or -1;
/// empty means -1 everywhere.
DetectorProfile assemble_profile(const LabelTrack& reference, std::span<const std::uint64_t> check_offsets,
                                 std::span<const double> scores, std::span<const std::uint8_t> inherited,
                                 std::uint64_t first_index = 0, std::span<const std::int64_t> anchors = {});

/// Profiles a trained detector on `range` of a labelled video, starting from
/// a fresh detector state as a run over the same range would.
DetectorProfile profile_detector(const DiffDetectorConfig& config, const Video& video,
                                 const LabelTrack& labels, FrameRange range);

/// Per fired check, the frames whose emitted label it decides: its own group
/// plus the groups of every suppressed check chained to it through anchors.
/// Suppressed checks without an anchor emit their fixed inherited label;
/// their errors land in base_fp / base_fn.
struct LabelRoots {
  std::vector<std::int64_t> present;  // per position; 0 unless fired
  std::vector<std::int64_t> absent;
  std::int64_t base_fp = 0;
  std::int64_t base_fn = 0;
};
LabelRoots label_roots(const DetectorProfile& profile, double delta_diff);

struct SweepOptions {
  std::size_t max_delta_candidates = 0;  // 0 = every observed score
};

struct SweepOutcome {
  bool feasible = false;
  double delta_diff = 0.0;
  ThresholdPair thresholds;
  SelectivityEstimate sel;
  double cost = 0.0;
  std::uint64_t fp_count = 0;
  std::uint64_t fn_count = 0;
  std::uint64_t oracle_calls = 0;
  std::uint64_t fired = 0;
  std::uint64_t checked = 0;
  std::uint64_t total = 0;

  double fp_rate() const { return total ? double(fp_count) / double(total) : 0.0; }
  double fn_rate() const { return total ? double(fn_count) / double(total) : 0.0; }
};

/// Sorted firing-threshold candidates: 0 plus the distinct finite scores,
/// thinned to at most `max_candidates` evenly spaced ranks when nonzero.
std::vector<double> delta_candidates(std::span<const double> scores, std::size_t max_candidates = 0);

/// Sorted confidence-threshold candidates: 0, 1 and every observed confidence.
std::vector<double> confidence_candidates(std::span<const double> confidences);

/// Errors and oracle load of one (delta, c_low, c_high) triple.
SweepOutcome evaluate_thresholds(const DetectorProfile& profile, std::span<const double> confidences,
                                 double delta_diff, const ThresholdPair& thresholds, const StageTimes& times,
                                 const AccuracyTarget& targets);

/// Cheapest (delta, c_low, c_high) meeting the targets. Ties go to fewer
/// oracle calls, then lower delta, then lower c_low, then higher c_high.
/// When nothing is feasible, returns the most accurate setting (everything
/// that fires goes to the oracle) with feasible = false.
SweepOutcome sweep_pair(const DetectorProfile& profile, std::span<const double> confidences,
                        const AccuracyTarget& targets, const StageTimes& times,
                        const SweepOptions& options = {});

struct DetectorCandidate {
  CompareMode mode = CompareMode::reference_image;
  DiffMetric metric = DiffMetric::global_mse;
  std::uint32_t grid = 1;
  std::uint32_t t_diff = 1;
  std::uint32_t t_skip = 1;

  std::string name() const;
};

struct ArchCandidate {
  std::string name;
  ArchSpec arch;
};

struct SearchGrid {
  std::vector<DetectorCandidate> detectors;
  std::vector<ArchCandidate> archs;
  std::size_t max_delta_candidates = 100;

  void validate() const;

  /// modes x metrics x t_skip {1,5,15,30} x t_diff {1,10,30} (earlier-frame
  /// only), blocked grid 4, and the default architecture grid.
  static SearchGrid defaults(InputDims input, std::uint32_t channels);
};

std::vector<ArchCandidate> name_archs(const std::vector<ArchSpec>& archs);

struct SearchOptions {
  TrainHyper train;
  LogisticHyper logistic;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::size_t max_train_frames = 0;       // 0 = whole training split
  std::size_t max_crossval_frames = 0;    // 0 = whole cross-val split
  std::size_t max_logistic_examples = 4000;
  InputDims input{32, 32};
  OracleSpec oracle;  // copied into the chosen CascadeConfig
};

struct RankingEntry {
  std::size_t detector_pos = 0;
  std::size_t arch_pos = 0;
  std::string detector;
  std::string arch;
  bool available = true;  // false when the detector could not be trained
  std::string note;
  SweepOutcome outcome;
};

struct SearchResult {
  bool feasible = false;
  CascadeConfig best;
  std::string best_detector;
  std::string best_arch;
  double expected_cost = 0.0;
  SelectivityEstimate sel;
  double fp_rate = 0.0;
  double fn_rate = 0.0;
  std::uint64_t oracle_calls = 0;
  std::uint64_t eval_frames = 0;
  TimingProfile timing;
  std::vector<RankingEntry> ranking;  // one per (detector, arch), best first
};

/// Times each stage on this machine: difference metrics and model forward
/// passes (including preprocessing) over up to `sample_frames` frames.
TimingProfile measure_timing(const Video& video, const std::vector<ArchCandidate>& archs, double t_full,
                             InputDims input, std::uint32_t blocked_grid = 4, std::size_t sample_frames = 1000);

/// Measures only the entries `timing` lacks: nonpositive detector times and
/// architectures without a t_specialized entry.
void fill_missing_timing(TimingProfile& timing, const Video& video, const std::vector<ArchCandidate>& archs,
                         InputDims input, std::uint32_t blocked_grid = 4);

/// Trains every detector and architecture on split.train (+ crossval),
/// profiles them on split.eval, sweeps thresholds for every pair and returns
/// the cheapest cascade meeting `targets` on split.eval. Timing entries
/// missing from `timing` are measured.
SearchResult search(const Video& video, const LabelTrack& labels, const DataSplit& split,
                    const AccuracyTarget& targets, const TimingProfile& timing, const SearchGrid& grid,
                    const SearchOptions& options);

/// Initialization and shuffling seed of an architecture's model during
/// search. Depends on the shape only, so duplicate shapes train identically.
std::uint64_t model_seed(std::uint64_t seed, const ArchSpec& arch);

/// Builds the training/cross-val datasets for the specialized models.
Dataset make_dataset(const Video& video, const LabelTrack& labels, FrameRange range, const ChannelStats& stats,
                     InputDims input, std::size_t max_frames = 0);

/// Fits the logistic block weights of a blocked detector on the training range.
BlockWeights train_detector_weights(const DiffDetectorConfig& config, const Video& video,
                                    const LabelTrack& labels, FrameRange train, const LogisticHyper& hyper,
                                    std::size_t max_examples);

}  // namespace vidcascade
