#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vidcascade/cascade.hpp"
#include "vidcascade/cbo.hpp"
#include "vidcascade/frames.hpp"
#include "vidcascade/oracle.hpp"

namespace vidcascade {

struct EvalConfig {
  std::uint32_t window = 30;
  std::uint32_t agree_min = 28;

  void validate() const;
};

/// Fraction of non-overlapping windows (aligned to frame 0, trailing partial
/// window dropped) in which pred and ref agree on at least agree_min frames.
double windowed_accuracy(const LabelTrack& pred, const LabelTrack& ref, const EvalConfig& cfg = {});

struct ErrorCounts {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + tn + fp + fn; }
  bool operator==(const ErrorCounts&) const = default;
};

struct ErrorRates {
  double fp_rate = 0.0;
  double fn_rate = 0.0;
  ErrorCounts counts;
};

ErrorRates fp_fn_rates(const LabelTrack& pred, const LabelTrack& ref);

/// Stage times for a concrete cascade: the detector's metric and the model's
/// architecture pick the entries out of the profile.
StageTimes stage_times_for(const CascadeConfig& config, const TimingProfile& timing);

/// Time the cost model charges for a finished run: T_det per scored frame,
/// T_spec per model-scored frame, T_full per oracle call.
double modeled_run_time(const RunStats& stats, const StageTimes& times);

struct Speedup {
  double modeled = 0.0;
  std::optional<double> measured;  // only when the oracle slept per call
};

/// Speedup over sending every frame to the oracle.
Speedup speedup(const RunStats& stats, const StageTimes& times, bool stub_oracle = false);

struct ReportRow {
  std::string name;
  RunStats stats;
  double accuracy = 0.0;
  ErrorRates rates;
  Speedup speedup;
};

struct StageReport {
  std::string title;
  std::vector<ReportRow> rows;
};

struct ReportOptions {
  EvalConfig eval;
  std::size_t workers = 1;
};

/// Oracle only, then skipping, difference detection and the specialized
/// model added one at a time.
StageReport factor_analysis(const Video& video, const LabelTrack& labels, const CascadeConfig& config,
                            const Oracle& oracle, FrameRange range, const TimingProfile& timing,
                            const ReportOptions& options = {});

/// The full cascade, then the full cascade with one stage removed per row.
/// Removing the detector also removes skipping.
StageReport lesion_study(const Video& video, const LabelTrack& labels, const CascadeConfig& config,
                         const Oracle& oracle, FrameRange range, const TimingProfile& timing,
                         const ReportOptions& options = {});

/// Aligned plain-text table. With include_wall = false every wall-clock
/// derived column is dropped so the output is deterministic.
std::string render_table(const StageReport& report, bool include_wall = true);
std::string render_csv(const StageReport& report, bool include_wall = true);

}  // namespace vidcascade
