#include "vidcascade/cascade.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "vidcascade/error.hpp"
#include "vidcascade/parallel.hpp"

namespace vidcascade {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

}  // namespace

void CascadeConfig::validate() const {
  oracle.validate();
  if (detector) detector->validate();
  if (model) {
    model->thresholds.validate();
    model->model.arch.validate();
    require(model->model.arch.input_dims() == preprocessing.input,
            "model input dims differ from preprocessing dims");
    require(preprocessing.stats.mean.size() == model->model.arch.channels,
            "channel stats do not match the model's channels");
  }
}

RunResult run_cascade(const CascadeConfig& config, const Video& video, const Oracle& oracle,
                      FrameRange range, const RunOptions& options) {
  config.validate();
  require(range.begin <= range.end && range.end <= video.frames.size(), "run range exceeds the video");
  const auto t_start = Clock::now();

  const StageMask& mask = options.stages;
  const bool use_detector = config.detector.has_value() && mask.difference;
  const bool use_model = config.model.has_value() && mask.model;
  const std::uint32_t t_skip = config.detector && mask.skipping ? config.detector->t_skip : 1;

  DiffDetectorConfig dcfg;
  DetectorState state;
  if (use_detector) {
    dcfg = *config.detector;
    dcfg.t_skip = t_skip;
    state = init_detector_state(dcfg, video.meta);
  }

  // Scores and confidences do not depend on emitted labels, so they can be
  // computed ahead of time in parallel; labels are still emitted in order.
  const std::size_t n = range.size();
  std::vector<double> pre_score(n, kUnset), pre_conf(n, kUnset);
  if (options.workers > 1) {
    DiffDetectorConfig plan_cfg = use_detector ? dcfg : DiffDetectorConfig{};
    plan_cfg.t_skip = t_skip;
    const auto plan = plan_checks(plan_cfg, range);
    std::vector<char> fires(plan.size(), 1);
    if (use_detector) {
      parallel_for(plan.size(), options.workers, [&](std::size_t k) {
        const CheckPlan& p = plan[k];
        const Frame* anchor = dcfg.mode == CompareMode::reference_image ? &*dcfg.reference_image
                              : p.anchor ? &video.frames[*p.anchor]
                                         : nullptr;
        if (!anchor) return;
        const double s = detector_score(dcfg, *anchor, video.frames[p.index], video.meta);
        pre_score[p.index - range.begin] = s;
        fires[k] = s > dcfg.delta_diff;
      });
    }
    if (use_model) {
      const ModelStage& ms = *config.model;
      parallel_for(plan.size(), options.workers, [&](std::size_t k) {
        if (!fires[k]) return;
        const std::uint64_t i = plan[k].index;
        const auto x = preprocess(video.frames[i], video.meta, config.preprocessing.stats,
                                  config.preprocessing.input);
        pre_conf[i - range.begin] = forward(ms.model, x);
      });
    }
  }

  RunResult result;
  result.range = range;
  result.predicted.reserve(n);
  RunStats& st = result.stats;
  st.frames_total = n;
  std::optional<std::uint64_t> last_check;
  std::uint8_t carried = kAbsent;

  for (std::uint64_t i = range.begin; i < range.end; ++i) {
    const Frame& frame = video.frames[i];
    const std::size_t k = i - range.begin;
    std::uint8_t label = kAbsent;
    bool downstream = true;

    if (use_detector) {
      const auto t0 = Clock::now();
      std::optional<double> pre;
      if (!std::isnan(pre_score[k])) pre = pre_score[k];
      const DdOutcome out = dd_step(dcfg, state, frame, i, pre);
      st.wall_detector += seconds_since(t0);
      if (out.decision == DdDecision::skipped) {
        ++st.frames_skipped;
        label = out.label;
        downstream = false;
      } else {
        ++st.frames_checked;
        if (std::isfinite(out.score)) ++st.frames_scored;
        if (out.decision == DdDecision::suppressed) {
          ++st.frames_suppressed;
          label = out.label;
          downstream = false;
        }
      }
    } else if (last_check && i - *last_check < t_skip) {
      ++st.frames_skipped;
      label = carried;
      downstream = false;
    } else {
      last_check = i;
      ++st.frames_checked;
    }

    if (downstream) {
      ++st.frames_fired;
      Verdict verdict = Verdict::uncertain;
      if (use_model) {
        const auto t0 = Clock::now();
        double c = pre_conf[k];
        if (std::isnan(c)) {
          const auto x = preprocess(frame, video.meta, config.preprocessing.stats, config.preprocessing.input);
          c = forward(config.model->model, x);
        }
        verdict = classify(c, config.model->thresholds);
        st.wall_model += seconds_since(t0);
        ++st.frames_model_scored;
      }
      if (verdict == Verdict::uncertain) {
        const auto t0 = Clock::now();
        label = oracle.query(i);
        st.wall_oracle += seconds_since(t0);
        ++st.frames_oracle;
      } else {
        label = verdict == Verdict::positive ? kPresent : kAbsent;
        ++st.frames_model_decided;
      }
      if (use_detector) dd_record_label(state, i, label);
      carried = label;
    } else if (!use_detector) {
      carried = label;
    }
    result.predicted.push_back(label);
  }
  st.wall_total = seconds_since(t_start);
  return result;
}

RunResult run_cascade(const CascadeConfig& config, const Video& video) {
  const Oracle oracle = Oracle::from_spec(config.oracle);
  return run_cascade(config, video, oracle, FrameRange{0, video.frames.size()});
}

std::vector<Interval> extract_intervals(const LabelTrack& labels, std::uint32_t fps, std::uint64_t first_index) {
  require(fps >= 1, "fps must be >= 1");
  std::vector<Interval> out;
  std::size_t i = 0;
  while (i < labels.size()) {
    if (!labels[i]) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    while (i < labels.size() && labels[i]) ++i;
    out.push_back({double(first_index + start) / fps, double(first_index + i) / fps});
  }
  return out;
}

}  // namespace vidcascade
