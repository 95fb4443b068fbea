#include "vidcascade/evalkit.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "vidcascade/error.hpp"
#include "vidcascade/parallel.hpp"

namespace vidcascade {

void EvalConfig::validate() const {
  require(window >= 1, "window must be >= 1");
  require(agree_min >= 1 && agree_min <= window, "agree_min must be in [1, window]");
}

double windowed_accuracy(const LabelTrack& pred, const LabelTrack& ref, const EvalConfig& cfg) {
  cfg.validate();
  require(pred.size() == ref.size(), "predicted and reference tracks differ in length (" +
                                         std::to_string(pred.size()) + " vs " + std::to_string(ref.size()) + ")");
  require(pred.size() >= cfg.window, "tracks are shorter than one window");
  const std::size_t windows = pred.size() / cfg.window;
  std::size_t correct = 0;
  for (std::size_t w = 0; w < windows; ++w) {
    std::uint32_t agree = 0;
    for (std::size_t i = w * cfg.window; i < (w + 1) * cfg.window; ++i) agree += pred[i] == ref[i] ? 1 : 0;
    if (agree >= cfg.agree_min) ++correct;
  }
  return double(correct) / double(windows);
}

ErrorRates fp_fn_rates(const LabelTrack& pred, const LabelTrack& ref) {
  require(pred.size() == ref.size(), "predicted and reference tracks differ in length (" +
                                         std::to_string(pred.size()) + " vs " + std::to_string(ref.size()) + ")");
  ErrorRates r;
  ErrorCounts& c = r.counts;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] && ref[i]) ++c.tp;
    else if (!pred[i] && !ref[i]) ++c.tn;
    else if (pred[i]) ++c.fp;
    else ++c.fn;
  }
  if (!pred.empty()) {
    r.fp_rate = double(c.fp) / double(pred.size());
    r.fn_rate = double(c.fn) / double(pred.size());
  }
  return r;
}

StageTimes stage_times_for(const CascadeConfig& config, const TimingProfile& timing) {
  StageTimes t;
  t.t_full = timing.t_full;
  if (config.detector)
    t.t_detector = config.detector->metric == DiffMetric::global_mse ? timing.t_mse : timing.t_mse_blocked;
  if (config.model) {
    const std::string name = config.model->model.arch.name();
    const auto it = timing.t_specialized.find(name);
    if (it == timing.t_specialized.end()) fail(ErrorKind::validation, "no timing for architecture '" + name + "'");
    t.t_specialized = it->second;
  }
  return t;
}

double modeled_run_time(const RunStats& s, const StageTimes& t) {
  return double(s.frames_scored) * t.t_detector + double(s.frames_model_scored) * t.t_specialized +
         double(s.frames_oracle) * t.t_full;
}

Speedup speedup(const RunStats& stats, const StageTimes& times, bool stub_oracle) {
  require(stats.partition_holds(), "run statistics do not partition the frames");
  require(times.t_full > 0.0, "t_full must be positive");
  const double modeled = modeled_run_time(stats, times);
  require(stats.frames_total > 0 && modeled > 0.0, "speedup undefined: zero modeled cascade time");
  Speedup s;
  s.modeled = double(stats.frames_total) * times.t_full / modeled;
  if (stub_oracle && stats.frames_oracle > 0 && stats.wall_total > 0.0) {
    const double per_call = stats.wall_oracle / double(stats.frames_oracle);
    s.measured = double(stats.frames_total) * per_call / stats.wall_total;
  }
  return s;
}

namespace {

struct Variant {
  std::string name;
  StageMask mask;
};

StageReport run_variants(std::string title, const std::vector<Variant>& variants, const Video& video,
                         const LabelTrack& labels, const CascadeConfig& config, const Oracle& oracle,
                         FrameRange range, const TimingProfile& timing, const ReportOptions& options) {
  require(range.size() > 0 && range.end <= labels.size(), "report range must be nonempty and labelled");
  const LabelTrack ref(labels.begin() + std::ptrdiff_t(range.begin), labels.begin() + std::ptrdiff_t(range.end));
  const bool stub = oracle.simulated_latency() > 0.0;
  StageReport report;
  report.title = std::move(title);
  for (const Variant& v : variants) {
    CascadeConfig cfg = config;
    if (!v.mask.model) cfg.model.reset();
    RunOptions ro;
    ro.workers = options.workers;
    ro.stages = v.mask;
    const RunResult run = run_cascade(cfg, video, oracle, range, ro);
    ReportRow row;
    row.name = v.name;
    row.stats = run.stats;
    row.accuracy = windowed_accuracy(run.predicted, ref, options.eval);
    row.rates = fp_fn_rates(run.predicted, ref);
    row.speedup = speedup(run.stats, stage_times_for(cfg, timing), stub);
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace

StageReport factor_analysis(const Video& video, const LabelTrack& labels, const CascadeConfig& config,
                            const Oracle& oracle, FrameRange range, const TimingProfile& timing,
                            const ReportOptions& options) {
  const std::vector<Variant> v{
      {"oracle-only", {false, false, false}},
      {"+skipping", {true, false, false}},
      {"+difference", {true, true, false}},
      {"+model", {true, true, true}},
  };
  return run_variants("factor analysis", v, video, labels, config, oracle, range, timing, options);
}

StageReport lesion_study(const Video& video, const LabelTrack& labels, const CascadeConfig& config,
                         const Oracle& oracle, FrameRange range, const TimingProfile& timing,
                         const ReportOptions& options) {
  const std::vector<Variant> v{
      {"full", {true, true, true}},
      {"-skipping", {false, true, true}},
      {"-difference", {true, false, true}},
      {"-detector", {false, false, true}},
      {"-model", {true, true, false}},
  };
  return run_variants("lesion study", v, video, labels, config, oracle, range, timing, options);
}

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<std::vector<std::string>> cells(const StageReport& report, bool include_wall) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"configuration", "frames", "checked", "scored", "fired", "model_scored",
                                  "oracle", "accuracy", "fp_rate", "fn_rate", "modeled_speedup"};
  if (include_wall) {
    header.push_back("measured_speedup");
    header.push_back("wall_s");
  }
  rows.push_back(header);
  for (const ReportRow& r : report.rows) {
    const RunStats& s = r.stats;
    std::vector<std::string> row{r.name,
                                 std::to_string(s.frames_total),
                                 std::to_string(s.frames_checked),
                                 std::to_string(s.frames_scored),
                                 std::to_string(s.frames_fired),
                                 std::to_string(s.frames_model_scored),
                                 std::to_string(s.frames_oracle),
                                 fmt("%.4f", r.accuracy),
                                 fmt("%.4f", r.rates.fp_rate),
                                 fmt("%.4f", r.rates.fn_rate),
                                 fmt("%.2f", r.speedup.modeled)};
    if (include_wall) {
      row.push_back(r.speedup.measured ? fmt("%.2f", *r.speedup.measured) : "-");
      row.push_back(fmt("%.3f", s.wall_total));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::string render_table(const StageReport& report, bool include_wall) {
  const auto rows = cells(report, include_wall);
  std::vector<std::size_t> width(rows.front().size(), 0);
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  std::ostringstream out;
  out << report.title << '\n';
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c == 0) line += r[c] + std::string(width[c] - r[c].size(), ' ');
      else line += "  " + std::string(width[c] - r[c].size(), ' ') + r[c];
    }
    out << line << '\n';
  }
  return out.str();
}

std::string render_csv(const StageReport& report, bool include_wall) {
  std::ostringstream out;
  for (const auto& r : cells(report, include_wall)) {
    for (std::size_t c = 0; c < r.size(); ++c) out << (c ? "," : "") << r[c];
    out << '\n';
  }
  return out.str();
}

}  // namespace vidcascade
