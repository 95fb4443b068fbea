#include "vidcascade/cbo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <tuple>

#include "vidcascade/error.hpp"
#include "vidcascade/parallel.hpp"
#include "vidcascade/rng.hpp"

namespace vidcascade {

void AccuracyTarget::validate() const {
  require(fp_star >= 0.0 && fp_star <= 1.0, "fp_star must be in [0, 1]");
  require(fn_star >= 0.0 && fn_star <= 1.0, "fn_star must be in [0, 1]");
}

std::uint64_t error_budget(double rate, std::uint64_t n) {
  return static_cast<std::uint64_t>(std::floor(rate * double(n) + 1e-9));
}

void TimingProfile::validate() const {
  require(t_mse > 0.0 && t_mse_blocked > 0.0 && t_full > 0.0, "stage times must be positive");
  for (const auto& [name, t] : t_specialized) require(t > 0.0, "specialized time for '" + name + "' must be positive");
}

StageTimes TimingProfile::stage_times(DiffMetric metric, const std::string& arch_name) const {
  const auto it = t_specialized.find(arch_name);
  if (it == t_specialized.end()) fail(ErrorKind::validation, "no timing for architecture '" + arch_name + "'");
  return {metric == DiffMetric::global_mse ? t_mse : t_mse_blocked, it->second, t_full};
}

double estimate_cost(const SelectivityEstimate& s, const StageTimes& t) {
  return s.f_s * t.t_detector + s.f_s * s.f_m * t.t_specialized + s.f_s * s.f_m * s.f_c * t.t_full;
}

SelectivityEstimate selectivities(std::uint64_t total, std::uint64_t checked, std::uint64_t fired,
                                  std::uint64_t uncertain) {
  require(total > 0, "selectivities need at least one frame");
  SelectivityEstimate s;
  s.f_s = double(checked) / double(total);
  s.f_m = checked ? double(fired) / double(checked) : 0.0;
  s.f_c = fired ? double(uncertain) / double(fired) : 0.0;
  return s;
}

DetectorProfile assemble_profile(const LabelTrack& reference, std::span<const std::uint64_t> offsets,
                                 std::span<const double> scores, std::span<const std::uint8_t> inherited,
                                 std::uint64_t first_index, std::span<const std::int64_t> anchors) {
  require(offsets.size() == scores.size() && offsets.size() == inherited.size() &&
              (anchors.empty() || anchors.size() == offsets.size()),
          "profile inputs differ in length");
  require(!offsets.empty() && offsets.front() == 0, "the first frame of a profiled range is always checked");
  DetectorProfile p;
  p.total_frames = reference.size();
  const std::size_t m = offsets.size();
  for (std::size_t k = 0; k < m; ++k) {
    const std::uint64_t lo = offsets[k];
    const std::uint64_t hi = k + 1 < m ? offsets[k + 1] : reference.size();
    require(lo < hi && hi <= reference.size(), "check offsets must be increasing and inside the range");
    std::uint32_t present = 0;
    for (std::uint64_t f = lo; f < hi; ++f) present += reference[f] ? 1 : 0;
    p.frames.push_back(first_index + lo);
    p.scores.push_back(scores[k]);
    p.reference.push_back(reference[lo]);
    p.inherited.push_back(inherited[k]);
    const std::int64_t a = anchors.empty() ? -1 : anchors[k];
    require(a >= -1 && a < std::int64_t(k), "an anchor must be an earlier check");
    p.anchor.push_back(a);
    p.group_present.push_back(present);
    p.group_absent.push_back(static_cast<std::uint32_t>(hi - lo) - present);
  }
  p.order.resize(m);
  std::iota(p.order.begin(), p.order.end(), 0u);
  std::stable_sort(p.order.begin(), p.order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return p.scores[a] > p.scores[b]; });
  return p;
}

DetectorProfile profile_detector(const DiffDetectorConfig& config, const Video& video, const LabelTrack& labels,
                                 FrameRange range) {
  config.validate();
  require(range.size() > 0 && range.end <= video.frames.size() && range.end <= labels.size(),
          "profile range must be nonempty and inside the video and labels");
  const auto plan = plan_checks(config, range);
  std::vector<std::uint64_t> offsets;
  std::vector<double> scores;
  std::vector<std::uint8_t> inherited(plan.size(), kAbsent);
  std::vector<std::int64_t> anchors(plan.size(), -1);
  for (std::size_t k = 0; k < plan.size(); ++k) {
    const CheckPlan& c = plan[k];
    offsets.push_back(c.index - range.begin);
    const Frame& f = video.frames[c.index];
    if (config.mode == CompareMode::reference_image) {
      scores.push_back(detector_score(config, *config.reference_image, f, video.meta));
    } else if (c.anchor) {
      scores.push_back(detector_score(config, video.frames[*c.anchor], f, video.meta));
      anchors[k] = std::int64_t((*c.anchor - range.begin) / config.t_skip);
    } else {
      scores.push_back(std::numeric_limits<double>::infinity());
    }
  }
  const LabelTrack segment(labels.begin() + std::ptrdiff_t(range.begin), labels.begin() + std::ptrdiff_t(range.end));
  return assemble_profile(segment, offsets, scores, inherited, range.begin, anchors);
}

LabelRoots label_roots(const DetectorProfile& p, double delta) {
  LabelRoots r;
  r.present.assign(p.size(), 0);
  r.absent.assign(p.size(), 0);
  // root[j]: the fired check whose label j emits, or -1 for a fixed label.
  std::vector<std::int64_t> root(p.size(), -1);
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (p.scores[j] > delta) root[j] = std::int64_t(j);
    else if (p.anchor[j] >= 0) root[j] = root[std::size_t(p.anchor[j])];
    if (root[j] >= 0) {
      r.present[std::size_t(root[j])] += p.group_present[j];
      r.absent[std::size_t(root[j])] += p.group_absent[j];
    } else if (p.inherited[j]) {
      r.base_fp += p.group_absent[j];
    } else {
      r.base_fn += p.group_present[j];
    }
  }
  return r;
}

std::vector<double> delta_candidates(std::span<const double> scores, std::size_t max_candidates) {
  std::vector<double> u{0.0};
  for (double s : scores)
    if (std::isfinite(s)) u.push_back(s);
  std::sort(u.begin(), u.end());
  u.erase(std::unique(u.begin(), u.end()), u.end());
  if (max_candidates == 0 || u.size() <= max_candidates) return u;
  std::vector<double> thin;
  if (max_candidates == 1) return {u.front()};
  for (std::size_t j = 0; j < max_candidates; ++j) {
    const auto rank = static_cast<std::size_t>(
        std::llround(double(j) * double(u.size() - 1) / double(max_candidates - 1)));
    if (thin.empty() || thin.back() != u[rank]) thin.push_back(u[rank]);
  }
  return thin;
}

std::vector<double> confidence_candidates(std::span<const double> confidences) {
  std::vector<double> v{0.0, 1.0};
  v.insert(v.end(), confidences.begin(), confidences.end());
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

SweepOutcome evaluate_thresholds(const DetectorProfile& p, std::span<const double> conf, double delta,
                                 const ThresholdPair& t, const StageTimes& times, const AccuracyTarget& targets) {
  require(conf.size() == p.size(), "confidences and profile cover different frame sets");
  SweepOutcome o;
  o.delta_diff = delta;
  o.thresholds = t;
  o.total = p.total_frames;
  o.checked = p.size();
  const LabelRoots roots = label_roots(p, delta);
  o.fp_count = std::uint64_t(roots.base_fp);
  o.fn_count = std::uint64_t(roots.base_fn);
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (!(p.scores[j] > delta)) continue;
    ++o.fired;
    std::uint8_t emitted;
    switch (classify(conf[j], t)) {
      case Verdict::negative: emitted = kAbsent; break;
      case Verdict::positive: emitted = kPresent; break;
      default:
        emitted = p.reference[j];
        ++o.oracle_calls;
    }
    if (emitted) o.fp_count += std::uint64_t(roots.absent[j]);
    else o.fn_count += std::uint64_t(roots.present[j]);
  }
  o.sel = selectivities(o.total, o.checked, o.fired, o.oracle_calls);
  o.cost = estimate_cost(o.sel, times);
  o.feasible = o.fp_count <= error_budget(targets.fp_star, o.total) &&
               o.fn_count <= error_budget(targets.fn_star, o.total);
  return o;
}

SweepOutcome sweep_pair(const DetectorProfile& p, std::span<const double> conf, const AccuracyTarget& targets,
                        const StageTimes& times, const SweepOptions& options) {
  targets.validate();
  require(conf.size() == p.size(), "confidences and profile cover different frame sets");
  require(p.size() > 0 && p.total_frames > 0, "empty detector profile");

  const std::vector<double> deltas = delta_candidates(p.scores, options.max_delta_candidates);
  const std::vector<double> values = confidence_candidates(conf);
  const std::size_t nv = values.size();
  std::vector<std::size_t> level(p.size());
  for (std::size_t j = 0; j < p.size(); ++j)
    level[j] = std::size_t(std::lower_bound(values.begin(), values.end(), conf[j]) - values.begin());

  const auto fn_budget = static_cast<std::int64_t>(error_budget(targets.fn_star, p.total_frames));
  const auto fp_budget = static_cast<std::int64_t>(error_budget(targets.fp_star, p.total_frames));

  // Per-level effect of moving a fired frame out of the uncertain band:
  // to negative (fn_neg, fp_neg) or to positive (fn_pos, fp_pos).
  std::vector<std::int64_t> cnt(nv), fn_neg(nv), fp_neg(nv), fn_pos(nv), fp_pos(nv);
  std::vector<std::int64_t> pre_fn(nv + 1), pre_fp(nv + 1), pre_cnt(nv + 1), suf_fn(nv), suf_fp(nv);

  std::optional<SweepOutcome> best;
  std::uint64_t best_unc = 0;
  for (const double delta : deltas) {
    std::fill(cnt.begin(), cnt.end(), 0);
    std::fill(fn_neg.begin(), fn_neg.end(), 0);
    std::fill(fp_neg.begin(), fp_neg.end(), 0);
    std::fill(fn_pos.begin(), fn_pos.end(), 0);
    std::fill(fp_pos.begin(), fp_pos.end(), 0);
    const LabelRoots roots = label_roots(p, delta);
    std::int64_t base_fn = roots.base_fn, base_fp = roots.base_fp;
    std::uint64_t fired = 0;
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (!(p.scores[j] > delta)) continue;
      const std::int64_t gp = roots.present[j], ga = roots.absent[j];
      ++fired;
      const std::size_t v = level[j];
      ++cnt[v];
      if (p.reference[j]) {
        base_fp += ga;  // oracle says present; frames that follow it while absent become FP
        fn_neg[v] += gp;
        fp_neg[v] -= ga;
      } else {
        base_fn += gp;
        fp_pos[v] += ga;
        fn_pos[v] -= gp;
      }
    }
    pre_fn[0] = pre_fp[0] = pre_cnt[0] = 0;
    for (std::size_t v = 0; v < nv; ++v) {
      pre_fn[v + 1] = pre_fn[v] + fn_neg[v];
      pre_fp[v + 1] = pre_fp[v] + fp_neg[v];
      pre_cnt[v + 1] = pre_cnt[v] + cnt[v];
    }
    suf_fn[nv - 1] = suf_fp[nv - 1] = 0;
    for (std::size_t v = nv - 1; v-- > 0;) {
      suf_fn[v] = suf_fn[v + 1] + fn_pos[v + 1];
      suf_fp[v] = suf_fp[v + 1] + fp_pos[v + 1];
    }

    // c_low = values[x], c_high = values[y], x <= y. FN needs y <= y_fn(x)
    // (suf_fn non-decreasing in y), FP needs y >= y_fp(x) (suf_fp
    // non-increasing in y); both bounds only move down as x grows.
    std::int64_t y_fn = std::int64_t(nv) - 1;
    std::int64_t y_fp = -1;  // -1: FP constraint unsatisfiable so far
    std::optional<std::size_t> win_x;
    std::size_t win_y = 0;
    std::int64_t win_unc = 0;
    for (std::size_t x = 0; x < nv; ++x) {
      const std::int64_t r_fn = fn_budget - base_fn - pre_fn[x];
      const std::int64_t r_fp = fp_budget - base_fp - pre_fp[x];
      while (y_fn >= 0 && suf_fn[std::size_t(y_fn)] > r_fn) --y_fn;
      if (y_fp < 0 && suf_fp[nv - 1] <= r_fp) y_fp = std::int64_t(nv) - 1;
      while (y_fp > 0 && suf_fp[std::size_t(y_fp) - 1] <= r_fp) --y_fp;
      if (y_fn < 0 || y_fp < 0) continue;
      const std::int64_t lo = std::max<std::int64_t>(std::int64_t(x), y_fp);
      if (lo > y_fn) continue;
      const std::int64_t unc = pre_cnt[std::size_t(lo) + 1] - pre_cnt[x];
      if (!win_x || unc < win_unc) {
        win_x = x;
        win_unc = unc;
        // Widest c_high with the same uncertain set.
        std::size_t next = std::size_t(lo) + 1;
        while (next < nv && cnt[next] == 0) ++next;
        win_y = std::min<std::size_t>(std::size_t(y_fn), next - 1);
      }
    }
    if (!win_x) continue;

    SweepOutcome o;
    o.feasible = true;
    o.delta_diff = delta;
    o.thresholds = {values[*win_x], values[win_y]};
    o.total = p.total_frames;
    o.checked = p.size();
    o.fired = fired;
    o.oracle_calls = std::uint64_t(win_unc);
    o.fn_count = std::uint64_t(base_fn + pre_fn[*win_x] + suf_fn[win_y]);
    o.fp_count = std::uint64_t(base_fp + pre_fp[*win_x] + suf_fp[win_y]);
    o.sel = selectivities(o.total, o.checked, o.fired, o.oracle_calls);
    o.cost = estimate_cost(o.sel, times);
    if (!best || o.cost < best->cost || (o.cost == best->cost && o.oracle_calls < best_unc)) {
      best = o;
      best_unc = o.oracle_calls;
    }
  }
  if (best) return *best;
  return evaluate_thresholds(p, conf, deltas.front(), ThresholdPair{0.0, 1.0}, times, targets);
}

std::string DetectorCandidate::name() const {
  DiffDetectorConfig c;
  c.mode = mode;
  c.metric = metric;
  c.grid = grid;
  c.t_diff = t_diff;
  c.t_skip = t_skip;
  return c.name();
}

void SearchGrid::validate() const {
  require(!detectors.empty(), "search grid needs at least one detector");
  require(!archs.empty(), "search grid needs at least one architecture");
  for (const auto& d : detectors) require(d.grid >= 1 && d.t_diff >= 1 && d.t_skip >= 1, "bad detector candidate");
  for (const auto& a : archs) a.arch.validate();
}

std::vector<ArchCandidate> name_archs(const std::vector<ArchSpec>& archs) {
  std::vector<ArchCandidate> out;
  for (const auto& a : archs) out.push_back({a.name(), a});
  return out;
}

SearchGrid SearchGrid::defaults(InputDims input, std::uint32_t channels) {
  SearchGrid g;
  for (DiffMetric metric : {DiffMetric::global_mse, DiffMetric::blocked_mse}) {
    const std::uint32_t grid = metric == DiffMetric::blocked_mse ? 4 : 1;
    for (std::uint32_t skip : {1u, 5u, 15u, 30u}) {
      g.detectors.push_back({CompareMode::reference_image, metric, grid, 1, skip});
      for (std::uint32_t tdiff : {1u, 10u, 30u})
        g.detectors.push_back({CompareMode::earlier_frame, metric, grid, tdiff, skip});
    }
  }
  g.archs = name_archs(default_arch_grid(input, channels));
  return g;
}

Dataset make_dataset(const Video& video, const LabelTrack& labels, FrameRange range, const ChannelStats& stats,
                     InputDims input, std::size_t max_frames) {
  require(range.end <= video.frames.size() && range.end <= labels.size(), "dataset range exceeds the video");
  std::uint64_t stride = 1;
  if (max_frames > 0 && range.size() > max_frames) stride = (range.size() + max_frames - 1) / max_frames;
  Dataset ds;
  for (std::uint64_t i = range.begin; i < range.end; i += stride)
    ds.add(preprocess(video.frames[i], video.meta, stats, input).values, labels[i]);
  return ds;
}

BlockWeights train_detector_weights(const DiffDetectorConfig& config, const Video& video, const LabelTrack& labels,
                                    FrameRange train, const LogisticHyper& hyper, std::size_t max_examples) {
  struct Example {
    std::uint64_t index;
    const Frame* anchor;
    std::uint8_t target;
  };
  std::vector<Example> pos, neg;
  for (std::uint64_t i = train.begin; i < train.end; ++i) {
    if (config.mode == CompareMode::reference_image) {
      (labels[i] ? pos : neg).push_back({i, &*config.reference_image, labels[i]});
    } else {
      if (i < train.begin + config.t_diff) continue;
      const std::uint64_t a = i - config.t_diff;
      const std::uint8_t differs = labels[i] != labels[a] ? kPresent : kAbsent;
      (differs ? pos : neg).push_back({i, &video.frames[a], differs});
    }
  }
  // Keep every positive; thin the (usually dominant) negatives by stride.
  std::vector<Example> chosen = pos;
  if (max_examples > 0 && pos.size() + neg.size() > max_examples) {
    const std::size_t room = max_examples > pos.size() ? max_examples - pos.size() : max_examples / 2;
    const std::size_t stride = std::max<std::size_t>(1, (neg.size() + room - 1) / std::max<std::size_t>(room, 1));
    for (std::size_t k = 0; k < neg.size(); k += stride) chosen.push_back(neg[k]);
  } else {
    chosen.insert(chosen.end(), neg.begin(), neg.end());
  }
  std::vector<std::vector<double>> features;
  LabelTrack targets;
  for (const Example& e : chosen) {
    features.push_back(blocked_mse(video.frames[e.index], *e.anchor, video.meta, config.grid));
    targets.push_back(e.target);
  }
  return train_block_weights(features, targets, hyper);
}

TimingProfile measure_timing(const Video& video, const std::vector<ArchCandidate>& archs, double t_full,
                             InputDims input, std::uint32_t blocked_grid, std::size_t sample_frames) {
  using Clock = std::chrono::steady_clock;
  require(video.frames.size() >= 2, "timing needs at least two frames");
  const std::size_t n = std::min(sample_frames, video.frames.size() - 1);
  TimingProfile t;
  t.t_full = t_full;
  volatile double sink = 0.0;

  auto t0 = Clock::now();
  for (std::size_t i = 0; i < n; ++i) sink = sink + mse(video.frames[i], video.frames[i + 1]);
  t.t_mse = std::chrono::duration<double>(Clock::now() - t0).count() / double(n);

  DiffDetectorConfig blocked;
  blocked.metric = DiffMetric::blocked_mse;
  blocked.grid = std::min({blocked_grid, video.meta.width, video.meta.height});
  blocked.weights.assign(std::size_t(blocked.grid) * blocked.grid, 1e-3);
  t0 = Clock::now();
  for (std::size_t i = 0; i < n; ++i)
    sink = sink + detector_score(blocked, video.frames[i], video.frames[i + 1], video.meta);
  t.t_mse_blocked = std::chrono::duration<double>(Clock::now() - t0).count() / double(n);

  const ChannelStats stats = compute_channel_means(video, FrameRange{0, n});
  for (const ArchCandidate& a : archs) {
    const SpecializedModel m = init_model(a.arch, 0);
    t0 = Clock::now();
    for (std::size_t i = 0; i < n; ++i) sink = sink + forward(m, preprocess(video.frames[i], video.meta, stats, input));
    t.t_specialized[a.name] = std::chrono::duration<double>(Clock::now() - t0).count() / double(n);
  }
  // Guard against clock granularity on tiny inputs.
  const double floor = 1e-9;
  t.t_mse = std::max(t.t_mse, floor);
  t.t_mse_blocked = std::max(t.t_mse_blocked, floor);
  for (auto& [name, v] : t.t_specialized) v = std::max(v, floor);
  return t;
}

void fill_missing_timing(TimingProfile& timing, const Video& video, const std::vector<ArchCandidate>& archs,
                         InputDims input, std::uint32_t blocked_grid) {
  std::vector<ArchCandidate> missing;
  for (const auto& a : archs)
    if (!timing.t_specialized.contains(a.name)) missing.push_back(a);
  if (missing.empty() && timing.t_mse > 0.0 && timing.t_mse_blocked > 0.0) return;
  const TimingProfile measured = measure_timing(video, missing, timing.t_full, input, blocked_grid);
  if (timing.t_mse <= 0.0) timing.t_mse = measured.t_mse;
  if (timing.t_mse_blocked <= 0.0) timing.t_mse_blocked = measured.t_mse_blocked;
  for (const auto& [name, t] : measured.t_specialized) timing.t_specialized[name] = t;
}

std::uint64_t model_seed(std::uint64_t seed, const ArchSpec& a) {
  std::uint64_t h = seed;
  for (std::uint64_t v : {std::uint64_t(a.input_width), std::uint64_t(a.input_height), std::uint64_t(a.channels),
                          std::uint64_t(a.hidden_layers), std::uint64_t(a.hidden_width),
                          std::uint64_t(a.hidden_layers == 2 ? a.penultimate_width : 0)})
    h = Rng::mix(h ^ v);
  return h;
}

namespace {

auto arch_key(const ArchSpec& a) {
  return std::make_tuple(a.hidden_layers, a.hidden_width, a.hidden_layers == 2 ? a.penultimate_width : 0u);
}

double violation(const SweepOutcome& o, const AccuracyTarget& t) {
  return std::max(o.fp_rate() - t.fp_star, o.fn_rate() - t.fn_star);
}

}  // namespace

SearchResult search(const Video& video, const LabelTrack& labels, const DataSplit& split,
                    const AccuracyTarget& targets, const TimingProfile& timing_in, const SearchGrid& grid,
                    const SearchOptions& options) {
  grid.validate();
  targets.validate();
  require(labels.size() >= split.eval.end && video.frames.size() >= split.eval.end,
          "labels must cover the training and evaluation splits");

  const ChannelStats stats = compute_channel_means(video, split.train);
  std::optional<Frame> reference;
  try {
    reference = build_reference_image(video, labels, split.train);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::data) throw;
  }

  TimingProfile timing = timing_in;
  {
    std::uint32_t bgrid = 4;
    for (const auto& d : grid.detectors)
      if (d.metric == DiffMetric::blocked_mse) bgrid = d.grid;
    fill_missing_timing(timing, video, grid.archs, options.input, bgrid);
  }
  timing.validate();

  // Specialized models: train, then score every evaluation frame once.
  const Dataset train_ds = make_dataset(video, labels, split.train, stats, options.input, options.max_train_frames);
  const Dataset cv_ds = make_dataset(video, labels, split.crossval, stats, options.input, options.max_crossval_frames);
  const Dataset eval_ds = make_dataset(video, labels, split.eval, stats, options.input);
  std::vector<SpecializedModel> models(grid.archs.size());
  std::vector<std::vector<double>> eval_conf(grid.archs.size());
  parallel_for(grid.archs.size(), options.workers, [&](std::size_t a) {
    const ArchSpec& arch = grid.archs[a].arch;
    require(arch.input_dims() == options.input, "architecture input dims differ from the search input dims");
    const std::uint64_t seed = model_seed(options.seed, arch);
    TrainHyper hyper = options.train;
    hyper.seed = seed;
    models[a] = train(init_model(arch, seed), train_ds, cv_ds, hyper).model;
    eval_conf[a].resize(eval_ds.size());
    for (std::size_t i = 0; i < eval_ds.size(); ++i) eval_conf[a][i] = forward(models[a], eval_ds.row(i));
  });

  // Difference detectors: fit block weights where needed, then profile.
  std::vector<std::optional<DiffDetectorConfig>> detectors(grid.detectors.size());
  std::vector<DetectorProfile> profiles(grid.detectors.size());
  std::vector<std::string> notes(grid.detectors.size());
  parallel_for(grid.detectors.size(), options.workers, [&](std::size_t d) {
    const DetectorCandidate& cand = grid.detectors[d];
    DiffDetectorConfig cfg;
    cfg.mode = cand.mode;
    cfg.metric = cand.metric;
    cfg.grid = cand.metric == DiffMetric::blocked_mse ? cand.grid : 1;
    cfg.t_diff = cand.t_diff;
    cfg.t_skip = cand.t_skip;
    if (cand.mode == CompareMode::reference_image) {
      if (!reference) {
        notes[d] = "no negative training frames for a reference image";
        return;
      }
      cfg.reference_image = reference;
    }
    if (cand.metric == DiffMetric::blocked_mse) {
      try {
        const BlockWeights bw =
            train_detector_weights(cfg, video, labels, split.train, options.logistic, options.max_logistic_examples);
        cfg.weights = bw.weights;
        cfg.bias = bw.bias;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::data) throw;
        notes[d] = e.what();
        return;
      }
    }
    profiles[d] = profile_detector(cfg, video, labels, split.eval);
    detectors[d] = std::move(cfg);
  });

  SearchResult result;
  result.timing = timing;
  result.eval_frames = split.eval.size();
  const std::size_t na = grid.archs.size();
  result.ranking.resize(grid.detectors.size() * na);
  parallel_for(result.ranking.size(), options.workers, [&](std::size_t k) {
    const std::size_t d = k / na, a = k % na;
    RankingEntry& e = result.ranking[k];
    e.detector_pos = d;
    e.arch_pos = a;
    e.detector = grid.detectors[d].name();
    e.arch = grid.archs[a].name;
    if (!detectors[d]) {
      e.available = false;
      e.note = notes[d];
      return;
    }
    const DetectorProfile& prof = profiles[d];
    std::vector<double> conf(prof.size());
    for (std::size_t j = 0; j < prof.size(); ++j) conf[j] = eval_conf[a][prof.frames[j] - split.eval.begin];
    e.outcome = sweep_pair(prof, conf, targets, timing.stage_times(detectors[d]->metric, e.arch),
                           SweepOptions{grid.max_delta_candidates});
  });

  auto rank_key = [&](const RankingEntry& e) {
    const auto [l, c, dd] = arch_key(grid.archs[e.arch_pos].arch);
    return std::make_tuple(!e.available, !e.outcome.feasible, e.outcome.cost, e.outcome.oracle_calls, l, c, dd,
                           e.outcome.delta_diff, e.detector_pos, e.arch_pos);
  };
  std::stable_sort(result.ranking.begin(), result.ranking.end(),
                   [&](const RankingEntry& x, const RankingEntry& y) { return rank_key(x) < rank_key(y); });

  const RankingEntry* chosen = nullptr;
  if (!result.ranking.empty() && result.ranking.front().available && result.ranking.front().outcome.feasible) {
    chosen = &result.ranking.front();
    result.feasible = true;
  } else {
    for (const auto& e : result.ranking) {
      if (!e.available) continue;
      if (!chosen || violation(e.outcome, targets) < violation(chosen->outcome, targets)) chosen = &e;
    }
  }
  if (!chosen) fail(ErrorKind::data, "no detector candidate could be trained on this video");

  DiffDetectorConfig det = *detectors[chosen->detector_pos];
  det.delta_diff = chosen->outcome.delta_diff;
  result.best.detector = std::move(det);
  result.best.model = ModelStage{models[chosen->arch_pos], chosen->outcome.thresholds};
  result.best.oracle = options.oracle;
  result.best.preprocessing = {stats, options.input};
  result.best_detector = chosen->detector;
  result.best_arch = chosen->arch;
  result.expected_cost = chosen->outcome.cost;
  result.sel = chosen->outcome.sel;
  result.fp_rate = chosen->outcome.fp_rate();
  result.fn_rate = chosen->outcome.fn_rate();
  result.oracle_calls = chosen->outcome.oracle_calls;
  return result;
}

}  // namespace vidcascade
