#include "vidcascade/diff_detect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vidcascade/error.hpp"

namespace vidcascade {

std::string to_string(CompareMode mode) {
  return mode == CompareMode::reference_image ? "reference-image" : "earlier-frame";
}

std::string to_string(DiffMetric metric) {
  return metric == DiffMetric::global_mse ? "global-mse" : "blocked-mse";
}

CompareMode compare_mode_from_string(const std::string& s) {
  if (s == "reference-image") return CompareMode::reference_image;
  if (s == "earlier-frame") return CompareMode::earlier_frame;
  fail(ErrorKind::validation, "unknown detector mode '" + s + "'");
}

DiffMetric diff_metric_from_string(const std::string& s) {
  if (s == "global-mse") return DiffMetric::global_mse;
  if (s == "blocked-mse") return DiffMetric::blocked_mse;
  fail(ErrorKind::validation, "unknown detector metric '" + s + "'");
}

std::string to_string(DdDecision d) {
  switch (d) {
    case DdDecision::skipped: return "skipped";
    case DdDecision::suppressed: return "suppressed";
    case DdDecision::fired: return "fired";
  }
  return "?";
}

void DiffDetectorConfig::validate() const {
  require(grid >= 1, "grid must be >= 1");
  require(delta_diff >= 0.0, "delta_diff must be >= 0");
  require(t_diff >= 1, "t_diff must be >= 1 frame");
  require(t_skip >= 1, "t_skip must be >= 1 frame");
  if (metric == DiffMetric::blocked_mse)
    require(weights.size() == std::size_t(grid) * grid, "blocked detector needs grid^2 weights");
  if (mode == CompareMode::reference_image)
    require(reference_image.has_value(), "reference-image mode needs a reference image");
}

std::string DiffDetectorConfig::name() const {
  std::string s = mode == CompareMode::reference_image ? "ref" : "prev" + std::to_string(t_diff);
  s += metric == DiffMetric::global_mse ? "/global" : "/blocked" + std::to_string(grid);
  s += "/skip" + std::to_string(t_skip);
  return s;
}

double mse(const Frame& a, const Frame& b) {
  require(a.pixels.size() == b.pixels.size(), "mse: frame dimensions differ");
  if (a.pixels.empty()) return 0.0;
  std::uint64_t acc = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const int d = int(a.pixels[i]) - int(b.pixels[i]);
    acc += std::uint64_t(d * d);
  }
  return double(acc) / double(a.pixels.size());
}

std::vector<double> blocked_mse(const Frame& a, const Frame& b, const VideoMeta& meta,
                                std::uint32_t grid) {
  require(a.pixels.size() == b.pixels.size() && a.pixels.size() == meta.frame_bytes(),
          "blocked_mse: frame dimensions differ");
  require(grid >= 1 && grid <= meta.width && grid <= meta.height, "grid must be in [1, min(w, h)]");
  const std::size_t w = meta.width, ch = meta.channels;
  const std::size_t bw = meta.width / grid, bh = meta.height / grid;
  std::vector<std::uint64_t> acc(std::size_t(grid) * grid, 0);
  std::vector<std::uint64_t> count(acc.size(), 0);
  for (std::size_t y = 0; y < meta.height; ++y) {
    const std::size_t by = std::min<std::size_t>(y / bh, grid - 1);
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t bx = std::min<std::size_t>(x / bw, grid - 1);
      const std::size_t k = by * grid + bx;
      for (std::size_t c = 0; c < ch; ++c) {
        const std::size_t p = (y * w + x) * ch + c;
        const int d = int(a.pixels[p]) - int(b.pixels[p]);
        acc[k] += std::uint64_t(d * d);
      }
      count[k] += ch;
    }
  }
  std::vector<double> out(acc.size());
  for (std::size_t k = 0; k < acc.size(); ++k) out[k] = double(acc[k]) / double(count[k]);
  return out;
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

BlockWeights train_block_weights(const std::vector<std::vector<double>>& features,
                                 const LabelTrack& targets, const LogisticHyper& hyper) {
  require(features.size() == targets.size(), "features and targets differ in length");
  require(features.size() >= 2, "logistic fit needs at least 2 examples");
  const std::size_t n = features.size();
  const std::size_t d = features.front().size();
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n; ++i) {
    require(features[i].size() == d, "ragged feature matrix");
    positives += targets[i] ? 1 : 0;
  }
  if (positives == 0 || positives == n)
    fail(ErrorKind::data, "block-weight targets contain a single class; use the global metric");

  std::vector<double> mu(d, 0.0), sd(d, 0.0);
  for (const auto& f : features)
    for (std::size_t j = 0; j < d; ++j) mu[j] += f[j];
  for (double& m : mu) m /= double(n);
  for (const auto& f : features)
    for (std::size_t j = 0; j < d; ++j) sd[j] += (f[j] - mu[j]) * (f[j] - mu[j]);
  for (double& s : sd) {
    s = std::sqrt(s / double(n));
    if (s < 1e-12) s = 0.0;  // constant column: contributes nothing
  }

  std::vector<std::vector<double>> z(n, std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      z[i][j] = sd[j] > 0.0 ? (features[i][j] - mu[j]) / sd[j] : 0.0;

  std::vector<double> w(d, 0.0), grad(d);
  double b = 0.0;
  for (int it = 0; it < hyper.iterations; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double gb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = b;
      for (std::size_t j = 0; j < d; ++j) s += w[j] * z[i][j];
      const double err = sigmoid(s) - (targets[i] ? 1.0 : 0.0);
      for (std::size_t j = 0; j < d; ++j) grad[j] += err * z[i][j];
      gb += err;
    }
    for (std::size_t j = 0; j < d; ++j)
      w[j] -= hyper.learning_rate * (grad[j] / double(n) + hyper.l2 * w[j]);
    b -= hyper.learning_rate * gb / double(n);
  }

  BlockWeights out;
  out.weights.resize(d);
  out.bias = b;
  for (std::size_t j = 0; j < d; ++j) {
    out.weights[j] = sd[j] > 0.0 ? w[j] / sd[j] : 0.0;
    out.bias -= out.weights[j] * mu[j];
  }
  return out;
}

double detector_score(const DiffDetectorConfig& config, const Frame& anchor, const Frame& frame,
                      const VideoMeta& meta) {
  if (config.metric == DiffMetric::global_mse) return mse(frame, anchor);
  const auto blocks = blocked_mse(frame, anchor, meta, config.grid);
  require(blocks.size() == config.weights.size(), "block weight count does not match grid");
  double s = config.bias;
  for (std::size_t k = 0; k < blocks.size(); ++k) s += config.weights[k] * blocks[k];
  return sigmoid(s);
}

DetectorState init_detector_state(const DiffDetectorConfig& config, const VideoMeta& meta) {
  config.validate();
  DetectorState st;
  st.initialized = true;
  st.meta = meta;
  if (config.mode == CompareMode::reference_image) {
    require(config.reference_image->pixels.size() == meta.frame_bytes(),
            "reference image does not match video dimensions");
    st.anchor_frame = *config.reference_image;
    st.anchor_label = kAbsent;
  }
  return st;
}

double dd_score(const DiffDetectorConfig& config, const DetectorState& state, const Frame& frame) {
  if (!state.initialized || !state.anchor_frame)
    fail(ErrorKind::state, "detector state has no anchor frame");
  return detector_score(config, *state.anchor_frame, frame, state.meta);
}

DdOutcome dd_step(const DiffDetectorConfig& config, DetectorState& state, const Frame& frame,
                  std::uint64_t index, std::optional<double> precomputed_score) {
  if (!state.initialized) fail(ErrorKind::state, "detector state not initialized");
  if (state.last_index && index <= *state.last_index)
    fail(ErrorKind::validation, "frames out of order: " + std::to_string(index) + " after " +
                                    std::to_string(*state.last_index));
  state.last_index = index;

  if (state.last_check_index && index - *state.last_check_index < config.t_skip)
    return {DdDecision::skipped, 0.0, state.carried_label};
  state.last_check_index = index;

  if (config.mode == CompareMode::earlier_frame) {
    // Lazily advance to the most recent checked frame at least t_diff back.
    auto& h = state.history;
    while (h.size() >= 2 && h[1].index + config.t_diff <= index) h.pop_front();
    if (!h.empty() && h.front().index + config.t_diff <= index) {
      if (state.anchor_index != h.front().index) {
        state.anchor_frame = h.front().frame;
        state.anchor_index = h.front().index;
      }
      state.anchor_label = h.front().label;
    } else {
      state.anchor_frame.reset();
      state.anchor_index.reset();
    }
  }

  DdOutcome out;
  if (!state.anchor_frame) {
    out = {DdDecision::fired, std::numeric_limits<double>::infinity(), kAbsent};
  } else {
    out.score = precomputed_score ? *precomputed_score : dd_score(config, state, frame);
    if (out.score > config.delta_diff) {
      out.decision = DdDecision::fired;
    } else {
      out.decision = DdDecision::suppressed;
      out.label = state.anchor_label;
      state.carried_label = state.anchor_label;
    }
  }
  if (config.mode == CompareMode::earlier_frame)
    state.history.push_back({index, frame, out.decision == DdDecision::suppressed ? out.label : kAbsent});
  return out;
}

void dd_record_label(DetectorState& state, std::uint64_t index, std::uint8_t label) {
  state.carried_label = label;
  if (!state.history.empty() && state.history.back().index == index) state.history.back().label = label;
}

std::vector<CheckPlan> plan_checks(const DiffDetectorConfig& config, FrameRange range) {
  require(config.t_skip >= 1 && config.t_diff >= 1, "t_skip and t_diff must be >= 1");
  std::vector<CheckPlan> plan;
  plan.reserve(range.size() / config.t_skip + 1);
  std::size_t anchor_pos = 0;  // into plan; advanced monotonically
  for (std::uint64_t i = range.begin; i < range.end; i += config.t_skip) {
    CheckPlan p{i, std::nullopt};
    if (config.mode == CompareMode::earlier_frame) {
      while (anchor_pos + 1 < plan.size() && plan[anchor_pos + 1].index + config.t_diff <= i)
        ++anchor_pos;
      if (!plan.empty() && plan[anchor_pos].index + config.t_diff <= i) p.anchor = plan[anchor_pos].index;
    }
    plan.push_back(p);
  }
  return plan;
}

}  // namespace vidcascade
