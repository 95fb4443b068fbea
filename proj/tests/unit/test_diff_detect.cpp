#include <doctest.h>

#include <cmath>
#include <limits>

#include "testkit.hpp"
#include "vidcascade/diff_detect.hpp"
#include "vidcascade/error.hpp"

using namespace vidcascade;

namespace {

Frame px(std::vector<std::uint8_t> p) { return Frame{std::move(p), 0}; }

DiffDetectorConfig ref_config(const Frame& reference, double delta, std::uint32_t t_skip = 1) {
  DiffDetectorConfig c;
  c.mode = CompareMode::reference_image;
  c.reference_image = reference;
  c.delta_diff = delta;
  c.t_skip = t_skip;
  return c;
}

double logloss(const BlockWeights& bw, const std::vector<std::vector<double>>& f, const LabelTrack& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    double z = bw.bias;
    for (std::size_t j = 0; j < f[i].size(); ++j) z += bw.weights[j] * f[i][j];
    const double p = sigmoid(z);
    s -= y[i] ? std::log(p) : std::log(1.0 - p);
  }
  return s / double(f.size());
}

double train_accuracy(const BlockWeights& bw, const std::vector<std::vector<double>>& f, const LabelTrack& y) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    double z = bw.bias;
    for (std::size_t j = 0; j < f[i].size(); ++j) z += bw.weights[j] * f[i][j];
    ok += (sigmoid(z) > 0.5) == bool(y[i]);
  }
  return double(ok) / double(f.size());
}

}  // namespace

TEST_CASE("mse examples") {
  CHECK(mse(px({0, 0}), px({2, 2})) == 4.0);
  CHECK(mse(px({0, 4}), px({2, 0})) == 10.0);
  CHECK(mse(px({7, 9, 1}), px({7, 9, 1})) == 0.0);
  CHECK_THROWS_AS(mse(px({1, 2}), px({1})), Error);
}

TEST_CASE("mse is symmetric, non-negative and zero only for identical frames") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const Video v = testkit::random_video(rng, 1 + std::uint32_t(rng.below(6)), 1 + std::uint32_t(rng.below(6)), 1, 2);
    Frame a = v.frames[0], b = v.frames[1];
    if (rng.below(4) == 0) b = a;
    const double ab = mse(a, b);
    CHECK(ab == mse(b, a));
    CHECK(ab >= 0.0);
    CHECK((ab == 0.0) == (a.pixels == b.pixels));
  }
}

TEST_CASE("blocked mse examples") {
  const VideoMeta m{4, 4, 1, 30, 1};
  Frame a = testkit::solid_frame(m, 50);
  Frame b = a;
  CHECK(blocked_mse(a, b, m, 2) == std::vector<double>(4, 0.0));
  // Top-right quadrant (block 1) differs by 3.
  for (std::size_t y = 0; y < 2; ++y)
    for (std::size_t x = 2; x < 4; ++x) b.pixels[y * 4 + x] = 53;
  CHECK(blocked_mse(a, b, m, 2) == std::vector<double>{0.0, 9.0, 0.0, 0.0});
  CHECK(blocked_mse(a, b, m, 1)[0] == doctest::Approx(mse(a, b)).epsilon(1e-12));
}

TEST_CASE("remainder pixels join the last block row and column") {
  const VideoMeta m{5, 5, 1, 30, 1};
  Frame a = testkit::solid_frame(m, 0);
  Frame b = a;
  b.pixels[4 * 5 + 4] = 10;  // bottom-right pixel, block 3 of a 2x2 grid (3x3 pixels)
  const auto blocks = blocked_mse(a, b, m, 2);
  CHECK(blocks[3] == doctest::Approx(100.0 / 9.0));
  CHECK(blocks[0] == 0.0);
}

TEST_CASE("blocked mse decomposes the global mse") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const auto w = std::uint32_t(1 + rng.below(12)), h = std::uint32_t(1 + rng.below(12));
    const std::uint32_t c = rng.below(2) ? 3 : 1;
    const Video v = testkit::random_video(rng, w, h, c, 2);
    const auto grid = std::uint32_t(1 + rng.below(std::min(w, h)));
    const auto blocks = blocked_mse(v.frames[0], v.frames[1], v.meta, grid);
    const double global = mse(v.frames[0], v.frames[1]);
    if (grid == 1) CHECK(std::abs(blocks[0] - global) <= 1e-9);
    // Weight each block by its pixel count.
    const std::size_t bw = w / grid, bh = h / grid;
    double acc = 0.0;
    for (std::size_t by = 0; by < grid; ++by)
      for (std::size_t bx = 0; bx < grid; ++bx) {
        const std::size_t cw = bx + 1 == grid ? w - bw * (grid - 1) : bw;
        const std::size_t ch = by + 1 == grid ? h - bh * (grid - 1) : bh;
        acc += blocks[by * grid + bx] * double(cw * ch);
      }
    CHECK(acc / double(w * h) == doctest::Approx(global).epsilon(1e-9));
  }
}

TEST_CASE("logistic fit: one block perfectly predicts the target") {
  Rng rng(2);
  std::vector<std::vector<double>> f;
  LabelTrack y;
  for (int i = 0; i < 200; ++i) {
    const bool pos = i % 3 == 0;
    f.push_back({rng.uniform(0, 50), pos ? rng.uniform(60, 120) : rng.uniform(0, 40), rng.uniform(0, 50)});
    y.push_back(pos);
  }
  const BlockWeights bw = train_block_weights(f, y);
  CHECK(train_accuracy(bw, f, y) == 1.0);
  CHECK(std::abs(bw.weights[1]) > 5 * std::abs(bw.weights[0]));
  CHECK(std::abs(bw.weights[1]) > 5 * std::abs(bw.weights[2]));

  for (auto& row : f) row[1] *= 10.0;
  CHECK(train_accuracy(train_block_weights(f, y), f, y) == 1.0);
}

TEST_CASE("logistic fit: constant features recover the prevalence") {
  std::vector<std::vector<double>> f(100, std::vector<double>{0.0, 0.0});
  LabelTrack y(100, kAbsent);
  for (int i = 0; i < 30; ++i) y[i] = kPresent;
  const BlockWeights bw = train_block_weights(f, y);
  CHECK(bw.weights[0] == 0.0);
  CHECK(bw.weights[1] == 0.0);
  // The loss is minimized at bias = logit(0.3); gradient descent gets close.
  CHECK(bw.bias == doctest::Approx(std::log(0.3 / 0.7)).epsilon(1e-3));
}

TEST_CASE("logistic fit reduces loss versus the prevalence-only model") {
  Rng rng(9);
  std::vector<std::vector<double>> f;
  LabelTrack y;
  for (int i = 0; i < 300; ++i) {
    const bool pos = rng.uniform() < 0.4;
    f.push_back({rng.normal() + (pos ? 1.5 : 0.0), rng.normal()});
    y.push_back(pos);
  }
  const BlockWeights fit = train_block_weights(f, y);
  double prev = 0.0;
  for (auto v : y) prev += v;
  prev /= double(y.size());
  const BlockWeights base{{0.0, 0.0}, std::log(prev / (1 - prev))};
  CHECK(logloss(fit, f, y) < logloss(base, f, y));
}

TEST_CASE("single-class targets are rejected") {
  std::vector<std::vector<double>> f{{1.0}, {2.0}, {3.0}};
  try {
    train_block_weights(f, LabelTrack{1, 1, 1});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::data);
    CHECK(std::string(e.what()).find("global metric") != std::string::npos);
  }
}

TEST_CASE("scores against the anchor") {
  const VideoMeta m{4, 4, 1, 30, 1};
  const Frame f = testkit::solid_frame(m, 30);
  DiffDetectorConfig c = ref_config(f, 0.0);
  CHECK(detector_score(c, f, f, m) == 0.0);

  c.metric = DiffMetric::blocked_mse;
  c.grid = 2;
  c.weights = {0.3, -0.2, 0.1, 0.5};
  c.bias = -1.25;
  CHECK(detector_score(c, f, f, m) == doctest::Approx(sigmoid(-1.25)));

  DetectorState uninit;
  CHECK_THROWS_AS(dd_score(c, uninit, f), Error);
}

TEST_CASE("a frame with an object scores above an empty frame") {
  SynthSpec s;
  s.meta = {32, 32, 1, 30, 3000};
  s.seed = 1;
  const SynthResult r = generate_synthetic(s);
  const Frame ref = build_reference_image(r.video, r.truth);
  const DiffDetectorConfig c = ref_config(ref, 0.0);
  std::size_t pos = 0, neg = 0;
  while (pos < r.truth.size() && !r.truth[pos]) ++pos;
  while (neg < r.truth.size() && r.truth[neg]) ++neg;
  REQUIRE(pos < r.truth.size());
  CHECK(detector_score(c, ref, r.video.frames[pos], r.video.meta) >
        detector_score(c, ref, r.video.frames[neg], r.video.meta));
}

TEST_CASE("dd_step firing, suppression and skipping") {
  const VideoMeta m{2, 2, 1, 30, 1};
  const Frame empty = testkit::solid_frame(m, 0);
  DiffDetectorConfig c = ref_config(empty, 0.0);
  DetectorState st = init_detector_state(c, m);
  CHECK(dd_step(c, st, testkit::solid_frame(m, 1, 0), 0).decision == DdDecision::fired);
  CHECK(dd_step(c, st, testkit::solid_frame(m, 0, 1), 1).decision == DdDecision::suppressed);
  CHECK_THROWS_AS(dd_step(c, st, empty, 1), Error);

  c.delta_diff = std::numeric_limits<double>::infinity();
  st = init_detector_state(c, m);
  for (std::uint64_t i = 0; i < 10; ++i) {
    const DdOutcome o = dd_step(c, st, testkit::solid_frame(m, std::uint8_t(i * 20), i), i);
    CHECK(o.decision == DdDecision::suppressed);
    CHECK(o.label == kAbsent);
  }
}

TEST_CASE("ties suppress; the comparison is strict") {
  const VideoMeta m{1, 1, 1, 30, 1};
  DiffDetectorConfig c = ref_config(Frame{{0}, 0}, 4.0);
  DetectorState st = init_detector_state(c, m);
  CHECK(dd_step(c, st, Frame{{2}, 0}, 0).decision == DdDecision::suppressed);
  CHECK(dd_step(c, st, Frame{{3}, 1}, 1).decision == DdDecision::fired);
}

TEST_CASE("checked count is ceil(N / t_skip)") {
  const VideoMeta m{2, 2, 1, 30, 1};
  for (std::uint32_t t_skip : {1u, 2u, 7u, 15u, 30u}) {
    for (std::uint64_t n : {1ull, 14ull, 15ull, 16ull, 100ull, 451ull}) {
      DiffDetectorConfig c = ref_config(testkit::solid_frame(m, 0), 0.0, t_skip);
      DetectorState st = init_detector_state(c, m);
      std::uint64_t checked = 0;
      for (std::uint64_t i = 0; i < n; ++i)
        checked += dd_step(c, st, testkit::solid_frame(m, 5, i), i).decision != DdDecision::skipped;
      CHECK(checked == (n + t_skip - 1) / t_skip);
      CHECK(plan_checks(c, {0, n}).size() == checked);
    }
  }
}

TEST_CASE("raising delta never turns a suppressed frame into a fired one") {
  Rng rng(12);
  const Video v = testkit::random_video(rng, 3, 3, 1, 60);
  const DiffDetectorConfig base = ref_config(v.frames[0], 0.0);
  std::vector<double> deltas{0.0, 100.0, 1000.0, 3000.0, 6000.0, 20000.0};
  std::vector<bool> prev_fired(60, true);
  for (double d : deltas) {
    DiffDetectorConfig c = base;
    c.delta_diff = d;
    DetectorState st = init_detector_state(c, v.meta);
    for (std::uint64_t i = 0; i < 60; ++i) {
      const bool fired = dd_step(c, st, v.frames[i], i).decision == DdDecision::fired;
      if (fired) CHECK(prev_fired[i]);
      prev_fired[i] = fired;
    }
  }
}

TEST_CASE("earlier-frame anchors follow the lazy t_diff rule") {
  DiffDetectorConfig c;
  c.mode = CompareMode::earlier_frame;
  c.t_diff = 10;
  c.t_skip = 4;
  const auto plan = plan_checks(c, {0, 30});
  // Checks at 0,4,...,28; anchor = latest check at or before i - 10.
  for (const CheckPlan& p : plan) {
    if (p.index < 10) {
      CHECK_FALSE(p.anchor.has_value());
      continue;
    }
    REQUIRE(p.anchor.has_value());
    CHECK(*p.anchor == (p.index - 10) / 4 * 4);
  }

  const VideoMeta m{1, 1, 1, 30, 1};
  c.delta_diff = 0.5;
  DetectorState st = init_detector_state(c, m);
  for (std::uint64_t i = 0; i < 30; ++i) {
    const DdOutcome o = dd_step(c, st, Frame{{std::uint8_t(i)}, i}, i);
    if (i % 4 != 0) {
      CHECK(o.decision == DdDecision::skipped);
      continue;
    }
    if (i < 10) {
      CHECK(o.decision == DdDecision::fired);
      CHECK(std::isinf(o.score));
    } else {
      CHECK(st.anchor_index == (i - 10) / 4 * 4);
      CHECK(o.score == doctest::Approx(double(i - *st.anchor_index) * double(i - *st.anchor_index)));
    }
    if (o.decision == DdDecision::fired) dd_record_label(st, i, std::uint8_t(i % 8 == 0));
  }
}

TEST_CASE("suppressed frames inherit the anchor's emitted label; skipped frames the last emitted one") {
  const VideoMeta m{1, 1, 1, 30, 1};
  DiffDetectorConfig c;
  c.mode = CompareMode::earlier_frame;
  c.t_diff = 1;
  c.t_skip = 2;
  c.delta_diff = 10.0;
  DetectorState st = init_detector_state(c, m);
  // Frame 0 fires (no anchor), the oracle says present.
  CHECK(dd_step(c, st, Frame{{100}, 0}, 0).decision == DdDecision::fired);
  dd_record_label(st, 0, kPresent);
  const DdOutcome skipped = dd_step(c, st, Frame{{0}, 1}, 1);
  CHECK(skipped.decision == DdDecision::skipped);
  CHECK(skipped.label == kPresent);
  const DdOutcome supp = dd_step(c, st, Frame{{101}, 2}, 2);
  CHECK(supp.decision == DdDecision::suppressed);
  CHECK(supp.label == kPresent);
}

TEST_CASE("config validation") {
  DiffDetectorConfig c;
  c.mode = CompareMode::earlier_frame;
  c.metric = DiffMetric::blocked_mse;
  c.grid = 3;
  c.weights = {1.0};
  CHECK_THROWS_AS(c.validate(), Error);
  c.weights.assign(9, 0.0);
  c.validate();
  c.delta_diff = -1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c.delta_diff = 0.0;
  c.mode = CompareMode::reference_image;
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK(compare_mode_from_string(to_string(CompareMode::earlier_frame)) == CompareMode::earlier_frame);
  CHECK(diff_metric_from_string("blocked-mse") == DiffMetric::blocked_mse);
}
