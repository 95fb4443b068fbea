#include <doctest.h>

#include <algorithm>

#include "testkit.hpp"
#include "vidcascade/error.hpp"
#include "vidcascade/oracle.hpp"

using namespace vidcascade;

TEST_CASE("ground-truth oracle reproduces the generator's truth") {
  SynthSpec s;
  s.meta = {16, 16, 1, 30, 5000};
  s.object_size = 4;
  s.seed = 2;
  const SynthResult r = generate_synthetic(s);
  const auto path = testkit::temp_path("oracle_truth.csv");
  write_labels(r.truth, path);
  OracleSpec spec;
  spec.label_path = path;
  const Oracle oracle = Oracle::from_spec(spec);
  const LabelingResult lr = label_video(oracle, r.video);
  CHECK(lr.labels == r.truth);
  CHECK(lr.invocation_count == 5000);
  CHECK(oracle.invocations() == 5000);
}

TEST_CASE("stub oracle sleeps per call") {
  const Oracle oracle(LabelTrack(100, kAbsent), 0.001);
  const Video v = testkit::constant_video(2, 2, 100, 0);
  const LabelingResult lr = label_video(oracle, v);
  CHECK(lr.wall_time >= 0.1);
}

TEST_CASE("querying a subset counts only those calls") {
  const Oracle oracle(LabelTrack{0, 1, 0, 1, 1}, 0.0);
  const std::vector<std::uint64_t> idx{4, 0, 3};
  const LabelingResult lr = label_frames(oracle, idx);
  CHECK(lr.invocation_count == 3);
  CHECK(oracle.invocations() == 3);
  CHECK(lr.labels == LabelTrack{1, 0, 1});
}

TEST_CASE("short label file reports the missing frame") {
  const Oracle oracle(LabelTrack{0, 1}, 0.0);
  CHECK_THROWS_WITH_AS(oracle.query(2), "reference labels missing for frame 2", Error);
}

TEST_CASE("oracle spec bounds") {
  OracleSpec s;
  s.simulated_latency = -1.0;
  CHECK_THROWS_AS(s.validate(), Error);
  s = {};
  s.t_full = 0.0;
  CHECK_THROWS_AS(s.validate(), Error);
  CHECK(oracle_kind_from_string(to_string(OracleKind::stub_delay)) == OracleKind::stub_delay);
  CHECK_THROWS_AS(oracle_kind_from_string("yolo"), Error);
}

TEST_CASE("reference image is the rounded mean of negative frames") {
  Video v = testkit::constant_video(3, 3, 4, 10);
  v.frames[1] = testkit::solid_frame(v.meta, 20, 1);
  v.frames[2] = testkit::solid_frame(v.meta, 200, 2);  // positive, ignored
  v.frames[3] = testkit::solid_frame(v.meta, 20, 3);
  const LabelTrack labels{0, 0, 1, 1};
  CHECK(build_reference_image(v, labels).pixels == std::vector<std::uint8_t>(9, 15));

  const Video same = testkit::constant_video(3, 3, 5, 77);
  CHECK(build_reference_image(same, LabelTrack(5, kAbsent)).pixels == same.frames[0].pixels);

  CHECK_THROWS_AS(build_reference_image(v, LabelTrack(4, kPresent)), Error);
  try {
    build_reference_image(v, LabelTrack(4, kPresent));
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::data);
  }
}

TEST_CASE("reference image matches per-pixel averaging and ignores order") {
  Rng rng(31);
  const Video v = testkit::random_video(rng, 6, 5, 3, 40);
  LabelTrack labels(40);
  for (auto& l : labels) l = std::uint8_t(rng.below(2));
  labels[0] = kAbsent;
  const Frame ref = build_reference_image(v, labels);
  for (std::size_t p = 0; p < ref.pixels.size(); ++p) {
    double sum = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < 40; ++i)
      if (!labels[i]) {
        sum += v.frames[i].pixels[p];
        ++n;
      }
    const double mean = sum / n;
    CHECK(std::abs(double(ref.pixels[p]) - mean) <= 0.5);
  }

  std::vector<std::size_t> perm(40);
  for (std::size_t i = 0; i < 40; ++i) perm[i] = i;
  rng.shuffle(std::span(perm));
  Video shuffled = v;
  LabelTrack shuffled_labels(40);
  for (std::size_t i = 0; i < 40; ++i) {
    shuffled.frames[i] = v.frames[perm[i]];
    shuffled_labels[i] = labels[perm[i]];
  }
  CHECK(build_reference_image(shuffled, shuffled_labels).pixels == ref.pixels);
}

TEST_CASE("contiguous split arithmetic") {
  const DataSplit s = split_train_eval(100, {0.5, 0.1, 0.4}, 1);
  CHECK(s.train == FrameRange{0, 50});
  CHECK(s.crossval == FrameRange{50, 60});
  CHECK(s.eval == FrameRange{60, 100});

  CHECK_THROWS_AS(split_train_eval(100, {0.6, 0.2, 0.4}), Error);
  CHECK_THROWS_AS(split_train_eval(100, {0.5, 0.0, 0.4}), Error);
  CHECK_THROWS_AS(split_train_eval(2, {0.5, 0.1, 0.4}), Error);

  const DataSplit a = split_train_eval(12345, {0.3, 0.1, 0.2}, 9);
  const DataSplit b = split_train_eval(12345, {0.3, 0.1, 0.2}, 9);
  CHECK(a.train == b.train);
  CHECK(a.eval == b.eval);
}

TEST_CASE("splits are disjoint, ordered and in bounds") {
  Rng rng(5);
  int checked = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::uint64_t n = 1 + rng.below(5000);
    const SplitFractions f{rng.uniform(0.01, 0.6), rng.uniform(0.01, 0.3), rng.uniform(0.01, 0.5)};
    if (f.train + f.crossval + f.eval > 1.0) {
      CHECK_THROWS_AS(split_train_eval(n, f), Error);
      continue;
    }
    DataSplit s;
    try {
      s = split_train_eval(n, f);
    } catch (const Error&) {
      continue;  // too short for nonempty splits
    }
    ++checked;
    CHECK(s.train.begin == 0);
    CHECK(s.train.end == s.crossval.begin);
    CHECK(s.crossval.end == s.eval.begin);
    CHECK(s.eval.end <= n);
    CHECK(s.train.size() > 0);
    CHECK(s.crossval.size() > 0);
    CHECK(s.eval.size() > 0);
  }
  CHECK(checked > 100);
}
