#include "vidcascade/oracle.hpp"

#include <cmath>
#include <thread>

#include "vidcascade/error.hpp"

namespace vidcascade {

void OracleSpec::validate() const {
  require(simulated_latency >= 0.0, "simulated_latency must be >= 0");
  require(t_full > 0.0, "t_full must be > 0");
}

std::string to_string(OracleKind kind) {
  return kind == OracleKind::ground_truth_file ? "ground-truth-file" : "stub-delay";
}

OracleKind oracle_kind_from_string(const std::string& s) {
  if (s == "ground-truth-file") return OracleKind::ground_truth_file;
  if (s == "stub-delay") return OracleKind::stub_delay;
  fail(ErrorKind::validation, "unknown oracle kind '" + s + "'");
}

Oracle::Oracle(LabelTrack labels, double simulated_latency)
    : labels_(std::move(labels)),
      latency_(simulated_latency),
      invocations_(std::make_shared<std::atomic<std::uint64_t>>(0)) {
  require(simulated_latency >= 0.0, "simulated_latency must be >= 0");
}

Oracle Oracle::from_spec(const OracleSpec& spec) {
  spec.validate();
  const double latency = spec.kind == OracleKind::stub_delay ? spec.simulated_latency : 0.0;
  return Oracle(read_labels(spec.label_path), latency);
}

std::uint8_t Oracle::query(std::uint64_t index) const {
  if (index >= labels_.size())
    fail(ErrorKind::data, "reference labels missing for frame " + std::to_string(index));
  invocations_->fetch_add(1);
  if (latency_ > 0.0) std::this_thread::sleep_for(std::chrono::duration<double>(latency_));
  return labels_[index];
}

LabelingResult label_frames(const Oracle& oracle, std::span<const std::uint64_t> indices) {
  LabelingResult r;
  r.labels.reserve(indices.size());
  const auto t0 = std::chrono::steady_clock::now();
  for (std::uint64_t i : indices) r.labels.push_back(oracle.query(i));
  r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.invocation_count = indices.size();
  return r;
}

LabelingResult label_video(const Oracle& oracle, const Video& video) {
  std::vector<std::uint64_t> idx(video.frames.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = video.frames[i].index;
  return label_frames(oracle, idx);
}

Frame build_reference_image(const Video& video, const LabelTrack& labels, FrameRange range) {
  require(range.end <= video.frames.size() && range.end <= labels.size(),
          "reference-image range exceeds video or labels");
  const std::size_t fb = video.meta.frame_bytes();
  std::vector<std::uint64_t> sums(fb, 0);
  std::uint64_t count = 0;
  for (std::uint64_t i = range.begin; i < range.end; ++i) {
    if (labels[i] != kAbsent) continue;
    const auto& px = video.frames[i].pixels;
    for (std::size_t p = 0; p < fb; ++p) sums[p] += px[p];
    ++count;
  }
  if (count == 0)
    fail(ErrorKind::data, "no negative frames for a reference image; use earlier-frame mode");
  Frame ref;
  ref.pixels.resize(fb);
  for (std::size_t p = 0; p < fb; ++p) {
    // Round half up in exact integer arithmetic.
    ref.pixels[p] = static_cast<std::uint8_t>((2 * sums[p] + count) / (2 * count));
  }
  return ref;
}

Frame build_reference_image(const Video& video, const LabelTrack& labels) {
  return build_reference_image(video, labels, FrameRange{0, video.frames.size()});
}

DataSplit split_train_eval(std::uint64_t frame_count, SplitFractions f, std::uint64_t /*seed*/) {
  require(f.train > 0 && f.crossval > 0 && f.eval > 0, "split fractions must be positive");
  require(f.train + f.crossval + f.eval <= 1.0 + 1e-12, "split fractions must sum to <= 1");
  const auto at = [&](double frac) {
    return static_cast<std::uint64_t>(std::floor(frac * double(frame_count) + 1e-9));
  };
  DataSplit s;
  s.train = {0, at(f.train)};
  s.crossval = {s.train.end, at(f.train + f.crossval)};
  s.eval = {s.crossval.end, std::min(frame_count, at(f.train + f.crossval + f.eval))};
  require(s.train.size() > 0 && s.crossval.size() > 0 && s.eval.size() > 0,
          "video too short: every split must be nonempty");
  return s;
}

}  // namespace vidcascade
