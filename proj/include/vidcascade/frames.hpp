#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace vidcascade {

struct VideoMeta {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t channels = 1;
  std::uint32_t fps = 30;
  std::uint64_t frame_count = 0;

  void validate() const;
  std::size_t frame_bytes() const {
    return static_cast<std::size_t>(width) * height * channels;
  }
  bool operator==(const VideoMeta&) const = default;
};

/// Row-major, channel-interleaved 8-bit pixels.
struct Frame {
  std::vector<std::uint8_t> pixels;
  std::uint64_t index = 0;

  bool operator==(const Frame&) const = default;
};

struct Video {
  VideoMeta meta;
  std::vector<Frame> frames;

  std::size_t size() const { return frames.size(); }
  const Frame& operator[](std::size_t i) const { return frames[i]; }
  bool operator==(const Video&) const = default;
};

/// Half-open frame range [begin, end).
struct FrameRange {
  std::uint64_t begin = 0;
  std::uint64_t end = 0;

  std::uint64_t size() const { return end - begin; }
  bool contains(std::uint64_t i) const { return i >= begin && i < end; }
  bool operator==(const FrameRange&) const = default;
};

// Per-frame binary labels; 1 = object present.
using LabelTrack = std::vector<std::uint8_t>;
inline constexpr std::uint8_t kAbsent = 0;
inline constexpr std::uint8_t kPresent = 1;

struct InputDims {
  std::uint32_t width = 32;
  std::uint32_t height = 32;
  bool operator==(const InputDims&) const = default;
};

struct ChannelStats {
  std::vector<double> mean;
};

struct NormalizedFrame {
  std::vector<double> values;
};

enum class BackgroundKind { static_scene, drifting_noise };

struct SynthSpec {
  VideoMeta meta;
  BackgroundKind background_kind = BackgroundKind::static_scene;
  std::uint32_t object_size = 8;
  int object_intensity = 220;
  int background_level = 60;
  double appearance_rate = 2.0;  // events per minute
  double dwell_frames = 150.0;
  double noise_sigma = 4.0;
  double label_flip_rate = 0.0;  // injected reference flicker
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthResult {
  Video video;
  LabelTrack truth;
};

SynthResult generate_synthetic(const SynthSpec& spec);

void write_video(const Video& video, const std::filesystem::path& path);
Video read_video(const std::filesystem::path& path);

// In-memory encoding of the container format; the file functions wrap these.
std::vector<std::uint8_t> encode_video(const Video& video);
Video decode_video(std::span<const std::uint8_t> bytes);

/// Labels for a contiguous run of frames starting at `first_index`.
struct LabelRows {
  std::uint64_t first_index = 0;
  LabelTrack labels;
};

void write_labels(const LabelTrack& labels, const std::filesystem::path& path,
                  std::uint64_t first_index = 0);
std::string encode_labels(const LabelTrack& labels, std::uint64_t first_index = 0);
LabelRows decode_label_rows(const std::string& text);
LabelRows read_label_rows(const std::filesystem::path& path);
/// Reads a label file that must cover frames 0..n-1.
LabelTrack read_labels(const std::filesystem::path& path);

ChannelStats compute_channel_means(const Video& video, std::span<const std::uint64_t> indices);
ChannelStats compute_channel_means(const Video& video, FrameRange range);

/// Area-averages the frame down to `target` and maps each channel to
/// [-1, 1] around the supplied means.
NormalizedFrame preprocess(const Frame& frame, const VideoMeta& meta, const ChannelStats& stats,
                           InputDims target);

/// Area-averaging resize; exposed for tests and the reference image path.
std::vector<double> downsample(std::span<const std::uint8_t> pixels, const VideoMeta& meta,
                               InputDims target);

std::string to_string(BackgroundKind kind);
BackgroundKind background_kind_from_string(const std::string& s);

}  // namespace vidcascade
