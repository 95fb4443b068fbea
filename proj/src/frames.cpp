#include "vidcascade/frames.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "vidcascade/error.hpp"
#include "vidcascade/io_util.hpp"
#include "vidcascade/rng.hpp"

namespace vidcascade {

namespace {

constexpr char kMagic[4] = {'N', 'S', 'C', 'V'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 4 + 6 * 4;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[at + i]) << (8 * i);
  return v;
}

struct Sprite {
  std::uint64_t start;
  std::uint64_t end;
  double x0, y0, vx, vy;
};

// Position after `dt` frames of constant velocity, bouncing inside [0, span].
double bounce(double p0, double v, double dt, double span) {
  double p = std::fmod(p0 + v * dt, 2.0 * span);
  if (p < 0) p += 2.0 * span;
  return p > span ? 2.0 * span - p : p;
}

}  // namespace

void VideoMeta::validate() const {
  require(width >= 1, "width must be >= 1");
  require(height >= 1, "height must be >= 1");
  require(channels == 1 || channels == 3, "channels must be 1 or 3");
  require(fps >= 1, "fps must be >= 1");
}

void SynthSpec::validate() const {
  meta.validate();
  require(object_size >= 1, "object_size must be >= 1");
  require(object_size < std::min(meta.width, meta.height),
          "object_size must be < min(width, height)");
  require(object_intensity >= 0 && object_intensity <= 255, "object_intensity must be in [0, 255]");
  require(background_level >= 0 && background_level <= 255, "background_level must be in [0, 255]");
  require(noise_sigma >= 0.0, "noise_sigma must be >= 0");
  require(appearance_rate >= 0.0, "appearance_rate must be >= 0");
  require(dwell_frames >= 1.0, "dwell_frames must be >= 1");
  require(label_flip_rate >= 0.0 && label_flip_rate <= 1.0, "label_flip_rate must be in [0, 1]");
}

std::string to_string(BackgroundKind kind) {
  return kind == BackgroundKind::static_scene ? "static" : "drifting-noise";
}

BackgroundKind background_kind_from_string(const std::string& s) {
  if (s == "static") return BackgroundKind::static_scene;
  if (s == "drifting-noise") return BackgroundKind::drifting_noise;
  fail(ErrorKind::validation, "unknown background_kind '" + s + "'");
}

SynthResult generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  const VideoMeta& m = spec.meta;
  const std::size_t w = m.width, h = m.height, ch = m.channels;
  const std::uint64_t n = m.frame_count;

  Rng event_rng(spec.seed * 4 + 1);
  Rng noise_rng(spec.seed * 4 + 2);
  Rng flip_rng(spec.seed * 4 + 3);

  // Mild fixed texture so the scene is not a flat field.
  std::vector<double> base(w * h * ch);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < ch; ++c)
        base[(y * w + x) * ch + c] = spec.background_level +
                                     6.0 * std::sin(0.45 * double(x) + 0.9 * double(c)) *
                                         std::cos(0.3 * double(y));

  std::vector<Sprite> sprites;
  if (spec.appearance_rate > 0.0) {
    const double mean_gap = 60.0 * m.fps / spec.appearance_rate;
    const double span_x = double(w - spec.object_size);
    const double span_y = double(h - spec.object_size);
    double t = event_rng.exponential(mean_gap);
    while (t < double(n)) {
      Sprite s{};
      s.start = static_cast<std::uint64_t>(t);
      const double dwell = std::max(1.0, std::round(event_rng.exponential(spec.dwell_frames)));
      s.end = s.start + static_cast<std::uint64_t>(dwell);
      s.x0 = event_rng.uniform(0.0, span_x);
      s.y0 = event_rng.uniform(0.0, span_y);
      s.vx = event_rng.uniform(-0.05, 0.05);
      s.vy = event_rng.uniform(-0.05, 0.05);
      sprites.push_back(s);
      t += event_rng.exponential(mean_gap);
    }
  }

  SynthResult out;
  out.video.meta = m;
  out.video.frames.reserve(n);
  out.truth.assign(n, kAbsent);

  const double drift_period = 120.0 * m.fps;
  std::vector<double> canvas(base.size());
  std::size_t first_live = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    canvas = base;
    if (spec.background_kind == BackgroundKind::drifting_noise) {
      const double offset = 8.0 * std::sin(2.0 * 3.14159265358979323846 * double(i) / drift_period);
      for (double& v : canvas) v += offset;
    }
    while (first_live < sprites.size() && sprites[first_live].end <= i) ++first_live;
    for (std::size_t k = first_live; k < sprites.size() && sprites[k].start <= i; ++k) {
      const Sprite& s = sprites[k];
      if (s.end <= i) continue;
      const double dt = double(i - s.start);
      const auto px = static_cast<std::size_t>(
          std::lround(bounce(s.x0, s.vx, dt, double(w - spec.object_size))));
      const auto py = static_cast<std::size_t>(
          std::lround(bounce(s.y0, s.vy, dt, double(h - spec.object_size))));
      for (std::size_t y = py; y < py + spec.object_size; ++y)
        for (std::size_t x = px; x < px + spec.object_size; ++x)
          for (std::size_t c = 0; c < ch; ++c) canvas[(y * w + x) * ch + c] = spec.object_intensity;
      out.truth[i] = kPresent;
    }

    Frame f;
    f.index = i;
    f.pixels.resize(canvas.size());
    for (std::size_t p = 0; p < canvas.size(); ++p) {
      double v = canvas[p];
      if (spec.noise_sigma > 0.0) v += spec.noise_sigma * noise_rng.normal();
      f.pixels[p] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
    out.video.frames.push_back(std::move(f));
  }

  if (spec.label_flip_rate > 0.0) {
    for (auto& l : out.truth)
      if (flip_rng.uniform() < spec.label_flip_rate) l = l ? kAbsent : kPresent;
  }
  return out;
}

std::vector<std::uint8_t> encode_video(const Video& video) {
  video.meta.validate();
  const std::size_t fb = video.meta.frame_bytes();
  if (video.frames.size() != video.meta.frame_count)
    throw ParseError(ParseErrorKind::dimension_mismatch,
                     "dimension mismatch: meta declares " + std::to_string(video.meta.frame_count) +
                         " frames but video holds " + std::to_string(video.frames.size()));
  if (video.meta.frame_count > 0xffffffffULL)
    fail(ErrorKind::validation, "frame_count does not fit the container's 32-bit field");
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + fb * video.frames.size());
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32(out, kVersion);
  put_u32(out, video.meta.width);
  put_u32(out, video.meta.height);
  put_u32(out, video.meta.channels);
  put_u32(out, video.meta.fps);
  put_u32(out, static_cast<std::uint32_t>(video.meta.frame_count));
  for (const Frame& f : video.frames) {
    if (f.pixels.size() != fb)
      throw ParseError(ParseErrorKind::dimension_mismatch,
                       "dimension mismatch: frame " + std::to_string(f.index) + " has " +
                           std::to_string(f.pixels.size()) + " bytes, expected " +
                           std::to_string(fb));
    out.insert(out.end(), f.pixels.begin(), f.pixels.end());
  }
  return out;
}

Video decode_video(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw ParseError(ParseErrorKind::truncated, "truncated: file shorter than magic");
  if (!std::equal(kMagic, kMagic + 4, bytes.begin()))
    throw ParseError(ParseErrorKind::bad_magic, "bad magic");
  if (bytes.size() < kHeaderBytes)
    throw ParseError(ParseErrorKind::truncated, "truncated: incomplete header");
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kVersion)
    throw ParseError(ParseErrorKind::bad_version, "unsupported version " + std::to_string(version));
  Video v;
  v.meta.width = get_u32(bytes, 8);
  v.meta.height = get_u32(bytes, 12);
  v.meta.channels = get_u32(bytes, 16);
  v.meta.fps = get_u32(bytes, 20);
  v.meta.frame_count = get_u32(bytes, 24);
  try {
    v.meta.validate();
  } catch (const Error& e) {
    throw ParseError(ParseErrorKind::dimension_mismatch, std::string("dimension mismatch: ") + e.what());
  }
  const std::size_t fb = v.meta.frame_bytes();
  const std::size_t payload = bytes.size() - kHeaderBytes;
  const std::size_t expected = fb * v.meta.frame_count;
  if (payload < expected)
    throw ParseError(ParseErrorKind::truncated,
                     "truncated: header declares " + std::to_string(v.meta.frame_count) +
                         " frames, payload holds " + std::to_string(payload / fb));
  if (payload > expected)
    throw ParseError(ParseErrorKind::dimension_mismatch,
                     "dimension mismatch: " + std::to_string(payload - expected) +
                         " trailing bytes after declared frames");
  v.frames.resize(v.meta.frame_count);
  for (std::size_t i = 0; i < v.frames.size(); ++i) {
    const auto first = bytes.begin() + static_cast<std::ptrdiff_t>(kHeaderBytes + i * fb);
    v.frames[i].pixels.assign(first, first + static_cast<std::ptrdiff_t>(fb));
    v.frames[i].index = i;
  }
  return v;
}

void write_video(const Video& video, const std::filesystem::path& path) {
  write_file_bytes(path, encode_video(video));
}

Video read_video(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return decode_video(bytes);
}

std::string encode_labels(const LabelTrack& labels, std::uint64_t first_index) {
  std::string out = "frame_index,label\n";
  out.reserve(out.size() + labels.size() * 8);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out += std::to_string(first_index + i);
    out += labels[i] ? ",1\n" : ",0\n";
  }
  return out;
}

LabelRows decode_label_rows(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  auto strip = [](std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
  };
  if (!std::getline(in, line)) throw ParseError(ParseErrorKind::bad_csv, "label file is empty");
  strip(line);
  if (line != "frame_index,label")
    throw ParseError(ParseErrorKind::bad_csv, "label file header must be 'frame_index,label'");
  LabelRows rows;
  std::size_t line_no = 1;
  bool first = true;
  std::uint64_t expected = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip(line);
    if (line.empty()) continue;
    const auto comma = line.find(',');
    std::uint64_t idx = 0;
    const bool ok_idx = comma != std::string::npos &&
                        std::from_chars(line.data(), line.data() + comma, idx).ec == std::errc{};
    const std::string value = comma == std::string::npos ? "" : line.substr(comma + 1);
    if (!ok_idx || (value != "0" && value != "1"))
      throw ParseError(ParseErrorKind::bad_csv, "malformed label row at line " + std::to_string(line_no));
    if (first) {
      rows.first_index = idx;
      expected = idx;
      first = false;
    }
    if (idx < expected)
      throw ParseError(ParseErrorKind::bad_csv,
                       "frame indices must be strictly increasing (line " + std::to_string(line_no) + ")");
    if (idx > expected)
      throw ParseError(ParseErrorKind::bad_csv, "missing label for frame " + std::to_string(expected));
    rows.labels.push_back(value == "1" ? kPresent : kAbsent);
    ++expected;
  }
  return rows;
}

void write_labels(const LabelTrack& labels, const std::filesystem::path& path, std::uint64_t first_index) {
  write_text_file(path, encode_labels(labels, first_index));
}

LabelRows read_label_rows(const std::filesystem::path& path) {
  return decode_label_rows(read_text_file(path));
}

LabelTrack read_labels(const std::filesystem::path& path) {
  LabelRows rows = read_label_rows(path);
  if (rows.first_index != 0 && !rows.labels.empty())
    throw ParseError(ParseErrorKind::bad_csv, "missing label for frame 0 in '" + path.string() + "'");
  return std::move(rows.labels);
}

ChannelStats compute_channel_means(const Video& video, std::span<const std::uint64_t> indices) {
  require(!indices.empty(), "channel means need a nonempty frame subset");
  const std::size_t ch = video.meta.channels;
  std::vector<std::uint64_t> sums(ch, 0);
  std::uint64_t per_channel = 0;
  for (std::uint64_t i : indices) {
    require(i < video.frames.size(), "frame index out of range");
    const auto& px = video.frames[i].pixels;
    for (std::size_t p = 0; p < px.size(); ++p) sums[p % ch] += px[p];
    per_channel += px.size() / ch;
  }
  ChannelStats stats;
  for (std::size_t c = 0; c < ch; ++c) stats.mean.push_back(double(sums[c]) / double(per_channel));
  return stats;
}

ChannelStats compute_channel_means(const Video& video, FrameRange range) {
  std::vector<std::uint64_t> idx;
  for (std::uint64_t i = range.begin; i < range.end; ++i) idx.push_back(i);
  return compute_channel_means(video, idx);
}

namespace {

struct Tap {
  std::size_t src;
  double weight;
};

// For each output cell, the source cells it overlaps and the overlap fraction
// (weights per output cell sum to 1).
std::vector<std::vector<Tap>> area_taps(std::size_t src, std::size_t dst) {
  std::vector<std::vector<Tap>> taps(dst);
  const double scale = double(src) / double(dst);
  for (std::size_t o = 0; o < dst; ++o) {
    const double lo = double(o) * scale;
    const double hi = double(o + 1) * scale;
    for (auto s = static_cast<std::size_t>(std::floor(lo)); s < src && double(s) < hi; ++s) {
      const double overlap = std::min(hi, double(s + 1)) - std::max(lo, double(s));
      if (overlap > 0) taps[o].push_back({s, overlap / scale});
    }
  }
  return taps;
}

}  // namespace

std::vector<double> downsample(std::span<const std::uint8_t> pixels, const VideoMeta& meta,
                               InputDims target) {
  require(target.width >= 1 && target.height >= 1, "target dims must be positive");
  require(target.width <= meta.width && target.height <= meta.height,
          "target dims larger than source (upsampling unsupported)");
  require(pixels.size() == meta.frame_bytes(), "frame size does not match video dimensions");
  const std::size_t ch = meta.channels;
  std::vector<double> out(std::size_t(target.width) * target.height * ch);
  if (target.width == meta.width && target.height == meta.height) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = pixels[i];
    return out;
  }
  const auto tx = area_taps(meta.width, target.width);
  const auto ty = area_taps(meta.height, target.height);
  for (std::size_t oy = 0; oy < target.height; ++oy)
    for (std::size_t ox = 0; ox < target.width; ++ox)
      for (std::size_t c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (const Tap& a : ty[oy])
          for (const Tap& b : tx[ox])
            acc += a.weight * b.weight * pixels[(a.src * meta.width + b.src) * ch + c];
        out[(oy * target.width + ox) * ch + c] = acc;
      }
  return out;
}

NormalizedFrame preprocess(const Frame& frame, const VideoMeta& meta, const ChannelStats& stats,
                           InputDims target) {
  require(stats.mean.size() == meta.channels, "channel stats do not match video channels");
  NormalizedFrame out{downsample(frame.pixels, meta, target)};
  const std::size_t ch = meta.channels;
  for (std::size_t i = 0; i < out.values.size(); ++i)
    out.values[i] = std::clamp((out.values[i] - stats.mean[i % ch]) / 127.5, -1.0, 1.0);
  return out;
}

}  // namespace vidcascade
