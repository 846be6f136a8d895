#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pipeflow/error.hpp"

namespace pipeflow {

// Dimensions above this are rejected everywhere to bound memory use.
inline constexpr int kMaxDimension = 8192;

/// 8-bit raster, 1 (gray) or 3 (RGB) interleaved channels, row-major.
struct Frame {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::size_t index = 0;  // position in the source video
  std::vector<std::uint8_t> data;

  std::uint8_t at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  bool same_shape(const Frame& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

inline void validate_frame(const Frame& f) {
  if (f.width <= 0 || f.height <= 0)
    throw Error(Errc::DimensionMismatch, "frame dimensions must be positive");
  if (f.width > kMaxDimension || f.height > kMaxDimension)
    throw Error(Errc::DimensionMismatch, "frame exceeds maximum supported dimension 8192");
  if (f.channels != 1 && f.channels != 3)
    throw Error(Errc::ChannelError, "frame must have 1 or 3 channels, got " +
                                        std::to_string(f.channels));
  const std::size_t want = static_cast<std::size_t>(f.width) * f.height * f.channels;
  if (f.data.size() != want)
    throw Error(Errc::DimensionMismatch,
                "frame data size " + std::to_string(f.data.size()) + " != " +
                    std::to_string(want));
}

inline Frame make_frame(int width, int height, int channels, std::size_t index,
                        std::vector<std::uint8_t> data) {
  Frame f{width, height, channels, index, std::move(data)};
  validate_frame(f);
  return f;
}

inline Frame make_constant_frame(int width, int height, int channels, std::uint8_t value,
                                 std::size_t index = 0) {
  return make_frame(width, height, channels, index,
                    std::vector<std::uint8_t>(
                        static_cast<std::size_t>(width) * height * channels, value));
}

/// Luminance raster kept at full precision; quantize only for storage.
struct GrayFrame {
  int width = 0;
  int height = 0;
  std::vector<float> data;  // width*height luma samples

  float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  float& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  bool same_shape(const GrayFrame& o) const { return width == o.width && height == o.height; }
};

/// Dense per-pixel displacement, in pixels. u is horizontal, v vertical.
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<float> u;
  std::vector<float> v;

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  float u_at(int x, int y) const { return u[static_cast<std::size_t>(y) * width + x]; }
  float v_at(int x, int y) const { return v[static_cast<std::size_t>(y) * width + x]; }
};

inline FlowField make_zero_flow(int width, int height) {
  FlowField f;
  f.width = width;
  f.height = height;
  f.u.assign(static_cast<std::size_t>(width) * height, 0.0f);
  f.v.assign(static_cast<std::size_t>(width) * height, 0.0f);
  return f;
}

inline void validate_flow(const FlowField& f) {
  const std::size_t n = f.pixel_count();
  if (f.u.size() != n || f.v.size() != n)
    throw Error(Errc::DimensionMismatch, "flow planes do not match dimensions");
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(f.u[i]) || !std::isfinite(f.v[i]))
      throw Error(Errc::DecodeError, "flow field contains non-finite entries");
}

/// Anything that can hand out frames by index. Implementations must be safe
/// to call from multiple threads; returned frames are independent copies.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual std::size_t frame_count() const = 0;
  virtual Frame frame(std::size_t index) const = 0;
};

class MemoryFrameSource final : public FrameSource {
 public:
  explicit MemoryFrameSource(std::vector<Frame> frames) : frames_(std::move(frames)) {
    for (std::size_t i = 0; i < frames_.size(); ++i) frames_[i].index = i;
  }

  std::size_t frame_count() const override { return frames_.size(); }
  Frame frame(std::size_t index) const override {
    if (index >= frames_.size())
      throw Error(Errc::CorruptSequence, "frame index out of range");
    return frames_[index];
  }
  const std::vector<Frame>& frames() const { return frames_; }

 private:
  std::vector<Frame> frames_;
};

}  // namespace pipeflow
