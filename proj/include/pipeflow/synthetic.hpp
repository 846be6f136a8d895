#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pipeflow/error.hpp"
#include "pipeflow/frame.hpp"
#include "pipeflow/util.hpp"

namespace pipeflow {

// ---------------------------------------------------------------------------
// Deterministic test imagery: multi-octave value noise and simple motions.
// Everything here depends only on the seed, never on library RNG internals.
// ---------------------------------------------------------------------------

namespace detail {

/// One octave: a coarse random grid sampled bilinearly, cell pixels per knot.
inline std::vector<double> noise_octave(int width, int height, int cell, Rng& rng) {
  const int gw = width / cell + 2;
  const int gh = height / cell + 2;
  std::vector<double> grid(static_cast<std::size_t>(gw) * gh);
  for (double& g : grid) g = static_cast<double>(rng.byte());
  std::vector<double> out(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    const double gy = static_cast<double>(y) / cell;
    const int y0 = static_cast<int>(gy);
    const double fy = gy - y0;
    for (int x = 0; x < width; ++x) {
      const double gx = static_cast<double>(x) / cell;
      const int x0 = static_cast<int>(gx);
      const double fx = gx - x0;
      const double a = grid[static_cast<std::size_t>(y0) * gw + x0];
      const double b = grid[static_cast<std::size_t>(y0) * gw + x0 + 1];
      const double c = grid[static_cast<std::size_t>(y0 + 1) * gw + x0];
      const double d = grid[static_cast<std::size_t>(y0 + 1) * gw + x0 + 1];
      out[static_cast<std::size_t>(y) * width + x] =
          (a * (1 - fx) + b * fx) * (1 - fy) + (c * (1 - fx) + d * fx) * fy;
    }
  }
  return out;
}

}  // namespace detail

/// Textured random frame with structure at several scales, stretched to the
/// full 8-bit range so gradients are informative everywhere.
inline Frame make_texture(int width, int height, int channels, Rng& rng) {
  if (channels != 1 && channels != 3) throw Error(Errc::ChannelError, "texture channels");
  Frame f;
  f.width = width;
  f.height = height;
  f.channels = channels;
  f.data.resize(static_cast<std::size_t>(width) * height * channels);
  for (int c = 0; c < channels; ++c) {
    const auto coarse = detail::noise_octave(width, height, 8, rng);
    const auto mid = detail::noise_octave(width, height, 4, rng);
    const auto fine = detail::noise_octave(width, height, 2, rng);
    std::vector<double> mix(coarse.size());
    double lo = 1e9, hi = -1e9;
    for (std::size_t i = 0; i < mix.size(); ++i) {
      mix[i] = 0.5 * coarse[i] + 0.3 * mid[i] + 0.2 * fine[i];
      lo = std::min(lo, mix[i]);
      hi = std::max(hi, mix[i]);
    }
    const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
    for (std::size_t i = 0; i < mix.size(); ++i)
      f.data[i * channels + static_cast<std::size_t>(c)] =
          static_cast<std::uint8_t>(std::clamp(std::floor((mix[i] - lo) * scale + 0.5),
                                               0.0, 255.0));
  }
  validate_frame(f);
  return f;
}

/// Content moves by (dx, dy); pixels wrap around the frame edges.
inline Frame shift_wrap(const Frame& src, int dx, int dy) {
  Frame out = src;
  const auto mod = [](int a, int m) { return ((a % m) + m) % m; };
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x)
      for (int c = 0; c < src.channels; ++c)
        out.at(x, y, c) = src.at(mod(x - dx, src.width), mod(y - dy, src.height), c);
  return out;
}

/// Content moves by (dx, dy); uncovered edges replicate the source border.
inline Frame shift_replicate(const Frame& src, int dx, int dy) {
  Frame out = src;
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x)
      for (int c = 0; c < src.channels; ++c)
        out.at(x, y, c) = src.at(std::clamp(x - dx, 0, src.width - 1),
                                 std::clamp(y - dy, 0, src.height - 1), c);
  return out;
}

inline GrayFrame shift_replicate(const GrayFrame& src, int dx, int dy) {
  GrayFrame out = src;
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x)
      out.at(x, y) = src.at(std::clamp(x - dx, 0, src.width - 1),
                            std::clamp(y - dy, 0, src.height - 1));
  return out;
}

/// Uniformly darkens a frame by the given factor in [0, 1].
inline Frame scale_brightness(const Frame& src, double factor) {
  Frame out = src;
  for (std::size_t i = 0; i < src.data.size(); ++i)
    out.data[i] = static_cast<std::uint8_t>(
        std::clamp(std::floor(src.data[i] * factor + 0.5), 0.0, 255.0));
  return out;
}

// ---------------------------------------------------------------------------
// Clips
// ---------------------------------------------------------------------------

enum class ClipKind {
  Static,            // identical frames: everything skippable
  Moving,            // steady 2-3 px/frame translation: everything kept
  Alternating,       // black/white flicker: SSIM trips on every transition
  StaticThenMoving,  // half static, half moving: one long skipped run
  Drift,             // slow translation plus brightness decay: kept + drifting stats
};

inline const char* clip_kind_name(ClipKind k) {
  switch (k) {
    case ClipKind::Static: return "static";
    case ClipKind::Moving: return "moving";
    case ClipKind::Alternating: return "alternating";
    case ClipKind::StaticThenMoving: return "static-then-moving";
    default: return "drift";
  }
}

inline ClipKind parse_clip_kind(const std::string& s) {
  if (s == "static") return ClipKind::Static;
  if (s == "moving") return ClipKind::Moving;
  if (s == "alternating") return ClipKind::Alternating;
  if (s == "static-then-moving") return ClipKind::StaticThenMoving;
  if (s == "drift") return ClipKind::Drift;
  throw Error(Errc::BadConfig, "unknown clip kind: " + s);
}

inline std::vector<Frame> make_clip(ClipKind kind, int frames, int width, int height,
                                    std::uint64_t seed) {
  if (frames < 2) throw Error(Errc::BadConfig, "clip needs at least 2 frames");
  if (width < 2 || height < 2 || width > kMaxDimension || height > kMaxDimension)
    throw Error(Errc::BadConfig, "clip dimensions out of range");
  Rng rng(seed);
  const Frame base = make_texture(width, height, 3, rng);
  std::vector<Frame> clip;
  clip.reserve(static_cast<std::size_t>(frames));
  for (int t = 0; t < frames; ++t) {
    Frame f;
    switch (kind) {
      case ClipKind::Static:
        f = base;
        break;
      case ClipKind::Moving:
        f = shift_wrap(base, 2 * t, t);
        break;
      case ClipKind::Alternating:
        f = make_constant_frame(width, height, 3, t % 2 == 0 ? 0 : 255);
        break;
      case ClipKind::StaticThenMoving: {
        const int half = frames / 2;
        f = t < half ? base : shift_wrap(base, 2 * (t - half + 1), t - half + 1);
        break;
      }
      case ClipKind::Drift: {
        const double factor = 1.0 - 0.5 * static_cast<double>(t) / static_cast<double>(frames - 1);
        f = scale_brightness(shift_wrap(base, t, 0), factor);
        break;
      }
    }
    f.index = static_cast<std::size_t>(t);
    clip.push_back(std::move(f));
  }
  return clip;
}

}  // namespace pipeflow
