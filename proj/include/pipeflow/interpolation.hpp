#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "pipeflow/error.hpp"
#include "pipeflow/frame.hpp"
#include "pipeflow/motion.hpp"

namespace pipeflow {

inline constexpr double kWarpDisagreementThreshold = 24.0;  // 8-bit units

namespace detail {

inline double bilinear_channel(const Frame& img, float x, float y, int c) {
  x = std::clamp(x, 0.0f, static_cast<float>(img.width - 1));
  y = std::clamp(y, 0.0f, static_cast<float>(img.height - 1));
  const int x0 = static_cast<int>(x);
  const int y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const double fx = x - static_cast<float>(x0);
  const double fy = y - static_cast<float>(y0);
  const double top = img.at(x0, y0, c) * (1.0 - fx) + img.at(x1, y0, c) * fx;
  const double bot = img.at(x0, y1, c) * (1.0 - fx) + img.at(x1, y1, c) * fx;
  return top * (1.0 - fy) + bot * fy;
}

}  // namespace detail

/// Backward-warps `src` by the flow field: out(x) = src(x + flow(x)).
inline Frame warp_frame(const Frame& src, const FlowField& flow) {
  if (src.width != flow.width || src.height != flow.height)
    throw Error(Errc::DimensionMismatch, "warp_frame: flow/frame shape mismatch");
  Frame out = src;
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      const float sx = static_cast<float>(x) + flow.u_at(x, y);
      const float sy = static_cast<float>(y) + flow.v_at(x, y);
      for (int c = 0; c < src.channels; ++c) {
        const double v = detail::bilinear_channel(src, sx, sy, c);
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
      }
    }
  }
  return out;
}

/// The t = 0.5 frame between a and b: both neighbors are warped halfway along
/// their estimated flows and blended equally; where the two warps disagree by
/// more than the threshold the pixel falls back to a plain cross-fade.
inline Frame interpolate_midpoint(const Frame& a, const Frame& b, const FlowConfig& cfg = {}) {
  if (!a.same_shape(b)) throw Error(Errc::DimensionMismatch, "interpolate_midpoint shapes differ");
  validate_frame(a);
  validate_frame(b);

  Frame out = a;
  const bool too_small = std::min(a.width, a.height) < kFlowMinDimension;
  if (too_small) {
    // no room to estimate flow; cross-fade the whole frame
    for (std::size_t i = 0; i < out.data.size(); ++i) {
      const double v = 0.5 * a.data[i] + 0.5 * b.data[i];
      out.data[i] = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
    }
    return out;
  }

  const GrayFrame ga = to_gray(a);
  const GrayFrame gb = to_gray(b);
  const FlowField fwd = estimate_flow(ga, gb, cfg);
  const FlowField bwd = estimate_flow(gb, ga, cfg);

  for (int y = 0; y < a.height; ++y) {
    for (int x = 0; x < a.width; ++x) {
      const float ax = static_cast<float>(x) - 0.5f * fwd.u_at(x, y);
      const float ay = static_cast<float>(y) - 0.5f * fwd.v_at(x, y);
      const float bx = static_cast<float>(x) - 0.5f * bwd.u_at(x, y);
      const float by = static_cast<float>(y) - 0.5f * bwd.v_at(x, y);
      double disagreement = 0.0;
      double wa[4], wb[4];
      for (int c = 0; c < a.channels; ++c) {
        wa[c] = detail::bilinear_channel(a, ax, ay, c);
        wb[c] = detail::bilinear_channel(b, bx, by, c);
        disagreement = std::max(disagreement, std::abs(wa[c] - wb[c]));
      }
      for (int c = 0; c < a.channels; ++c) {
        const double v = disagreement > kWarpDisagreementThreshold
                             ? 0.5 * a.at(x, y, c) + 0.5 * b.at(x, y, c)
                             : 0.5 * wa[c] + 0.5 * wb[c];
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Recursive gap filling
// ---------------------------------------------------------------------------

struct InterpolationRequest {
  Frame frame_a;
  Frame frame_b;
  int count = 1;  // frames to synthesize between a and b
};

inline void validate_interpolation_request(const InterpolationRequest& req) {
  if (req.count < 1) throw Error(Errc::BadConfig, "interpolation count must be >= 1");
  if (!req.frame_a.same_shape(req.frame_b))
    throw Error(Errc::DimensionMismatch, "interpolation endpoints differ in shape");
}

namespace detail {

inline void fill_gap(std::vector<Frame>& slots, std::size_t lo, std::size_t hi,
                     const FlowConfig& cfg) {
  if (hi - lo <= 1) return;
  const std::size_t mid = (lo + hi) / 2;  // integer midpoint; ties toward the earlier slot
  slots[mid] = interpolate_midpoint(slots[lo], slots[hi], cfg);
  slots[mid].index = mid;
  fill_gap(slots, lo, mid, cfg);
  fill_gap(slots, mid, hi, cfg);
}

}  // namespace detail

/// Synthesizes `count` frames between a and b by recursive bisection: the
/// midpoint slot is filled first, then each half, until every integer
/// position holds a frame. Returned in temporal order.
inline std::vector<Frame> interpolate_recursive(const InterpolationRequest& req,
                                                const FlowConfig& cfg = {}) {
  validate_interpolation_request(req);
  const std::size_t total = static_cast<std::size_t>(req.count) + 2;
  std::vector<Frame> slots(total);
  slots[0] = req.frame_a;
  slots[total - 1] = req.frame_b;
  detail::fill_gap(slots, 0, total - 1, cfg);
  return std::vector<Frame>(std::make_move_iterator(slots.begin() + 1),
                            std::make_move_iterator(slots.end() - 1));
}

// ---------------------------------------------------------------------------
// Segment border smoothing
// ---------------------------------------------------------------------------

/// Concatenates edited segments, replacing the first frame of each later
/// segment with the midpoint of the frames meeting at the border. Frame count
/// is preserved.
inline std::vector<Frame> smooth_borders(const std::vector<std::vector<Frame>>& segments,
                                         const FlowConfig& cfg = {}) {
  if (segments.empty()) throw Error(Errc::EmptyInput, "no segments to join");
  for (std::size_t i = 0; i < segments.size(); ++i)
    if (segments[i].empty())
      throw Error(Errc::EmptySegment, "segment " + std::to_string(i) + " is empty");

  std::vector<Frame> out;
  for (const auto& seg : segments) out.insert(out.end(), seg.begin(), seg.end());

  std::size_t offset = 0;
  for (std::size_t i = 1; i < segments.size(); ++i) {
    offset += segments[i - 1].size();
    Frame replaced = interpolate_midpoint(out[offset - 1], out[offset], cfg);
    replaced.index = out[offset].index;
    out[offset] = std::move(replaced);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Border consistency metrics
// ---------------------------------------------------------------------------

struct BorderMetrics {
  std::vector<double> mse;   // one entry per segment border
  std::vector<double> ssim;
  double mean_mse = 0.0;
  double mean_ssim = 1.0;
};

/// For each border, the last frame of the earlier segment is warped along the
/// estimated motion toward the next segment's first frame; MSE and global
/// SSIM between the warped frame and the actual next frame quantify how well
/// the segments agree where they meet.
inline BorderMetrics border_consistency(const std::vector<std::vector<Frame>>& segments,
                                        const FlowConfig& cfg = {}) {
  BorderMetrics out;
  for (std::size_t i = 0; i + 1 < segments.size(); ++i) {
    if (segments[i].empty() || segments[i + 1].empty())
      throw Error(Errc::EmptySegment, "segment " + std::to_string(segments[i].empty() ? i : i + 1));
    const Frame& prev = segments[i].back();
    const Frame& next = segments[i + 1].front();
    if (!prev.same_shape(next))
      throw Error(Errc::DimensionMismatch, "border frames differ in shape");

    const GrayFrame gn = to_gray(next);
    FlowField flow = std::min(prev.width, prev.height) >= kFlowMinDimension
                         ? estimate_flow(gn, to_gray(prev), cfg)
                         : make_zero_flow(prev.width, prev.height);
    const Frame warped = warp_frame(prev, flow);

    double se = 0.0;
    for (std::size_t k = 0; k < warped.data.size(); ++k) {
      const double d = static_cast<double>(warped.data[k]) - static_cast<double>(next.data[k]);
      se += d * d;
    }
    out.mse.push_back(se / static_cast<double>(warped.data.size()));
    out.ssim.push_back(ssim_global(to_gray(warped), gn));
  }
  if (!out.mse.empty()) {
    double sum_mse = 0.0, sum_ssim = 0.0;
    for (double v : out.mse) sum_mse += v;
    for (double v : out.ssim) sum_ssim += v;
    out.mean_mse = sum_mse / static_cast<double>(out.mse.size());
    out.mean_ssim = sum_ssim / static_cast<double>(out.ssim.size());
  }
  return out;
}

}  // namespace pipeflow
