#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <utility>
#include <vector>

#include "pipeflow/error.hpp"
#include "pipeflow/frame.hpp"

namespace pipeflow {

// ---------------------------------------------------------------------------
// Grayscale conversion (ITU-R BT.601 weights)
// ---------------------------------------------------------------------------

inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

inline GrayFrame to_gray(const Frame& f) {
  if (f.channels != 1 && f.channels != 3)
    throw Error(Errc::ChannelError, "to_gray expects 1 or 3 channels");
  GrayFrame g;
  g.width = f.width;
  g.height = f.height;
  g.data.resize(static_cast<std::size_t>(f.width) * f.height);
  if (f.channels == 1) {
    for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] = static_cast<float>(f.data[i]);
  } else {
    const std::uint8_t* p = f.data.data();
    for (std::size_t i = 0; i < g.data.size(); ++i, p += 3)
      g.data[i] = static_cast<float>(kLumaR * p[0] + kLumaG * p[1] + kLumaB * p[2]);
  }
  return g;
}

/// Quantizes float luma to 8-bit, rounding half-up.
inline Frame gray_to_frame8(const GrayFrame& g, std::size_t index = 0) {
  Frame f;
  f.width = g.width;
  f.height = g.height;
  f.channels = 1;
  f.index = index;
  f.data.resize(g.data.size());
  for (std::size_t i = 0; i < g.data.size(); ++i) {
    const double q = std::floor(static_cast<double>(g.data[i]) + 0.5);
    f.data[i] = static_cast<std::uint8_t>(std::clamp(q, 0.0, 255.0));
  }
  return f;
}

// ---------------------------------------------------------------------------
// Global SSIM: whole-image means, population variances and covariance
// ---------------------------------------------------------------------------

inline constexpr double kSsimC1 = (0.01 * 255.0) * (0.01 * 255.0);  // 6.5025
inline constexpr double kSsimC2 = (0.03 * 255.0) * (0.03 * 255.0);  // 58.5225

inline double ssim_global(const GrayFrame& a, const GrayFrame& b) {
  if (!a.same_shape(b)) throw Error(Errc::DimensionMismatch, "ssim_global: shape mismatch");
  const std::size_t n = a.pixel_count();
  if (n < 2) throw Error(Errc::TooSmall, "ssim_global needs at least 2 pixels");

  double sum_a = 0.0, sum_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum_a += a.data[i];
    sum_b += b.data[i];
  }
  const double mu_a = sum_a / static_cast<double>(n);
  const double mu_b = sum_b / static_cast<double>(n);

  double var_a = 0.0, var_b = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a.data[i] - mu_a;
    const double db = b.data[i] - mu_b;
    var_a += da * da;
    var_b += db * db;
    cov += da * db;
  }
  var_a /= static_cast<double>(n);
  var_b /= static_cast<double>(n);
  cov /= static_cast<double>(n);

  const double num = (2.0 * mu_a * mu_b + kSsimC1) * (2.0 * cov + kSsimC2);
  const double den = (mu_a * mu_a + mu_b * mu_b + kSsimC1) * (var_a + var_b + kSsimC2);
  return num / den;
}

inline double ssim_global(const Frame& a, const Frame& b) {
  return ssim_global(to_gray(a), to_gray(b));
}

// ---------------------------------------------------------------------------
// Dense optical flow: coarse-to-fine pyramidal least-squares estimation
// ---------------------------------------------------------------------------

struct FlowConfig {
  int pyramid_levels = 3;
  int window = 5;  // full window width, odd
  int iterations = 4;
};

inline void validate_flow_config(const FlowConfig& cfg) {
  if (cfg.pyramid_levels < 1) throw Error(Errc::BadConfig, "pyramid_levels must be >= 1");
  if (cfg.window < 3 || cfg.window % 2 == 0)
    throw Error(Errc::BadConfig, "flow window must be odd and >= 3");
  if (cfg.iterations < 1) throw Error(Errc::BadConfig, "flow iterations must be >= 1");
}

inline constexpr int kFlowMinDimension = 16;

namespace detail {

inline float bilinear(const GrayFrame& img, float x, float y) {
  x = std::clamp(x, 0.0f, static_cast<float>(img.width - 1));
  y = std::clamp(y, 0.0f, static_cast<float>(img.height - 1));
  const int x0 = static_cast<int>(x);
  const int y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const float fx = x - static_cast<float>(x0);
  const float fy = y - static_cast<float>(y0);
  const float top = img.at(x0, y0) * (1.0f - fx) + img.at(x1, y0) * fx;
  const float bot = img.at(x0, y1) * (1.0f - fx) + img.at(x1, y1) * fx;
  return top * (1.0f - fy) + bot * fy;
}

/// Separable [1 2 1]/4 blur with replicate edges.
inline GrayFrame blur121(const GrayFrame& src) {
  const int w = src.width, h = src.height;
  GrayFrame tmp;
  tmp.width = w;
  tmp.height = h;
  tmp.data.resize(src.data.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int xl = std::max(x - 1, 0), xr = std::min(x + 1, w - 1);
      tmp.at(x, y) = 0.25f * src.at(xl, y) + 0.5f * src.at(x, y) + 0.25f * src.at(xr, y);
    }
  }
  GrayFrame blur;
  blur.width = w;
  blur.height = h;
  blur.data.resize(src.data.size());
  for (int y = 0; y < h; ++y) {
    const int yt = std::max(y - 1, 0), yb = std::min(y + 1, h - 1);
    for (int x = 0; x < w; ++x)
      blur.at(x, y) = 0.25f * tmp.at(x, yt) + 0.5f * tmp.at(x, y) + 0.25f * tmp.at(x, yb);
  }
  return blur;
}

/// Blur, then drop every other pixel.
inline GrayFrame downsample2(const GrayFrame& src) {
  const int w = src.width, h = src.height;
  const GrayFrame blur = blur121(src);
  GrayFrame out;
  out.width = (w + 1) / 2;
  out.height = (h + 1) / 2;
  out.data.resize(static_cast<std::size_t>(out.width) * out.height);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) out.at(x, y) = blur.at(2 * x, 2 * y);
  return out;
}

/// Central-difference gradients with clamped (replicate) borders.
inline void gradients(const GrayFrame& img, std::vector<float>& ix, std::vector<float>& iy) {
  const int w = img.width, h = img.height;
  ix.assign(img.data.size(), 0.0f);
  iy.assign(img.data.size(), 0.0f);
  for (int y = 0; y < h; ++y) {
    const int yt = std::max(y - 1, 0), yb = std::min(y + 1, h - 1);
    for (int x = 0; x < w; ++x) {
      const int xl = std::max(x - 1, 0), xr = std::min(x + 1, w - 1);
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      ix[i] = 0.5f * (img.at(xr, y) - img.at(xl, y));
      iy[i] = 0.5f * (img.at(x, yb) - img.at(x, yt));
    }
  }
}

/// Summed-area table with a zero top row/left column: sat has (w+1)x(h+1).
inline void build_sat(const std::vector<float>& plane, int w, int h, std::vector<double>& sat) {
  sat.assign(static_cast<std::size_t>(w + 1) * (h + 1), 0.0);
  for (int y = 0; y < h; ++y) {
    double row = 0.0;
    for (int x = 0; x < w; ++x) {
      row += plane[static_cast<std::size_t>(y) * w + x];
      sat[static_cast<std::size_t>(y + 1) * (w + 1) + (x + 1)] =
          sat[static_cast<std::size_t>(y) * (w + 1) + (x + 1)] + row;
    }
  }
}

/// Sum of plane over the window [x-r, x+r] x [y-r, y+r] clipped to the image.
inline double window_sum(const std::vector<double>& sat, int w, int h, int x, int y, int r) {
  const int x0 = std::max(x - r, 0), y0 = std::max(y - r, 0);
  const int x1 = std::min(x + r, w - 1), y1 = std::min(y + r, h - 1);
  const std::size_t stride = static_cast<std::size_t>(w + 1);
  return sat[(y1 + 1) * stride + (x1 + 1)] - sat[(y0) * stride + (x1 + 1)] -
         sat[(y1 + 1) * stride + (x0)] + sat[(y0) * stride + (x0)];
}

/// In-place box-filter mean over the (clipped) window of radius r.
inline void box_smooth(std::vector<float>& plane, int w, int h, int r) {
  std::vector<double> sat;
  build_sat(plane, w, h, sat);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(x - r, 0), y0 = std::max(y - r, 0);
      const int x1 = std::min(x + r, w - 1), y1 = std::min(y + r, h - 1);
      const double area = static_cast<double>(x1 - x0 + 1) * (y1 - y0 + 1);
      plane[static_cast<std::size_t>(y) * w + x] =
          static_cast<float>(window_sum(sat, w, h, x, y, r) / area);
    }
  }
}

inline FlowField refine_level(const GrayFrame& a, const GrayFrame& b, FlowField flow, int window,
                              int iterations) {
  const int w = a.width, h = a.height;
  const int r = (window - 1) / 2;
  const std::size_t n = static_cast<std::size_t>(w) * h;

  std::vector<float> ix, iy;
  gradients(a, ix, iy);
  std::vector<float> pxx(n), pxy(n), pyy(n);
  for (std::size_t i = 0; i < n; ++i) {
    pxx[i] = ix[i] * ix[i];
    pxy[i] = ix[i] * iy[i];
    pyy[i] = iy[i] * iy[i];
  }
  std::vector<double> sxx, sxy, syy, sxt, syt;
  build_sat(pxx, w, h, sxx);
  build_sat(pxy, w, h, sxy);
  build_sat(pyy, w, h, syy);

  std::vector<float> pxt(n), pyt(n);
  const double det_floor = 1e-3;     // flat windows give exactly zero
  const float step_clamp = 2.0f;     // per-iteration update bound
  for (int it = 0; it < iterations; ++it) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        const float wx = static_cast<float>(x) + flow.u[i];
        const float wy = static_cast<float>(y) + flow.v[i];
        const float dt = bilinear(b, wx, wy) - a.data[i];
        pxt[i] = ix[i] * dt;
        pyt[i] = iy[i] * dt;
      }
    }
    build_sat(pxt, w, h, sxt);
    build_sat(pyt, w, h, syt);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        const double axx = window_sum(sxx, w, h, x, y, r);
        const double axy = window_sum(sxy, w, h, x, y, r);
        const double ayy = window_sum(syy, w, h, x, y, r);
        const double bxt = window_sum(sxt, w, h, x, y, r);
        const double byt = window_sum(syt, w, h, x, y, r);
        const double det = axx * ayy - axy * axy;
        if (det <= det_floor) continue;
        const float du = static_cast<float>(std::clamp((axy * byt - ayy * bxt) / det,
                                                       -static_cast<double>(step_clamp),
                                                       static_cast<double>(step_clamp)));
        const float dv = static_cast<float>(std::clamp((axy * bxt - axx * byt) / det,
                                                       -static_cast<double>(step_clamp),
                                                       static_cast<double>(step_clamp)));
        flow.u[i] += du;
        flow.v[i] += dv;
      }
    }
    // regularize: per-pixel least squares is noisy on high-frequency texture
    box_smooth(flow.u, w, h, r);
    box_smooth(flow.v, w, h, r);
  }
  return flow;
}

/// Doubles a coarse flow field onto a 2x-larger grid.
inline FlowField upsample_flow(const FlowField& coarse, int width, int height) {
  FlowField fine = make_zero_flow(width, height);
  GrayFrame up, vp;
  up.width = vp.width = coarse.width;
  up.height = vp.height = coarse.height;
  up.data = coarse.u;
  vp.data = coarse.v;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * width + x;
      fine.u[i] = 2.0f * bilinear(up, 0.5f * static_cast<float>(x), 0.5f * static_cast<float>(y));
      fine.v[i] = 2.0f * bilinear(vp, 0.5f * static_cast<float>(x), 0.5f * static_cast<float>(y));
    }
  }
  return fine;
}

}  // namespace detail

/// Dense displacement field carrying pixels of `a` toward `b`.
inline FlowField estimate_flow(const GrayFrame& a, const GrayFrame& b,
                               const FlowConfig& cfg = {}) {
  validate_flow_config(cfg);
  if (!a.same_shape(b)) throw Error(Errc::DimensionMismatch, "estimate_flow: shape mismatch");
  if (std::min(a.width, a.height) < kFlowMinDimension)
    throw Error(Errc::TooSmall, "estimate_flow needs min dimension >= " +
                                    std::to_string(kFlowMinDimension));

  int levels = cfg.pyramid_levels;
  while (levels > 1 && (std::min(a.width, a.height) >> (levels - 1)) < 2 * cfg.window) --levels;

  std::vector<GrayFrame> pyr_a{a}, pyr_b{b};
  for (int l = 1; l < levels; ++l) {
    pyr_a.push_back(detail::downsample2(pyr_a.back()));
    pyr_b.push_back(detail::downsample2(pyr_b.back()));
  }

  FlowField flow = make_zero_flow(pyr_a.back().width, pyr_a.back().height);
  for (int l = levels - 1; l >= 0; --l) {
    if (l != levels - 1) flow = detail::upsample_flow(flow, pyr_a[l].width, pyr_a[l].height);
    // estimate on lightly smoothed copies: the linearization behind the
    // least-squares step needs gradients that are valid over ~1 px
    flow = detail::refine_level(detail::blur121(pyr_a[l]), detail::blur121(pyr_b[l]),
                                std::move(flow), cfg.window, cfg.iterations);
  }
  validate_flow(flow);
  return flow;
}

inline double mean_flow_magnitude(const FlowField& f) {
  validate_flow(f);
  double sum = 0.0;
  for (std::size_t i = 0; i < f.u.size(); ++i)
    sum += std::sqrt(static_cast<double>(f.u[i]) * f.u[i] + static_cast<double>(f.v[i]) * f.v[i]);
  return sum / static_cast<double>(f.u.size());
}

// ---------------------------------------------------------------------------
// Exhaustive block-matching oracle (integer displacements, SAD objective)
// ---------------------------------------------------------------------------

inline FlowField flow_oracle_blockmatch(const GrayFrame& a, const GrayFrame& b, int radius,
                                        int block) {
  if (!a.same_shape(b))
    throw Error(Errc::DimensionMismatch, "flow_oracle_blockmatch: shape mismatch");
  if (radius < 1) throw Error(Errc::BadConfig, "block-match radius must be >= 1");
  if (block < 1 || block % 2 == 0) throw Error(Errc::BadConfig, "block size must be odd");

  // Candidates visited in tie-break order: ascending |d|^2, then (u, v)
  // lexicographic. Strict improvement then realizes the tie-break for free.
  struct Cand {
    int u, v, norm;
  };
  std::vector<Cand> cands;
  cands.reserve(static_cast<std::size_t>(2 * radius + 1) * (2 * radius + 1));
  for (int u = -radius; u <= radius; ++u)
    for (int v = -radius; v <= radius; ++v) cands.push_back({u, v, u * u + v * v});
  std::sort(cands.begin(), cands.end(), [](const Cand& l, const Cand& r) {
    if (l.norm != r.norm) return l.norm < r.norm;
    if (l.u != r.u) return l.u < r.u;
    return l.v < r.v;
  });

  const int w = a.width, h = a.height;
  const int hb = block / 2;
  FlowField out = make_zero_flow(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double best_cost = std::numeric_limits<double>::infinity();
      int best_u = 0, best_v = 0;
      for (const Cand& c : cands) {
        double cost = 0.0;
        bool abandoned = false;
        for (int dy = -hb; dy <= hb && !abandoned; ++dy) {
          const int ay = std::clamp(y + dy, 0, h - 1);
          const int by = std::clamp(y + dy + c.v, 0, h - 1);
          for (int dx = -hb; dx <= hb; ++dx) {
            const int ax = std::clamp(x + dx, 0, w - 1);
            const int bx = std::clamp(x + dx + c.u, 0, w - 1);
            cost += std::abs(a.at(ax, ay) - b.at(bx, by));
            if (cost >= best_cost) {
              abandoned = true;
              break;
            }
          }
        }
        if (!abandoned && cost < best_cost) {
          best_cost = cost;
          best_u = c.u;
          best_v = c.v;
        }
      }
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      out.u[i] = static_cast<float>(best_u);
      out.v[i] = static_cast<float>(best_v);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Per-pair motion metrics
// ---------------------------------------------------------------------------

struct MotionMetrics {
  double ssim = 1.0;
  double mean_flow_magnitude = 0.0;
  std::size_t frame_t = 0;       // pair is (frame_t, frame_t + 1)
  std::size_t frame_t_next = 0;
};

inline MotionMetrics compute_motion_metrics(const Frame& a, const Frame& b,
                                            const FlowConfig& cfg = {}) {
  const GrayFrame ga = to_gray(a);
  const GrayFrame gb = to_gray(b);
  MotionMetrics m;
  m.frame_t = a.index;
  m.frame_t_next = b.index;
  m.ssim = ssim_global(ga, gb);
  m.mean_flow_magnitude = mean_flow_magnitude(estimate_flow(ga, gb, cfg));
  return m;
}

// ---------------------------------------------------------------------------
// Flow field binary serialization (little-endian; int32 w, h; f32 planes)
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u32le(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                         static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(bytes, 4);
}

inline std::uint32_t get_u32le(std::istream& in, const std::string& what) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  if (!in) throw Error(Errc::DecodeError, "flow file truncated reading " + what);
  return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) |
         (static_cast<std::uint32_t>(bytes[3]) << 24);
}

inline void put_f32le(std::ostream& out, float f) {
  std::uint32_t v;
  std::memcpy(&v, &f, 4);
  put_u32le(out, v);
}

inline float get_f32le(std::istream& in) {
  const std::uint32_t v = get_u32le(in, "plane data");
  float f;
  std::memcpy(&f, &v, 4);
  return f;
}

}  // namespace detail

inline void write_flow(const FlowField& f, const std::filesystem::path& path) {
  validate_flow(f);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::WriteError, path.string() + ": cannot open for writing");
  detail::put_u32le(out, static_cast<std::uint32_t>(f.width));
  detail::put_u32le(out, static_cast<std::uint32_t>(f.height));
  for (float v : f.u) detail::put_f32le(out, v);
  for (float v : f.v) detail::put_f32le(out, v);
  if (!out) throw Error(Errc::WriteError, path.string() + ": write failed");
}

inline FlowField read_flow(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::DecodeError, path.string() + ": cannot open");
  const auto w = static_cast<int>(detail::get_u32le(in, "width"));
  const auto h = static_cast<int>(detail::get_u32le(in, "height"));
  if (w <= 0 || h <= 0 || w > kMaxDimension || h > kMaxDimension)
    throw Error(Errc::DecodeError, path.string() + ": bad flow dimensions");
  FlowField f = make_zero_flow(w, h);
  for (auto& v : f.u) v = detail::get_f32le(in);
  for (auto& v : f.v) v = detail::get_f32le(in);
  validate_flow(f);
  return f;
}

}  // namespace pipeflow
