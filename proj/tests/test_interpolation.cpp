#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include <pipeflow/interpolation.hpp>
#include <pipeflow/motion.hpp>
#include <pipeflow/synthetic.hpp>

#include "test_support.hpp"

using namespace pipeflow;

namespace {

Frame texture_frame(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  return make_texture(w, h, 3, rng);
}

/// Mean absolute difference over the interior, all channels.
double interior_mad(const Frame& a, const Frame& b, int margin) {
  double sum = 0.0;
  std::size_t count = 0;
  for (int y = margin; y < a.height - margin; ++y)
    for (int x = margin; x < a.width - margin; ++x)
      for (int c = 0; c < a.channels; ++c) {
        sum += std::abs(static_cast<double>(a.at(x, y, c)) - static_cast<double>(b.at(x, y, c)));
        ++count;
      }
  return sum / static_cast<double>(count);
}

Frame shifted(const Frame& src, int dx, int dy) {
  Frame out = src;
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x) {
      const int sx = std::clamp(x - dx, 0, src.width - 1);
      const int sy = std::clamp(y - dy, 0, src.height - 1);
      for (int c = 0; c < src.channels; ++c) out.at(x, y, c) = src.at(sx, sy, c);
    }
  return out;
}

}  // namespace

TEST_CASE("warping by zero flow is the identity", "[interpolation]") {
  const Frame f = texture_frame(24, 20, 31);
  const Frame warped = warp_frame(f, make_zero_flow(24, 20));
  REQUIRE(warped.data == f.data);

  REQUIRE_THROWS_MATCHES(warp_frame(f, make_zero_flow(10, 10)), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == Errc::DimensionMismatch;
                         }));
}

TEST_CASE("warping undoes an integer shift", "[interpolation]") {
  const Frame f = texture_frame(48, 48, 32);
  const Frame moved = shifted(f, 3, 2);
  // out(x) = moved(x + (3,2)) = f(x) away from the borders
  FlowField flow = make_zero_flow(48, 48);
  for (float& u : flow.u) u = 3.0f;
  for (float& v : flow.v) v = 2.0f;
  const Frame recovered = warp_frame(moved, flow);
  REQUIRE(interior_mad(recovered, f, 6) == 0.0);
}

TEST_CASE("the midpoint of identical frames is pixel-exact", "[interpolation]") {
  const Frame f = texture_frame(32, 32, 33);
  const Frame mid = interpolate_midpoint(f, f);
  REQUIRE(mid.data == f.data);
}

TEST_CASE("the midpoint of a translating scene lands halfway", "[interpolation]") {
  const Frame a = texture_frame(64, 64, 34);
  const Frame b = shifted(a, 4, 0);
  const Frame truth = shifted(a, 2, 0);
  const Frame mid = interpolate_midpoint(a, b);
  // flow-warp interpolation, not a cross-fade: interior error stays small
  REQUIRE(interior_mad(mid, truth, 12) <= 4.0);
  const Frame crossfade_baseline = [&] {
    Frame out = a;
    for (std::size_t i = 0; i < out.data.size(); ++i)
      out.data[i] = static_cast<std::uint8_t>((a.data[i] + b.data[i] + 1) / 2);
    return out;
  }();
  REQUIRE(interior_mad(mid, truth, 12) < interior_mad(crossfade_baseline, truth, 12));
}

TEST_CASE("flat frames cross-fade to the exact average", "[interpolation]") {
  const Frame dark = make_constant_frame(32, 32, 3, 100);
  const Frame bright = make_constant_frame(32, 32, 3, 200);
  const Frame mid = interpolate_midpoint(dark, bright);
  for (std::uint8_t p : mid.data) REQUIRE(static_cast<int>(p) == 150);
}

TEST_CASE("tiny frames skip flow and cross-fade whole", "[interpolation]") {
  const Frame a = make_constant_frame(8, 8, 1, 10);
  const Frame b = make_constant_frame(8, 8, 1, 31);
  const Frame mid = interpolate_midpoint(a, b);
  // (10 + 31) / 2 = 20.5, rounded half-up
  for (std::uint8_t p : mid.data) REQUIRE(static_cast<int>(p) == 21);
}

TEST_CASE("recursive interpolation returns the right count in order", "[interpolation]") {
  const Frame lo = make_constant_frame(32, 32, 1, 0);
  const Frame hi = make_constant_frame(32, 32, 1, 255);
  for (int count : {1, 2, 3, 7}) {
    InterpolationRequest req{lo, hi, count};
    const std::vector<Frame> frames = interpolate_recursive(req);
    REQUIRE(frames.size() == static_cast<std::size_t>(count));
    // flat endpoints: every synthesized frame is constant, and because each
    // value is an average of its gap's endpoints the sequence is monotonic
    int prev = 0;
    for (const Frame& f : frames) {
      for (std::uint8_t p : f.data) REQUIRE(static_cast<int>(p) == static_cast<int>(f.data[0]));
      REQUIRE(static_cast<int>(f.data[0]) >= prev);
      prev = f.data[0];
    }
    REQUIRE(prev <= 255);
  }
}

TEST_CASE("one interpolated frame between flat endpoints is their mean", "[interpolation]") {
  const Frame lo = make_constant_frame(32, 32, 1, 0);
  const Frame hi = make_constant_frame(32, 32, 1, 255);
  const std::vector<Frame> one = interpolate_recursive({lo, hi, 1});
  // (0 + 255) / 2 = 127.5 -> 128 half-up
  REQUIRE(static_cast<int>(one[0].data[0]) == 128);

  const std::vector<Frame> three = interpolate_recursive({lo, hi, 3});
  REQUIRE(static_cast<int>(three[1].data[0]) == 128);  // midpoint filled first
  REQUIRE(static_cast<int>(three[0].data[0]) == 64);   // then (0, 128) -> 64
  REQUIRE(static_cast<int>(three[2].data[0]) == 192);  // and (128, 255) -> 191.5 -> 192
}

TEST_CASE("interpolation requests are validated", "[interpolation]") {
  const Frame f = make_constant_frame(16, 16, 1, 0);
  REQUIRE_THROWS_MATCHES(interpolate_recursive({f, f, 0}), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.code() == Errc::BadConfig; }));
  REQUIRE_THROWS_MATCHES(
      interpolate_recursive({f, make_constant_frame(16, 17, 1, 0), 1}), Error,
      Catch::Matchers::Predicate<Error>(
          [](const Error& e) { return e.code() == Errc::DimensionMismatch; }));
}

TEST_CASE("border smoothing preserves count and indices", "[interpolation]") {
  std::vector<std::vector<Frame>> segments;
  std::size_t index = 0;
  for (int s = 0; s < 3; ++s) {
    std::vector<Frame> seg;
    for (int k = 0; k < 4; ++k) {
      Frame f = texture_frame(32, 32, 40 + index);
      f.index = index++;
      seg.push_back(std::move(f));
    }
    segments.push_back(std::move(seg));
  }

  const std::vector<Frame> joined = smooth_borders(segments);
  REQUIRE(joined.size() == 12);
  for (std::size_t i = 0; i < joined.size(); ++i) REQUIRE(joined[i].index == i);

  // only the first frame of each later segment was replaced
  for (std::size_t i = 0; i < joined.size(); ++i) {
    const bool is_border = i == 4 || i == 8;
    const Frame& original = segments[i / 4][i % 4];
    if (!is_border) REQUIRE(joined[i].data == original.data);
    if (is_border) REQUIRE(joined[i].data != original.data);
  }
}

TEST_CASE("border smoothing rejects empty input", "[interpolation]") {
  REQUIRE_THROWS_MATCHES(smooth_borders({}), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.code() == Errc::EmptyInput; }));
  REQUIRE_THROWS_MATCHES(
      smooth_borders({{make_constant_frame(16, 16, 1, 0)}, {}}), Error,
      Catch::Matchers::Predicate<Error>(
          [](const Error& e) { return e.code() == Errc::EmptySegment; }));
}

TEST_CASE("borders that continue seamlessly measure as consistent", "[interpolation]") {
  // one static scene split into two segments: warped prev == next exactly
  const Frame f = texture_frame(32, 32, 50);
  const std::vector<std::vector<Frame>> segments{{f, f}, {f, f}};
  const BorderMetrics m = border_consistency(segments);
  REQUIRE(m.mse.size() == 1);
  REQUIRE(m.ssim.size() == 1);
  REQUIRE(m.mse[0] == 0.0);
  REQUIRE(m.ssim[0] == 1.0);
  REQUIRE(m.mean_mse == 0.0);
  REQUIRE(m.mean_ssim == 1.0);
}

TEST_CASE("a hard cut at the border scores worse than a continuation", "[interpolation]") {
  const Frame scene_a = texture_frame(32, 32, 51);
  const Frame scene_b = texture_frame(32, 32, 52);
  const BorderMetrics cut = border_consistency({{scene_a, scene_a}, {scene_b, scene_b}});
  const BorderMetrics smooth = border_consistency({{scene_a, scene_a}, {scene_a, scene_a}});
  REQUIRE(cut.mean_mse > smooth.mean_mse);
  REQUIRE(cut.mean_ssim < smooth.mean_ssim);
}

TEST_CASE("tiny frames use zero flow for the border metric", "[interpolation]") {
  const Frame a = make_constant_frame(8, 8, 1, 100);
  const Frame b = make_constant_frame(8, 8, 1, 110);
  const BorderMetrics m = border_consistency({{a}, {b}});
  REQUIRE(m.mse[0] == 100.0);  // (110 - 100)^2 with no warp possible
}

TEST_CASE("border metrics of a single segment are empty", "[interpolation]") {
  const BorderMetrics m = border_consistency({{make_constant_frame(16, 16, 1, 0)}});
  REQUIRE(m.mse.empty());
  REQUIRE(m.mean_mse == 0.0);
  REQUIRE(m.mean_ssim == 1.0);
}
