#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "pipeflow/cost_model.hpp"
#include "pipeflow/error.hpp"
#include "pipeflow/frame.hpp"
#include "pipeflow/motion.hpp"
#include "pipeflow/scheduler.hpp"
#include "pipeflow/segmentation.hpp"

namespace pipeflow {

// ---------------------------------------------------------------------------
// Two-stage backend contract
// ---------------------------------------------------------------------------

struct InvertedSegment {
  int segment_id = -1;
  std::vector<Frame> originals;
  std::vector<std::vector<GrayFrame>> latents;  // per-frame blur pyramid cache
  std::string stage_tag;
};

struct EditedSegment {
  int segment_id = -1;
  std::vector<Frame> frames;
  std::string prompt_tag;
  std::string stage_tag;
};

/// Stage A must run before stage B for the same segment; different segments
/// may be processed concurrently.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual InvertedSegment invert(const Segment& seg, std::vector<Frame> frames) = 0;
  virtual EditedSegment edit(const Segment& seg, const InvertedSegment& latents,
                             const std::vector<Frame>& guide_frames,
                             const std::string& prompt_tag) = 0;
  virtual std::string name() const = 0;
};

namespace detail {

/// Tracks which segments this backend instance has inverted, so an edit with
/// foreign or premature latents is rejected.
class StageProtocol {
 public:
  void record_invert(int segment_id) {
    std::lock_guard<std::mutex> lock(mu_);
    inverted_.insert(segment_id);
  }

  void require_inverted(const Segment& seg, const InvertedSegment& latents) const {
    if (latents.segment_id != seg.id)
      throw Error(Errc::ProtocolError,
                  "edit of segment " + std::to_string(seg.id) + " given latents of segment " +
                      std::to_string(latents.segment_id));
    std::lock_guard<std::mutex> lock(mu_);
    if (inverted_.find(seg.id) == inverted_.end())
      throw Error(Errc::ProtocolError,
                  "edit of segment " + std::to_string(seg.id) + " before its invert");
  }

 private:
  mutable std::mutex mu_;
  std::set<int> inverted_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Cost-model mock: pass-through pixels, declared or slept durations
// ---------------------------------------------------------------------------

class MockBackend final : public Backend {
 public:
  /// sleep_per_unit > 0 makes invert/edit block for duration-units * that long
  /// (realtime runs); zero executes instantly (simulated runs).
  explicit MockBackend(CostModelParams cost,
                       std::chrono::microseconds sleep_per_unit = std::chrono::microseconds(0))
      : cost_(cost), sleep_per_unit_(sleep_per_unit) {
    validate_cost_params(cost_);
  }

  InvertedSegment invert(const Segment& seg, std::vector<Frame> frames) override {
    maybe_sleep(invert_units(seg));
    protocol_.record_invert(seg.id);
    InvertedSegment out;
    out.segment_id = seg.id;
    out.originals = std::move(frames);
    out.stage_tag = "inverted:mock";
    return out;
  }

  EditedSegment edit(const Segment& seg, const InvertedSegment& latents,
                     const std::vector<Frame>& /*guide_frames*/,
                     const std::string& prompt_tag) override {
    protocol_.require_inverted(seg, latents);
    maybe_sleep(edit_units(seg));
    EditedSegment out;
    out.segment_id = seg.id;
    out.frames = latents.originals;
    out.prompt_tag = prompt_tag;
    out.stage_tag = "edited:mock";
    return out;
  }

  std::string name() const override { return "mock"; }

  long long invert_units(const Segment& seg) const {
    return to_units(invert_duration(cost_, static_cast<double>(seg.frames.size())));
  }

  long long edit_units(const Segment& seg) const {
    const double guides = static_cast<double>(seg.keyframes.size() + seg.overlap_frames.size());
    return to_units(edit_duration(cost_, guides, static_cast<double>(seg.frames.size())));
  }

  const CostModelParams& cost() const { return cost_; }

 private:
  static long long to_units(double d) {
    return std::max<long long>(1, static_cast<long long>(std::llround(d)));
  }

  void maybe_sleep(long long units) const {
    if (sleep_per_unit_.count() > 0) std::this_thread::sleep_for(units * sleep_per_unit_);
  }

  CostModelParams cost_;
  std::chrono::microseconds sleep_per_unit_;
  detail::StageProtocol protocol_;
};

// ---------------------------------------------------------------------------
// Stylize backend: real pixel transforms with keyframe-derived parameters
// ---------------------------------------------------------------------------

enum class Style { InvertColors, Sepia, Posterize };

inline const char* style_name(Style s) {
  switch (s) {
    case Style::InvertColors: return "invert-colors";
    case Style::Sepia: return "sepia";
    default: return "posterize";
  }
}

inline Style parse_style(const std::string& s) {
  if (s == "invert-colors") return Style::InvertColors;
  if (s == "sepia") return Style::Sepia;
  if (s == "posterize") return Style::Posterize;
  throw Error(Errc::BadConfig, "unknown style: " + s + " (invert-colors|sepia|posterize)");
}

namespace detail {

inline std::uint8_t quantize8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

inline Frame apply_invert_colors(const Frame& f) {
  Frame out = f;
  for (std::uint8_t& p : out.data) p = static_cast<std::uint8_t>(255 - p);
  return out;
}

inline Frame apply_sepia(const Frame& f) {
  if (f.channels != 3) throw Error(Errc::ChannelError, "sepia needs 3-channel frames");
  Frame out = f;
  for (std::size_t i = 0; i < f.data.size(); i += 3) {
    const double r = f.data[i], g = f.data[i + 1], b = f.data[i + 2];
    out.data[i] = quantize8(0.393 * r + 0.769 * g + 0.189 * b);
    out.data[i + 1] = quantize8(0.349 * r + 0.686 * g + 0.168 * b);
    out.data[i + 2] = quantize8(0.272 * r + 0.534 * g + 0.131 * b);
  }
  return out;
}

/// Per-channel quantization anchors, fitted on the guide frames.
struct PosterizeParams {
  double lo[3] = {0.0, 0.0, 0.0};
  double hi[3] = {255.0, 255.0, 255.0};
};

inline PosterizeParams fit_posterize(const std::vector<Frame>& guides) {
  PosterizeParams p;
  for (int c = 0; c < 3; ++c) {
    p.lo[c] = 255.0;
    p.hi[c] = 0.0;
  }
  for (const Frame& f : guides) {
    for (std::size_t i = 0; i < f.data.size(); ++i) {
      const int c = f.channels == 3 ? static_cast<int>(i % 3) : 0;
      p.lo[c] = std::min(p.lo[c], static_cast<double>(f.data[i]));
      p.hi[c] = std::max(p.hi[c], static_cast<double>(f.data[i]));
    }
  }
  return p;
}

inline Frame apply_posterize(const Frame& f, const PosterizeParams& p, int levels) {
  Frame out = f;
  for (std::size_t i = 0; i < f.data.size(); ++i) {
    const int c = f.channels == 3 ? static_cast<int>(i % 3) : 0;
    const double lo = p.lo[c], hi = p.hi[c];
    if (hi <= lo) {
      out.data[i] = quantize8(lo);
      continue;
    }
    const double t = std::clamp((f.data[i] - lo) / (hi - lo), 0.0, 1.0);
    const double q = std::floor(t * (levels - 1) + 0.5);
    out.data[i] = quantize8(lo + q * (hi - lo) / (levels - 1));
  }
  return out;
}

}  // namespace detail

class StylizeBackend final : public Backend {
 public:
  explicit StylizeBackend(Style style, int posterize_levels = 4) : style_(style),
                                                                   levels_(posterize_levels) {
    if (levels_ < 2) throw Error(Errc::BadConfig, "posterize needs >= 2 levels");
  }

  InvertedSegment invert(const Segment& seg, std::vector<Frame> frames) override {
    InvertedSegment out;
    out.segment_id = seg.id;
    out.latents.reserve(frames.size());
    for (const Frame& f : frames) {
      std::vector<GrayFrame> pyramid;
      pyramid.push_back(to_gray(f));
      for (int level = 1; level < 3; ++level)
        pyramid.push_back(detail::downsample2(pyramid.back()));
      out.latents.push_back(std::move(pyramid));
    }
    out.originals = std::move(frames);
    out.stage_tag = "inverted:blur-pyramid";
    protocol_.record_invert(seg.id);
    return out;
  }

  EditedSegment edit(const Segment& seg, const InvertedSegment& latents,
                     const std::vector<Frame>& guide_frames,
                     const std::string& prompt_tag) override {
    protocol_.require_inverted(seg, latents);
    // keyframes (and carried border frames) are processed first: the
    // transform parameters come from them alone, then apply everywhere
    detail::PosterizeParams params;
    if (style_ == Style::Posterize)
      params = detail::fit_posterize(guide_frames.empty() ? latents.originals : guide_frames);

    EditedSegment out;
    out.segment_id = seg.id;
    out.prompt_tag = prompt_tag;
    out.stage_tag = std::string("edited:") + style_name(style_);
    out.frames.reserve(latents.originals.size());
    for (const Frame& f : latents.originals) {
      switch (style_) {
        case Style::InvertColors: out.frames.push_back(detail::apply_invert_colors(f)); break;
        case Style::Sepia: out.frames.push_back(detail::apply_sepia(f)); break;
        case Style::Posterize:
          out.frames.push_back(detail::apply_posterize(f, params, levels_));
          break;
      }
    }
    return out;
  }

  std::string name() const override { return std::string("stylize:") + style_name(style_); }

 private:
  Style style_;
  int levels_;
  detail::StageProtocol protocol_;
};

/// Parses "mock" or "stylize:<style>".
inline std::unique_ptr<Backend> make_backend(const std::string& spec, const CostModelParams& cost,
                                             std::chrono::microseconds mock_sleep_per_unit =
                                                 std::chrono::microseconds(0)) {
  if (spec == "mock") return std::make_unique<MockBackend>(cost, mock_sleep_per_unit);
  if (spec.rfind("stylize:", 0) == 0)
    return std::make_unique<StylizeBackend>(parse_style(spec.substr(8)));
  throw Error(Errc::BadConfig, "unknown backend: " + spec + " (mock|stylize:<style>)");
}

// ---------------------------------------------------------------------------
// Segment execution: functional (simulated) and as a TaskRunner (realtime)
// ---------------------------------------------------------------------------

/// Pulls the originals for a list of frame indices out of a source.
inline std::vector<Frame> gather_frames(const FrameSource& source,
                                        const std::vector<std::size_t>& indices) {
  std::vector<Frame> out;
  out.reserve(indices.size());
  for (std::size_t idx : indices) out.push_back(source.frame(idx));
  return out;
}

/// Guide frames for a segment: keyframe originals plus the previous segment's
/// carried border originals.
inline std::vector<Frame> gather_guides(const FrameSource& source, const Segment& seg) {
  std::vector<Frame> guides = gather_frames(source, seg.keyframes);
  std::vector<Frame> carried = gather_frames(source, seg.overlap_frames);
  guides.insert(guides.end(), std::make_move_iterator(carried.begin()),
                std::make_move_iterator(carried.end()));
  return guides;
}

/// Runs invert then edit for every segment in id order; used when the clock is
/// simulated and only the pixel results matter.
inline std::vector<EditedSegment> execute_plan(Backend& backend, const SegmentPlan& plan,
                                               const FrameSource& source,
                                               const std::string& prompt_tag) {
  validate_plan(plan);
  std::vector<EditedSegment> out;
  out.reserve(plan.segments.size());
  for (const Segment& seg : plan.segments) {
    InvertedSegment latents = backend.invert(seg, gather_frames(source, seg.frames));
    out.push_back(backend.edit(seg, latents, gather_guides(source, seg), prompt_tag));
  }
  return out;
}

/// Adapts a Backend to the scheduler's TaskRunner interface for realtime runs.
/// Safe for concurrent run() calls on different segments; the invert->edit
/// order within a segment is the scheduler's responsibility.
class SegmentJobRunner final : public TaskRunner {
 public:
  SegmentJobRunner(Backend& backend, const SegmentPlan& plan, const FrameSource& source,
                   std::string prompt_tag)
      : backend_(backend), plan_(plan), source_(source), prompt_tag_(std::move(prompt_tag)) {
    validate_plan(plan_);
  }

  void run(const TaskSpec& task) override {
    const std::size_t idx = static_cast<std::size_t>(task.id.segment);
    if (idx >= plan_.segments.size())
      throw Error(Errc::BadConfig, "task references unknown segment " + to_string(task.id));
    const Segment& seg = plan_.segments[idx];
    if (task.id.stage == Stage::Invert) {
      InvertedSegment latents = backend_.invert(seg, gather_frames(source_, seg.frames));
      std::lock_guard<std::mutex> lock(mu_);
      inverted_[seg.id] = std::move(latents);
    } else {
      InvertedSegment latents;
      {
        std::lock_guard<std::mutex> lock(mu_);
        const auto it = inverted_.find(seg.id);
        if (it == inverted_.end())
          throw Error(Errc::ProtocolError,
                      "edit scheduled before invert for segment " + std::to_string(seg.id));
        latents = std::move(it->second);
        inverted_.erase(it);
      }
      EditedSegment edited = backend_.edit(seg, latents, gather_guides(source_, seg),
                                           prompt_tag_);
      std::lock_guard<std::mutex> lock(mu_);
      edited_[seg.id] = std::move(edited);
    }
  }

  /// Edited segments in id order; call after the schedule completes.
  std::vector<EditedSegment> take_edited() {
    std::lock_guard<std::mutex> lock(mu_);
    std::vector<EditedSegment> out;
    out.reserve(edited_.size());
    for (auto& [id, seg] : edited_) out.push_back(std::move(seg));
    edited_.clear();
    return out;
  }

 private:
  Backend& backend_;
  const SegmentPlan& plan_;
  const FrameSource& source_;
  std::string prompt_tag_;
  std::mutex mu_;
  std::map<int, InvertedSegment> inverted_;
  std::map<int, EditedSegment> edited_;
};

}  // namespace pipeflow
