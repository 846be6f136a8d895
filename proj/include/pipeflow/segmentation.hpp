#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "pipeflow/cost_model.hpp"
#include "pipeflow/error.hpp"
#include "pipeflow/scheduler.hpp"
#include "pipeflow/selection.hpp"

namespace pipeflow {

// ---------------------------------------------------------------------------
// Keyframe sampling policy
// ---------------------------------------------------------------------------

struct KeyframePolicy {
  enum class Mode { Sparse, Dense, Custom };
  Mode mode = Mode::Sparse;
  int stride = 10;

  static KeyframePolicy sparse() { return {Mode::Sparse, 10}; }
  static KeyframePolicy dense() { return {Mode::Dense, 2}; }
  static KeyframePolicy custom(int stride) {
    if (stride < 1) throw Error(Errc::BadConfig, "keyframe stride must be >= 1");
    return {Mode::Custom, stride};
  }

  std::string name() const {
    switch (mode) {
      case Mode::Sparse: return "sparse";
      case Mode::Dense: return "dense";
      default: return "custom:" + std::to_string(stride);
    }
  }

  /// Accepts "sparse", "dense", or a positive integer stride.
  static KeyframePolicy parse(const std::string& s) {
    if (s == "sparse") return sparse();
    if (s == "dense") return dense();
    std::string digits = s;
    if (s.rfind("custom:", 0) == 0) digits = s.substr(7);
    try {
      return custom(std::stoi(digits));
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      throw Error(Errc::BadConfig, "keyframe mode must be sparse, dense, or a stride: " + s);
    }
  }
};

// ---------------------------------------------------------------------------
// Segments
// ---------------------------------------------------------------------------

struct Segment {
  int id = 0;
  std::vector<std::size_t> frames;          // selected-frame indices, in order
  std::vector<std::size_t> keyframes;       // subset of frames
  std::vector<std::size_t> overlap_frames;  // trailing indices of segment id-1
};

struct SegmentPlan {
  std::vector<Segment> segments;
  KeyframePolicy keyframe_mode;
  int overlap = 0;
};

inline SegmentPlan plan_segments(const SelectionResult& selection, int seg_len,
                                 const KeyframePolicy& policy, int overlap) {
  validate_selection(selection);
  if (seg_len < 2) throw Error(Errc::BadConfig, "seg_len must be >= 2");
  if (overlap < 0) throw Error(Errc::BadConfig, "overlap must be >= 0");
  if (overlap >= seg_len) throw Error(Errc::BadConfig, "overlap must be < seg_len");
  if (policy.stride < 1) throw Error(Errc::BadConfig, "keyframe stride must be >= 1");

  const std::vector<std::size_t>& sel = selection.selected;
  SegmentPlan plan;
  plan.keyframe_mode = policy;
  plan.overlap = overlap;

  for (std::size_t begin = 0; begin < sel.size(); begin += static_cast<std::size_t>(seg_len)) {
    const std::size_t end = std::min(begin + static_cast<std::size_t>(seg_len), sel.size());
    Segment seg;
    seg.id = static_cast<int>(plan.segments.size());
    seg.frames.assign(sel.begin() + static_cast<std::ptrdiff_t>(begin),
                      sel.begin() + static_cast<std::ptrdiff_t>(end));
    plan.segments.push_back(std::move(seg));
  }
  // a length-1 tail would make a degenerate joint edit; fold it backward
  if (plan.segments.size() >= 2 && plan.segments.back().frames.size() == 1) {
    plan.segments[plan.segments.size() - 2].frames.push_back(plan.segments.back().frames[0]);
    plan.segments.pop_back();
  }

  for (std::size_t i = 0; i < plan.segments.size(); ++i) {
    Segment& seg = plan.segments[i];
    for (std::size_t k = 0; k < seg.frames.size(); k += static_cast<std::size_t>(policy.stride))
      seg.keyframes.push_back(seg.frames[k]);
    if (i > 0 && overlap > 0) {
      const std::vector<std::size_t>& prev = plan.segments[i - 1].frames;
      const std::size_t take = std::min(static_cast<std::size_t>(overlap), prev.size());
      seg.overlap_frames.assign(prev.end() - static_cast<std::ptrdiff_t>(take), prev.end());
    }
  }
  return plan;
}

inline void validate_plan(const SegmentPlan& plan) {
  if (plan.segments.empty()) throw Error(Errc::EmptyInput, "plan has no segments");
  for (std::size_t i = 0; i < plan.segments.size(); ++i) {
    const Segment& seg = plan.segments[i];
    if (seg.id != static_cast<int>(i)) throw Error(Errc::BadConfig, "segment ids must be 0..N-1");
    if (seg.frames.empty()) throw Error(Errc::EmptySegment, "segment " + std::to_string(i));
    if (seg.keyframes.empty() || seg.keyframes.front() != seg.frames.front())
      throw Error(Errc::BadConfig, "segment keyframes must start at the segment's first frame");
    if (i == 0 && !seg.overlap_frames.empty())
      throw Error(Errc::BadConfig, "segment 0 cannot carry overlap frames");
  }
}

// ---------------------------------------------------------------------------
// Plan -> schedulable task DAG
// ---------------------------------------------------------------------------

struct StageMemory {
  double invert = 1.0;
  double edit = 1.0;
};

/// Two tasks per segment with the single intra-segment edge invert -> edit.
/// Overlap frames enter the edit stage as extra guide cost, nothing else.
inline std::vector<TaskSpec> plan_to_tasks(const SegmentPlan& plan, const CostModelParams& cost,
                                           const StageMemory& mem = {}) {
  validate_plan(plan);
  validate_cost_params(cost);
  const auto units = [](double d) {
    return std::max<long long>(1, static_cast<long long>(std::llround(d)));
  };
  std::vector<TaskSpec> tasks;
  tasks.reserve(plan.segments.size() * 2);
  for (const Segment& seg : plan.segments) {
    const double frames = static_cast<double>(seg.frames.size());
    const double guides = static_cast<double>(seg.keyframes.size() + seg.overlap_frames.size());
    TaskSpec invert;
    invert.id = {seg.id, Stage::Invert};
    invert.mem_demand = mem.invert;
    invert.est_duration = units(invert_duration(cost, frames));
    TaskSpec edit;
    edit.id = {seg.id, Stage::Edit};
    edit.deps = {invert.id};
    edit.mem_demand = mem.edit;
    edit.est_duration = units(edit_duration(cost, guides, frames));
    tasks.push_back(std::move(invert));
    tasks.push_back(std::move(edit));
  }
  return tasks;
}

// ---------------------------------------------------------------------------
// JSON round trip
// ---------------------------------------------------------------------------

inline nlohmann::json plan_to_json(const SegmentPlan& plan) {
  nlohmann::json segments = nlohmann::json::array();
  for (const Segment& seg : plan.segments)
    segments.push_back({{"id", seg.id},
                        {"frames", seg.frames},
                        {"keyframes", seg.keyframes},
                        {"overlap_frames", seg.overlap_frames}});
  return nlohmann::json{{"segments", segments},
                        {"keyframe_mode", plan.keyframe_mode.name()},
                        {"overlap", plan.overlap}};
}

inline SegmentPlan plan_from_json(const nlohmann::json& j) {
  SegmentPlan plan;
  try {
    plan.keyframe_mode = KeyframePolicy::parse(j.at("keyframe_mode").get<std::string>());
    plan.overlap = j.at("overlap").get<int>();
    for (const auto& s : j.at("segments")) {
      Segment seg;
      seg.id = s.at("id").get<int>();
      seg.frames = s.at("frames").get<std::vector<std::size_t>>();
      seg.keyframes = s.at("keyframes").get<std::vector<std::size_t>>();
      seg.overlap_frames = s.at("overlap_frames").get<std::vector<std::size_t>>();
      plan.segments.push_back(std::move(seg));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::BadConfig, std::string("plan json: ") + e.what());
  }
  validate_plan(plan);
  return plan;
}

}  // namespace pipeflow
