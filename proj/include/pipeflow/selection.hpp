#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "pipeflow/error.hpp"
#include "pipeflow/frame.hpp"
#include "pipeflow/motion.hpp"
#include "pipeflow/util.hpp"

namespace pipeflow {

struct SelectionConfig {
  double tau_s = 0.95;  // SSIM threshold
  double tau_f = 0.5;   // mean flow magnitude threshold, pixels
};

inline void validate_selection_config(const SelectionConfig& cfg) {
  if (!(cfg.tau_s > 0.0 && cfg.tau_s <= 1.0))
    throw Error(Errc::BadConfig, "tau_s must be in (0, 1]");
  if (!(cfg.tau_f >= 0.0)) throw Error(Errc::BadConfig, "tau_f must be >= 0");
}

/// Both comparisons strict: equality with a threshold means no motion.
inline bool motion_detected(const MotionMetrics& m, const SelectionConfig& cfg) {
  return m.ssim < cfg.tau_s || m.mean_flow_magnitude > cfg.tau_f;
}

/// A maximal gap of skipped frames, identified by the kept frames around it.
struct SkippedRun {
  std::size_t before = 0;  // kept index t
  std::size_t after = 0;   // kept index t + k, k >= 2

  std::size_t gap() const { return after - before - 1; }  // frames to synthesize
};

struct SelectionResult {
  std::vector<std::size_t> selected;  // strictly increasing, starts 0, ends n
  std::vector<SkippedRun> skipped_runs;
  std::vector<MotionMetrics> per_transition_metrics;  // one per (t, t+1), t in [0, n)
  SelectionConfig config;
};

namespace detail {

inline std::vector<SkippedRun> runs_from_selected(const std::vector<std::size_t>& selected) {
  std::vector<SkippedRun> runs;
  for (std::size_t i = 1; i < selected.size(); ++i)
    if (selected[i] - selected[i - 1] >= 2) runs.push_back({selected[i - 1], selected[i]});
  return runs;
}

}  // namespace detail

/// Walks consecutive frame pairs, keeping frame t whenever motion is detected
/// between t-1 and t. Frame 0 and the final frame are always kept.
inline SelectionResult select_frames(const FrameSource& video, const SelectionConfig& cfg = {},
                                     const FlowConfig& flow_cfg = {}) {
  validate_selection_config(cfg);
  validate_flow_config(flow_cfg);
  const std::size_t count = video.frame_count();
  if (count < 2) throw Error(Errc::EmptyInput, "selection needs at least 2 frames");
  const std::size_t n = count - 1;

  SelectionResult res;
  res.config = cfg;
  res.selected.push_back(0);

  Frame prev;
  try {
    prev = video.frame(0);
  } catch (const std::exception& e) {
    throw Error(Errc::SelectionAborted, std::string("frame 0: ") + e.what());
  }
  for (std::size_t t = 1; t <= n; ++t) {
    Frame cur;
    MotionMetrics m;
    try {
      cur = video.frame(t);
      m = compute_motion_metrics(prev, cur, flow_cfg);
    } catch (const std::exception& e) {
      throw Error(Errc::SelectionAborted, "frame " + std::to_string(t) + ": " + e.what());
    }
    res.per_transition_metrics.push_back(m);
    if (motion_detected(m, cfg)) res.selected.push_back(t);
    prev = std::move(cur);
  }
  if (res.selected.back() != n) res.selected.push_back(n);
  res.skipped_runs = detail::runs_from_selected(res.selected);
  return res;
}

inline void validate_selection(const SelectionResult& res) {
  if (res.selected.empty()) throw Error(Errc::EmptyInput, "selection has no frames");
  if (res.selected.front() != 0)
    throw Error(Errc::BadConfig, "selection must include frame 0");
  for (std::size_t i = 1; i < res.selected.size(); ++i)
    if (res.selected[i] <= res.selected[i - 1])
      throw Error(Errc::BadConfig, "selected indices must be strictly increasing");
}

// ---------------------------------------------------------------------------
// Reporting
// ---------------------------------------------------------------------------

struct SelectionReport {
  std::size_t total_frames = 0;
  std::size_t kept_count = 0;
  std::size_t skipped_count = 0;
  double skip_ratio = 0.0;
  SelectionConfig config;
};

inline SelectionReport selection_report(const SelectionResult& res) {
  validate_selection(res);
  SelectionReport r;
  r.total_frames = res.selected.back() + 1;
  r.kept_count = res.selected.size();
  r.skipped_count = r.total_frames - r.kept_count;
  r.skip_ratio = static_cast<double>(r.skipped_count) / static_cast<double>(r.total_frames);
  r.config = res.config;
  return r;
}

/// Per-transition metric table; `t` is the first frame of the pair.
inline std::string selection_metrics_csv(const SelectionResult& res) {
  std::string out = "t,ssim,mf\n";
  for (const MotionMetrics& m : res.per_transition_metrics) {
    out += std::to_string(m.frame_t);
    out += ',';
    out += format_double(m.ssim);
    out += ',';
    out += format_double(m.mean_flow_magnitude);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON round trip
// ---------------------------------------------------------------------------

inline nlohmann::json selection_to_json(const SelectionResult& res) {
  nlohmann::json runs = nlohmann::json::array();
  for (const SkippedRun& r : res.skipped_runs) runs.push_back({r.before, r.after});
  nlohmann::json metrics = nlohmann::json::array();
  for (const MotionMetrics& m : res.per_transition_metrics)
    metrics.push_back(
        {{"t", m.frame_t}, {"ssim", m.ssim}, {"mf", m.mean_flow_magnitude}});
  return nlohmann::json{{"selected", res.selected},
                        {"skipped_runs", runs},
                        {"metrics", metrics},
                        {"tau_s", res.config.tau_s},
                        {"tau_f", res.config.tau_f}};
}

inline SelectionResult selection_from_json(const nlohmann::json& j) {
  SelectionResult res;
  try {
    res.selected = j.at("selected").get<std::vector<std::size_t>>();
    for (const auto& r : j.at("skipped_runs"))
      res.skipped_runs.push_back({r.at(0).get<std::size_t>(), r.at(1).get<std::size_t>()});
    for (const auto& m : j.at("metrics")) {
      MotionMetrics mm;
      mm.frame_t = m.at("t").get<std::size_t>();
      mm.frame_t_next = mm.frame_t + 1;
      mm.ssim = m.at("ssim").get<double>();
      mm.mean_flow_magnitude = m.at("mf").get<double>();
      res.per_transition_metrics.push_back(mm);
    }
    if (j.contains("tau_s")) res.config.tau_s = j.at("tau_s").get<double>();
    if (j.contains("tau_f")) res.config.tau_f = j.at("tau_f").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::BadConfig, std::string("selection json: ") + e.what());
  }
  validate_selection(res);
  return res;
}

}  // namespace pipeflow
