#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pipeflow/analytics.hpp"
#include "pipeflow/backends.hpp"
#include "pipeflow/error.hpp"
#include "pipeflow/frameio.hpp"
#include "pipeflow/interpolation.hpp"
#include "pipeflow/motion.hpp"
#include "pipeflow/scheduler.hpp"
#include "pipeflow/segmentation.hpp"
#include "pipeflow/selection.hpp"

namespace pipeflow {

struct PipelineConfig {
  std::filesystem::path input_dir;
  std::filesystem::path output_dir;
  std::filesystem::path report_dir;

  SelectionConfig selection;
  FlowConfig flow;

  int seg_len = 32;
  KeyframePolicy keyframes = KeyframePolicy::sparse();
  int overlap = 0;

  ResourcePool pool = make_pool(2, 16.0, 2, 0.0);
  StageMemory stage_mem{4.0, 8.0};
  CostModelParams cost;
  ScheduleMode mode = ScheduleMode::Simulated;

  std::string backend = "stylize:posterize";
  std::string prompt_tag = "default";
  bool interpolate = true;
  // every stage is deterministic today; the seed is recorded and threaded so
  // future randomized tie-breaking stays reproducible
  std::uint64_t seed = 0;
  // realtime mock backends sleep this long per cost unit; simulated runs never sleep
  std::chrono::microseconds mock_sleep_per_unit{1000};
};

struct PipelineResult {
  VideoManifest input_manifest;
  SelectionResult selection;
  SegmentPlan plan;
  std::vector<TaskSpec> tasks;
  ScheduleTrace trace;
  std::vector<TraceViolation> violations;
  RunReport report;
  std::vector<Frame> output_frames;
};

namespace detail {

inline nlohmann::json pipeline_config_json(const PipelineConfig& cfg) {
  return nlohmann::json{{"input_dir", cfg.input_dir.string()},
                        {"output_dir", cfg.output_dir.string()},
                        {"report_dir", cfg.report_dir.string()},
                        {"tau_s", cfg.selection.tau_s},
                        {"tau_f", cfg.selection.tau_f},
                        {"flow_pyramid_levels", cfg.flow.pyramid_levels},
                        {"flow_window", cfg.flow.window},
                        {"flow_iterations", cfg.flow.iterations},
                        {"seg_len", cfg.seg_len},
                        {"keyframes", cfg.keyframes.name()},
                        {"overlap", cfg.overlap},
                        {"workers", cfg.pool.workers.size()},
                        {"worker_capacity",
                         cfg.pool.workers.empty() ? 0.0 : cfg.pool.workers.front().capacity},
                        {"max_jobs", cfg.pool.max_jobs},
                        {"mem_threshold", cfg.pool.mem_threshold},
                        {"invert_mem", cfg.stage_mem.invert},
                        {"edit_mem", cfg.stage_mem.edit},
                        {"cost_T", cfg.cost.T},
                        {"cost_n", cfg.cost.n},
                        {"cost_d", cfg.cost.d},
                        {"cost_unit", cfg.cost.unit_cost},
                        {"mode", cfg.mode == ScheduleMode::Simulated ? "simulated" : "realtime"},
                        {"backend", cfg.backend},
                        {"prompt_tag", cfg.prompt_tag},
                        {"interpolate", cfg.interpolate},
                        {"seed", cfg.seed}};
}

/// Edited selected frames -> full-length output. Each skipped run is filled by
/// recursive bisection between the edited frames bracketing it.
inline std::vector<Frame> fill_skipped_frames(const SelectionResult& selection,
                                              std::vector<Frame> edited,
                                              const FlowConfig& flow_cfg) {
  const std::vector<std::size_t>& sel = selection.selected;
  if (edited.size() != sel.size())
    throw Error(Errc::DimensionMismatch,
                "edited frame count " + std::to_string(edited.size()) +
                    " does not match selection size " + std::to_string(sel.size()));

  const std::size_t total = sel.back() + 1;
  std::vector<Frame> out(total);
  std::map<std::size_t, std::size_t> pos_of;  // original index -> position in selection
  for (std::size_t i = 0; i < sel.size(); ++i) pos_of[sel[i]] = i;

  for (const SkippedRun& run : selection.skipped_runs) {
    InterpolationRequest req;
    req.frame_a = edited[pos_of.at(run.before)];
    req.frame_b = edited[pos_of.at(run.after)];
    req.count = static_cast<int>(run.gap());
    std::vector<Frame> synth = interpolate_recursive(req, flow_cfg);
    for (std::size_t k = 0; k < synth.size(); ++k)
      out[run.before + 1 + k] = std::move(synth[k]);
  }
  for (std::size_t i = 0; i < sel.size(); ++i) out[sel[i]] = std::move(edited[i]);
  for (std::size_t i = 0; i < total; ++i) out[i].index = i;
  return out;
}

}  // namespace detail

/// End-to-end run: read -> select -> plan -> schedule+edit -> smooth -> fill
/// skipped frames -> write frames and report. Throws on any hard failure; a
/// valid result may still carry trace violations (counted in the report).
inline PipelineResult run_pipeline(const PipelineConfig& cfg) {
  validate_pool(cfg.pool);
  validate_cost_params(cfg.cost);

  SequenceReader reader = SequenceReader::open(cfg.input_dir);
  std::vector<Frame> all_frames;
  all_frames.reserve(reader.frame_count());
  for (std::size_t i = 0; i < reader.frame_count(); ++i) all_frames.push_back(reader.frame(i));
  MemoryFrameSource source(std::move(all_frames));

  PipelineResult res;
  res.input_manifest = reader.manifest();
  res.selection = select_frames(source, cfg.selection, cfg.flow);
  res.plan = plan_segments(res.selection, cfg.seg_len, cfg.keyframes, cfg.overlap);
  res.tasks = plan_to_tasks(res.plan, cfg.cost, cfg.stage_mem);

  auto backend = make_backend(cfg.backend, cfg.cost,
                              cfg.mode == ScheduleMode::Realtime ? cfg.mock_sleep_per_unit
                                                                 : std::chrono::microseconds(0));
  std::vector<EditedSegment> edited;
  if (cfg.mode == ScheduleMode::Simulated) {
    res.trace = simulate_schedule(res.tasks, cfg.pool);
    edited = execute_plan(*backend, res.plan, source, cfg.prompt_tag);
  } else {
    SegmentJobRunner runner(*backend, res.plan, source, cfg.prompt_tag);
    res.trace = run_schedule_realtime(res.tasks, cfg.pool, runner);
    edited = runner.take_edited();
  }
  res.violations = validate_trace(res.trace, res.tasks, cfg.pool);

  std::vector<std::vector<Frame>> seg_frames;
  seg_frames.reserve(edited.size());
  for (EditedSegment& seg : edited) seg_frames.push_back(std::move(seg.frames));

  // Border agreement is measured on the segments as edited, before the
  // smoothing pass rewrites the frames at each border.
  const BorderMetrics borders = border_consistency(seg_frames, cfg.flow);
  std::vector<Frame> selected_out = smooth_borders(seg_frames, cfg.flow);

  if (cfg.interpolate) {
    res.output_frames =
        detail::fill_skipped_frames(res.selection, std::move(selected_out), cfg.flow);
  } else {
    res.output_frames = std::move(selected_out);
    for (std::size_t i = 0; i < res.output_frames.size(); ++i) res.output_frames[i].index = i;
  }
  write_sequence(res.output_frames, cfg.output_dir, res.input_manifest.fps_num,
                 res.input_manifest.fps_den);

  // ---- report -------------------------------------------------------------
  RunReport& rep = res.report;
  rep.config = detail::pipeline_config_json(cfg);
  rep.selection = selection_report(res.selection);
  rep.keyframe_mode = cfg.keyframes.name();
  rep.overlap = cfg.overlap;
  for (const Segment& seg : res.plan.segments) {
    rep.segment_sizes.push_back(seg.frames.size());
    rep.keyframe_counts.push_back(seg.keyframes.size());
  }
  rep.makespan = res.trace.makespan;

  CostModelParams pred = cfg.cost;
  pred.B = static_cast<double>(res.plan.segments.size());
  pred.N1 = pred.B;
  pred.N2 = pred.B;
  pred.F = static_cast<double>(rep.selection.total_frames);
  double invert_sum = 0.0, edit_sum = 0.0, key_sum = 0.0;
  for (const TaskSpec& t : res.tasks)
    (t.id.stage == Stage::Invert ? invert_sum : edit_sum) +=
        static_cast<double>(t.est_duration);
  for (std::size_t c : rep.keyframe_counts) key_sum += static_cast<double>(c);
  pred.T1 = std::max(1.0, invert_sum / pred.N1);
  pred.T2 = std::max(1.0, edit_sum / pred.N2);
  pred.K = std::max(1.0, key_sum / pred.B);
  rep.predictions = predict_times(pred);

  rep.speedup_vs_serial = 1.0;
  if (res.trace.makespan > 0)
    rep.speedup_vs_serial =
        (invert_sum + edit_sum) / static_cast<double>(res.trace.makespan);
  rep.queue = queue_stats(res.trace);
  rep.littles_residual = littles_law_residual(rep.queue);
  rep.borders = borders;
  rep.utilization = utilization_from_trace(res.trace, cfg.pool.workers.size());
  rep.scaling = scaling_sweep(res.tasks, cfg.pool, {1, 2, 4, 8});
  rep.trace = res.trace;
  rep.trace_violations = res.violations.size();

  emit_report(rep, cfg.report_dir);
  detail::write_text_file(cfg.report_dir / "trace.json",
                          schedule_file_to_json(res.trace, res.tasks, cfg.pool).dump(2) + "\n");
  return res;
}

}  // namespace pipeflow
