#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pipeflow/cost_model.hpp"
#include "pipeflow/error.hpp"
#include "pipeflow/interpolation.hpp"
#include "pipeflow/scheduler.hpp"
#include "pipeflow/segmentation.hpp"
#include "pipeflow/selection.hpp"
#include "pipeflow/util.hpp"

namespace pipeflow {

// ---------------------------------------------------------------------------
// Trace serialization. The file carries tasks and pool alongside the trace so
// any consumer can re-validate and re-simulate without extra context.
// ---------------------------------------------------------------------------

inline nlohmann::json trace_to_json(const ScheduleTrace& trace) {
  nlohmann::json events = nlohmann::json::array();
  for (const TraceEvent& ev : trace.events)
    events.push_back({{"task", to_string(ev.task)},
                      {"worker", ev.worker},
                      {"start", ev.start},
                      {"end", ev.end},
                      {"arrival", ev.arrival},
                      {"mem_at_start", ev.mem_at_start}});
  nlohmann::json samples = nlohmann::json::array();
  for (const QueueSample& s : trace.queue_samples)
    samples.push_back(
        {{"time", s.time}, {"queue_length", s.queue_length}, {"in_flight", s.in_flight}});
  return nlohmann::json{
      {"events", events}, {"makespan", trace.makespan}, {"queue_samples", samples}};
}

inline ScheduleTrace trace_from_json(const nlohmann::json& j) {
  ScheduleTrace trace;
  try {
    for (const auto& e : j.at("events")) {
      TraceEvent ev;
      ev.task = parse_task_id(e.at("task").get<std::string>());
      ev.worker = e.at("worker").get<int>();
      ev.start = e.at("start").get<long long>();
      ev.end = e.at("end").get<long long>();
      ev.arrival = e.value("arrival", ev.start);
      ev.mem_at_start = e.value("mem_at_start", 0.0);
      trace.events.push_back(ev);
    }
    trace.makespan = j.at("makespan").get<long long>();
    for (const auto& s : j.value("queue_samples", nlohmann::json::array())) {
      QueueSample q;
      q.time = s.at("time").get<long long>();
      q.queue_length = s.at("queue_length").get<std::size_t>();
      q.in_flight = s.at("in_flight").get<std::size_t>();
      trace.queue_samples.push_back(q);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::BadConfig, std::string("trace json: ") + e.what());
  }
  return trace;
}

inline nlohmann::json tasks_to_json(const std::vector<TaskSpec>& tasks) {
  nlohmann::json out = nlohmann::json::array();
  for (const TaskSpec& t : tasks) {
    nlohmann::json deps = nlohmann::json::array();
    for (const TaskId& d : t.deps) deps.push_back(to_string(d));
    out.push_back({{"id", to_string(t.id)},
                   {"deps", deps},
                   {"mem_demand", t.mem_demand},
                   {"est_duration", t.est_duration}});
  }
  return out;
}

inline std::vector<TaskSpec> tasks_from_json(const nlohmann::json& j) {
  std::vector<TaskSpec> tasks;
  try {
    for (const auto& e : j) {
      TaskSpec t;
      t.id = parse_task_id(e.at("id").get<std::string>());
      for (const auto& d : e.at("deps")) t.deps.push_back(parse_task_id(d.get<std::string>()));
      t.mem_demand = e.at("mem_demand").get<double>();
      t.est_duration = e.at("est_duration").get<long long>();
      tasks.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::BadConfig, std::string("tasks json: ") + e.what());
  }
  return tasks;
}

inline nlohmann::json pool_to_json(const ResourcePool& pool) {
  nlohmann::json workers = nlohmann::json::array();
  for (const Worker& w : pool.workers) workers.push_back(w.capacity);
  return nlohmann::json{{"workers", workers},
                        {"max_jobs", pool.max_jobs},
                        {"mem_threshold", pool.mem_threshold}};
}

inline ResourcePool pool_from_json(const nlohmann::json& j) {
  ResourcePool pool;
  try {
    for (const auto& c : j.at("workers")) pool.workers.push_back({c.get<double>()});
    pool.max_jobs = j.at("max_jobs").get<int>();
    pool.mem_threshold = j.at("mem_threshold").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::BadConfig, std::string("pool json: ") + e.what());
  }
  validate_pool(pool);
  return pool;
}

/// A trace file bundles the trace with the tasks and pool that produced it, so
/// a consumer can re-validate or re-simulate from the file alone.
struct ScheduleFile {
  ScheduleTrace trace;
  std::vector<TaskSpec> tasks;
  ResourcePool pool;
};

inline nlohmann::json schedule_file_to_json(const ScheduleTrace& trace,
                                            const std::vector<TaskSpec>& tasks,
                                            const ResourcePool& pool) {
  nlohmann::json j = trace_to_json(trace);
  j["tasks"] = tasks_to_json(tasks);
  j["pool"] = pool_to_json(pool);
  return j;
}

inline ScheduleFile schedule_file_from_json(const nlohmann::json& j) {
  ScheduleFile f;
  f.trace = trace_from_json(j);
  try {
    f.tasks = tasks_from_json(j.at("tasks"));
    f.pool = pool_from_json(j.at("pool"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::BadConfig, std::string("trace file: ") + e.what());
  }
  return f;
}

// ---------------------------------------------------------------------------
// Scaling sweep
// ---------------------------------------------------------------------------

struct ScalingRow {
  int workers = 0;
  long long makespan = 0;
  double speedup = 1.0;  // relative to the 1-worker run
};

/// Re-simulates the same workload with varying worker counts. Workers are
/// clones of the template pool's first worker; MJ and MEM carry over, with MJ
/// raised to at least the worker count so the pool itself is the limit.
inline std::vector<ScalingRow> scaling_sweep(const std::vector<TaskSpec>& tasks,
                                             const ResourcePool& pool_template,
                                             const std::vector<int>& worker_counts) {
  validate_pool(pool_template);
  if (worker_counts.empty()) throw Error(Errc::BadConfig, "worker_counts must be non-empty");
  for (int k : worker_counts)
    if (k < 1) throw Error(Errc::BadConfig, "worker counts must be >= 1");

  const double capacity = pool_template.workers.front().capacity;
  const auto pool_for = [&](int k) {
    ResourcePool p = make_pool(k, capacity, std::max(pool_template.max_jobs, k),
                               pool_template.mem_threshold);
    return p;
  };
  const long long base = simulate_schedule(tasks, pool_for(1)).makespan;

  std::vector<ScalingRow> rows;
  rows.reserve(worker_counts.size());
  for (int k : worker_counts) {
    ScalingRow row;
    row.workers = k;
    row.makespan = simulate_schedule(tasks, pool_for(k)).makespan;
    row.speedup = row.makespan > 0 ? static_cast<double>(base) / static_cast<double>(row.makespan)
                                   : 1.0;
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Per-worker utilization
// ---------------------------------------------------------------------------

struct WorkerUtilization {
  int worker = 0;
  long long invert_busy = 0;
  long long edit_busy = 0;
  double utilization = 0.0;  // busy fraction of the makespan
};

inline std::vector<WorkerUtilization> utilization_from_trace(const ScheduleTrace& trace,
                                                             std::size_t worker_count) {
  std::vector<WorkerUtilization> out(worker_count);
  for (std::size_t w = 0; w < worker_count; ++w) out[w].worker = static_cast<int>(w);
  for (const TraceEvent& ev : trace.events) {
    if (ev.worker < 0 || static_cast<std::size_t>(ev.worker) >= worker_count) continue;
    auto& u = out[static_cast<std::size_t>(ev.worker)];
    (ev.task.stage == Stage::Invert ? u.invert_busy : u.edit_busy) += ev.end - ev.start;
  }
  if (trace.makespan > 0)
    for (auto& u : out)
      u.utilization = static_cast<double>(u.invert_busy + u.edit_busy) /
                      static_cast<double>(trace.makespan);
  return out;
}

// ---------------------------------------------------------------------------
// Run report
// ---------------------------------------------------------------------------

struct RunReport {
  nlohmann::json config;  // snapshot of every knob the run used
  SelectionReport selection;
  std::string keyframe_mode;
  int overlap = 0;
  std::vector<std::size_t> segment_sizes;
  std::vector<std::size_t> keyframe_counts;
  long long makespan = 0;
  TimePredictions predictions;
  double speedup_vs_serial = 1.0;
  QueueStats queue;
  double littles_residual = 0.0;
  BorderMetrics borders;
  std::vector<WorkerUtilization> utilization;
  std::vector<ScalingRow> scaling;
  ScheduleTrace trace;  // raw provenance for every derived number above
  std::size_t trace_violations = 0;
};

inline nlohmann::json report_to_json(const RunReport& r) {
  nlohmann::json util = nlohmann::json::array();
  for (const WorkerUtilization& u : r.utilization)
    util.push_back({{"worker", u.worker},
                    {"invert_busy", u.invert_busy},
                    {"edit_busy", u.edit_busy},
                    {"utilization", u.utilization}});
  nlohmann::json scaling = nlohmann::json::array();
  for (const ScalingRow& row : r.scaling)
    scaling.push_back(
        {{"workers", row.workers}, {"makespan", row.makespan}, {"speedup", row.speedup}});
  nlohmann::json borders = nlohmann::json::array();
  for (std::size_t i = 0; i < r.borders.mse.size(); ++i)
    borders.push_back({{"border", i}, {"mse", r.borders.mse[i]}, {"ssim", r.borders.ssim[i]}});

  return nlohmann::json{
      {"config", r.config},
      {"selection",
       {{"total_frames", r.selection.total_frames},
        {"kept", r.selection.kept_count},
        {"skipped", r.selection.skipped_count},
        {"skip_ratio", r.selection.skip_ratio},
        {"tau_s", r.selection.config.tau_s},
        {"tau_f", r.selection.config.tau_f}}},
      {"plan",
       {{"segments", r.segment_sizes.size()},
        {"segment_sizes", r.segment_sizes},
        {"keyframe_counts", r.keyframe_counts},
        {"keyframe_mode", r.keyframe_mode},
        {"overlap", r.overlap}}},
      {"makespan", r.makespan},
      {"predicted",
       {{"t_serial_paper", r.predictions.t_serial_paper},
        {"t_async_paper", r.predictions.t_async_paper},
        {"t_serial_sum", r.predictions.t_serial_sum},
        {"pipeline_bound", r.predictions.pipeline_bound}}},
      {"speedup_vs_serial", r.speedup_vs_serial},
      {"queue",
       {{"lambda", r.queue.lambda},
        {"W", r.queue.W},
        {"L", r.queue.L},
        {"littles_residual", r.littles_residual}}},
      {"borders",
       {{"per_border", borders},
        {"mean_mse", r.borders.mean_mse},
        {"mean_ssim", r.borders.mean_ssim}}},
      {"utilization", util},
      {"scaling", scaling},
      {"trace", trace_to_json(r.trace)},
      {"trace_violations", r.trace_violations}};
}

inline constexpr const char* kReportFileName = "report.json";

namespace detail {

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw Error(Errc::WriteError, path.string() + ": cannot open for writing");
  out << text;
  if (!out) throw Error(Errc::WriteError, path.string() + ": write failed");
}

}  // namespace detail

/// Writes report.json plus the scaling/queue/border tables. Field order and
/// float formatting are deterministic, so identical runs emit identical bytes.
inline void emit_report(const RunReport& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::WriteError, dir.string() + ": " + ec.message());

  detail::write_text_file(dir / kReportFileName, report_to_json(r).dump(2) + "\n");

  std::string scaling = "workers,makespan,speedup\n";
  for (const ScalingRow& row : r.scaling)
    scaling += std::to_string(row.workers) + "," + std::to_string(row.makespan) + "," +
               format_double(row.speedup) + "\n";
  detail::write_text_file(dir / "scaling.csv", scaling);

  std::string queue = "time,queue_length,in_flight\n";
  for (const QueueSample& s : r.trace.queue_samples)
    queue += std::to_string(s.time) + "," + std::to_string(s.queue_length) + "," +
             std::to_string(s.in_flight) + "\n";
  detail::write_text_file(dir / "queue.csv", queue);

  std::string borders = "border,mse,ssim\n";
  for (std::size_t i = 0; i < r.borders.mse.size(); ++i)
    borders += std::to_string(i) + "," + format_double(r.borders.mse[i]) + "," +
               format_double(r.borders.ssim[i]) + "\n";
  detail::write_text_file(dir / "borders.csv", borders);
}

}  // namespace pipeflow
