#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <queue>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "pipeflow/error.hpp"

namespace pipeflow {

// ---------------------------------------------------------------------------
// Task model
// ---------------------------------------------------------------------------

enum class Stage { Invert, Edit };

inline const char* stage_name(Stage s) { return s == Stage::Invert ? "invert" : "edit"; }

struct TaskId {
  int segment = 0;
  Stage stage = Stage::Invert;

  friend bool operator==(const TaskId&, const TaskId&) = default;
  friend auto operator<=>(const TaskId&, const TaskId&) = default;
};

inline std::string to_string(const TaskId& id) {
  return std::string(stage_name(id.stage)) + ":" + std::to_string(id.segment);
}

inline TaskId parse_task_id(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw Error(Errc::BadConfig, "task id needs stage:segment");
  const std::string stage = s.substr(0, colon);
  TaskId id;
  if (stage == "invert") id.stage = Stage::Invert;
  else if (stage == "edit") id.stage = Stage::Edit;
  else throw Error(Errc::BadConfig, "unknown stage in task id: " + s);
  try {
    id.segment = std::stoi(s.substr(colon + 1));
  } catch (const std::exception&) {
    throw Error(Errc::BadConfig, "bad segment number in task id: " + s);
  }
  return id;
}

struct TaskSpec {
  TaskId id;
  std::vector<TaskId> deps;
  double mem_demand = 1.0;
  long long est_duration = 1;  // simulated time units; a hint in realtime mode
};

// ---------------------------------------------------------------------------
// Resources
// ---------------------------------------------------------------------------

struct Worker {
  double capacity = 1.0;  // memory units
};

struct ResourcePool {
  std::vector<Worker> workers;
  int max_jobs = 1;            // MJ: global concurrent-job cap
  double mem_threshold = 0.0;  // MEM: minimum free memory to admit any job
};

inline ResourcePool make_pool(int workers, double capacity, int max_jobs, double mem_threshold) {
  ResourcePool p;
  p.workers.assign(static_cast<std::size_t>(std::max(workers, 0)), Worker{capacity});
  p.max_jobs = max_jobs;
  p.mem_threshold = mem_threshold;
  return p;
}

inline void validate_pool(const ResourcePool& pool) {
  if (pool.workers.empty()) throw Error(Errc::BadConfig, "pool needs at least one worker");
  for (const Worker& w : pool.workers)
    if (!(w.capacity > 0.0)) throw Error(Errc::BadConfig, "worker capacity must be > 0");
  if (pool.max_jobs < 1) throw Error(Errc::BadConfig, "max_jobs must be >= 1");
  if (pool.mem_threshold < 0.0) throw Error(Errc::BadConfig, "mem_threshold must be >= 0");
}

// ---------------------------------------------------------------------------
// Trace
// ---------------------------------------------------------------------------

struct TraceEvent {
  TaskId task;
  int worker = 0;
  long long start = 0;
  long long end = 0;
  long long arrival = 0;      // when the task entered the ready queue
  double mem_at_start = 0.0;  // worker free memory at admission
};

struct QueueSample {
  long long time = 0;
  std::size_t queue_length = 0;  // ready, not yet started
  std::size_t in_flight = 0;     // started, not yet finished
};

struct ScheduleTrace {
  std::vector<TraceEvent> events;
  long long makespan = 0;
  std::vector<QueueSample> queue_samples;
};

/// Executes one task for its (wall-clock) duration. Implementations must be
/// safe for concurrent calls on different tasks.
class TaskRunner {
 public:
  virtual ~TaskRunner() = default;
  virtual void run(const TaskSpec& task) = 0;
};

/// Raised when a backend failure aborts part of the schedule; carries the
/// trace of everything that did run plus the failed/cancelled task ids.
class PartialTraceError : public Error {
 public:
  PartialTraceError(ScheduleTrace trace, std::vector<TaskId> failed, std::vector<TaskId> cancelled,
                    const std::string& message)
      : Error(Errc::PartialTrace, message),
        trace(std::move(trace)),
        failed_tasks(std::move(failed)),
        cancelled_tasks(std::move(cancelled)) {}

  ScheduleTrace trace;
  std::vector<TaskId> failed_tasks;
  std::vector<TaskId> cancelled_tasks;
};

// ---------------------------------------------------------------------------
// Shared scheduling machinery
// ---------------------------------------------------------------------------

namespace detail {

struct TaskGraph {
  std::vector<std::size_t> indegree;
  std::vector<std::vector<std::size_t>> dependents;
  std::map<TaskId, std::size_t> index_of;
};

inline TaskGraph build_task_graph(const std::vector<TaskSpec>& tasks) {
  if (tasks.empty()) throw Error(Errc::EmptyInput, "no tasks to schedule");
  TaskGraph g;
  g.indegree.assign(tasks.size(), 0);
  g.dependents.assign(tasks.size(), {});
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (tasks[i].est_duration < 0)
      throw Error(Errc::BadConfig, "negative duration for " + to_string(tasks[i].id));
    if (!(tasks[i].mem_demand >= 0.0))
      throw Error(Errc::BadConfig, "negative memory demand for " + to_string(tasks[i].id));
    if (!g.index_of.emplace(tasks[i].id, i).second)
      throw Error(Errc::BadConfig, "duplicate task id " + to_string(tasks[i].id));
  }
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    for (const TaskId& dep : tasks[i].deps) {
      const auto it = g.index_of.find(dep);
      if (it == g.index_of.end())
        throw Error(Errc::BadConfig,
                    to_string(tasks[i].id) + " depends on unknown task " + to_string(dep));
      g.dependents[it->second].push_back(i);
      ++g.indegree[i];
    }
  }
  // Kahn's algorithm purely as a cycle check.
  std::vector<std::size_t> indeg = g.indegree;
  std::vector<std::size_t> frontier;
  for (std::size_t i = 0; i < tasks.size(); ++i)
    if (indeg[i] == 0) frontier.push_back(i);
  std::size_t seen = 0;
  while (!frontier.empty()) {
    const std::size_t cur = frontier.back();
    frontier.pop_back();
    ++seen;
    for (std::size_t next : g.dependents[cur])
      if (--indeg[next] == 0) frontier.push_back(next);
  }
  if (seen != tasks.size()) throw Error(Errc::CycleError, "task dependencies contain a cycle");
  return g;
}

inline void check_schedulable(const std::vector<TaskSpec>& tasks, const ResourcePool& pool) {
  double max_cap = 0.0;
  for (const Worker& w : pool.workers) max_cap = std::max(max_cap, w.capacity);
  for (const TaskSpec& t : tasks) {
    if (std::max(t.mem_demand, pool.mem_threshold) > max_cap)
      throw Error(Errc::Unschedulable, to_string(t.id) + " needs " +
                                           std::to_string(std::max(t.mem_demand,
                                                                   pool.mem_threshold)) +
                                           " memory units but the largest worker has " +
                                           std::to_string(max_cap));
  }
}

/// Admission priority: ready edits outrank ready inverts; within a class,
/// lower segment id first.
inline void sort_ready(std::vector<std::size_t>& ready, const std::vector<TaskSpec>& tasks) {
  std::sort(ready.begin(), ready.end(), [&](std::size_t a, std::size_t b) {
    const TaskId& ta = tasks[a].id;
    const TaskId& tb = tasks[b].id;
    const bool edit_a = ta.stage == Stage::Edit;
    const bool edit_b = tb.stage == Stage::Edit;
    if (edit_a != edit_b) return edit_a;
    if (ta.segment != tb.segment) return ta.segment < tb.segment;
    return ta.stage < tb.stage;
  });
}

/// First idle worker (by id) whose free memory covers both the demand and the
/// admission threshold. Workers run one job at a time, so free memory of an
/// idle worker is its full capacity.
inline int pick_worker(const std::vector<bool>& busy, const ResourcePool& pool, double demand) {
  const double need = std::max(demand, pool.mem_threshold);
  for (std::size_t w = 0; w < pool.workers.size(); ++w)
    if (!busy[w] && pool.workers[w].capacity >= need) return static_cast<int>(w);
  return -1;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Simulated scheduling: deterministic discrete-event loop, integer time
// ---------------------------------------------------------------------------

inline ScheduleTrace simulate_schedule(const std::vector<TaskSpec>& tasks,
                                       const ResourcePool& pool) {
  validate_pool(pool);
  detail::TaskGraph graph = detail::build_task_graph(tasks);
  detail::check_schedulable(tasks, pool);

  const std::size_t n = tasks.size();
  std::vector<std::size_t> pending = graph.indegree;
  std::vector<long long> arrival(n, 0);
  std::vector<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (pending[i] == 0) ready.push_back(i);

  std::vector<bool> busy(pool.workers.size(), false);
  // completion heap ordered by (end time, task index) so pops are deterministic
  using Completion = std::pair<long long, std::pair<std::size_t, int>>;  // end, (task, worker)
  std::priority_queue<Completion, std::vector<Completion>, std::greater<>> running;

  ScheduleTrace trace;
  std::size_t done = 0;
  long long now = 0;

  const auto admit = [&](long long t) {
    detail::sort_ready(ready, tasks);
    std::vector<std::size_t> still_waiting;
    for (std::size_t pos = 0; pos < ready.size(); ++pos) {
      const std::size_t idx = ready[pos];
      if (static_cast<int>(running.size()) >= pool.max_jobs) {
        still_waiting.insert(still_waiting.end(), ready.begin() + static_cast<std::ptrdiff_t>(pos),
                             ready.end());
        break;
      }
      const int w = detail::pick_worker(busy, pool, tasks[idx].mem_demand);
      if (w < 0) {  // no worker fits now; scan past it (backfill)
        still_waiting.push_back(idx);
        continue;
      }
      busy[static_cast<std::size_t>(w)] = true;
      TraceEvent ev;
      ev.task = tasks[idx].id;
      ev.worker = w;
      ev.start = t;
      ev.end = t + tasks[idx].est_duration;
      ev.arrival = arrival[idx];
      ev.mem_at_start = pool.workers[static_cast<std::size_t>(w)].capacity;
      trace.events.push_back(ev);
      running.push({ev.end, {idx, w}});
    }
    ready = std::move(still_waiting);
    trace.queue_samples.push_back({t, ready.size(), running.size()});
  };

  admit(now);
  while (done < n) {
    if (running.empty())
      throw Error(Errc::Unschedulable, "scheduler stalled with tasks still pending");
    now = running.top().first;
    while (!running.empty() && running.top().first == now) {
      const auto [end, rest] = running.top();
      const auto [idx, w] = rest;
      running.pop();
      busy[static_cast<std::size_t>(w)] = false;
      ++done;
      for (std::size_t next : graph.dependents[idx]) {
        if (--pending[next] == 0) {
          arrival[next] = now;
          ready.push_back(next);
        }
      }
    }
    admit(now);
  }

  for (const TraceEvent& ev : trace.events) trace.makespan = std::max(trace.makespan, ev.end);
  return trace;
}

// ---------------------------------------------------------------------------
// Realtime scheduling: wall-clock execution on worker threads
// ---------------------------------------------------------------------------

inline ScheduleTrace run_schedule_realtime(const std::vector<TaskSpec>& tasks,
                                           const ResourcePool& pool, TaskRunner& runner) {
  validate_pool(pool);
  detail::TaskGraph graph = detail::build_task_graph(tasks);
  detail::check_schedulable(tasks, pool);

  const std::size_t n = tasks.size();
  const auto origin = std::chrono::steady_clock::now();
  const auto now_us = [origin]() -> long long {
    return std::chrono::duration_cast<std::chrono::microseconds>(
               std::chrono::steady_clock::now() - origin)
        .count();
  };

  struct Done {
    std::size_t idx;
    long long end;
    bool failed;
    std::string what;
  };
  std::mutex mu;
  std::condition_variable cv;
  std::vector<Done> inbox;

  std::vector<std::size_t> pending = graph.indegree;
  std::vector<long long> arrival(n, 0);
  std::vector<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (pending[i] == 0) ready.push_back(i);

  std::vector<bool> busy(pool.workers.size(), false);
  std::vector<std::thread> threads;
  threads.reserve(n);

  // event slot per task; filled at admission, end patched at completion
  std::vector<std::optional<TraceEvent>> event_of(n);
  ScheduleTrace trace;
  std::vector<TaskId> failed, cancelled;
  std::size_t finished = 0, in_flight = 0, abandoned = 0;

  const auto cancel_dependents = [&](std::size_t idx, auto&& self) -> void {
    for (std::size_t next : graph.dependents[idx]) {
      if (pending[next] == SIZE_MAX) continue;  // already cancelled
      pending[next] = SIZE_MAX;
      cancelled.push_back(tasks[next].id);
      ++abandoned;
      self(next, self);
    }
  };

  std::unique_lock<std::mutex> lock(mu);
  while (finished + abandoned < n || in_flight > 0) {
    // admission pass under the lock; workers only touch the inbox
    detail::sort_ready(ready, tasks);
    std::vector<std::size_t> still_waiting;
    for (std::size_t pos = 0; pos < ready.size(); ++pos) {
      const std::size_t idx = ready[pos];
      if (static_cast<int>(in_flight) >= pool.max_jobs) {
        still_waiting.insert(still_waiting.end(), ready.begin() + static_cast<std::ptrdiff_t>(pos),
                             ready.end());
        break;
      }
      const int w = detail::pick_worker(busy, pool, tasks[idx].mem_demand);
      if (w < 0) {
        still_waiting.push_back(idx);
        continue;
      }
      busy[static_cast<std::size_t>(w)] = true;
      ++in_flight;
      TraceEvent ev;
      ev.task = tasks[idx].id;
      ev.worker = w;
      ev.start = now_us();
      ev.end = ev.start;
      ev.arrival = arrival[idx];
      ev.mem_at_start = pool.workers[static_cast<std::size_t>(w)].capacity;
      event_of[idx] = ev;
      threads.emplace_back([&, idx]() {
        Done d{idx, 0, false, {}};
        try {
          runner.run(tasks[idx]);
        } catch (const std::exception& e) {
          d.failed = true;
          d.what = e.what();
        }
        d.end = now_us();
        {
          std::lock_guard<std::mutex> g(mu);
          inbox.push_back(d);
        }
        cv.notify_all();
      });
    }
    ready = std::move(still_waiting);
    trace.queue_samples.push_back({now_us(), ready.size(), in_flight});

    if (finished + abandoned >= n && in_flight == 0) break;
    cv.wait(lock, [&] { return !inbox.empty(); });
    std::vector<Done> batch;
    batch.swap(inbox);
    for (const Done& d : batch) {
      event_of[d.idx]->end = d.end;
      busy[static_cast<std::size_t>(event_of[d.idx]->worker)] = false;
      --in_flight;
      ++finished;
      if (d.failed) {
        failed.push_back(tasks[d.idx].id);
        cancel_dependents(d.idx, cancel_dependents);
      } else {
        for (std::size_t next : graph.dependents[d.idx]) {
          if (pending[next] == SIZE_MAX) continue;
          if (--pending[next] == 0) {
            arrival[next] = d.end;
            ready.push_back(next);
          }
        }
      }
    }
  }
  lock.unlock();
  for (std::thread& t : threads) t.join();

  for (auto& ev : event_of)
    if (ev) trace.events.push_back(*ev);
  for (const TraceEvent& ev : trace.events) trace.makespan = std::max(trace.makespan, ev.end);

  if (!failed.empty()) {
    std::string msg = "backend failure in " + to_string(failed.front());
    if (failed.size() > 1) msg += " (+" + std::to_string(failed.size() - 1) + " more)";
    msg += "; " + std::to_string(cancelled.size()) + " dependent task(s) cancelled";
    throw PartialTraceError(std::move(trace), std::move(failed), std::move(cancelled), msg);
  }
  return trace;
}

enum class ScheduleMode { Simulated, Realtime };

inline ScheduleTrace run_schedule(const std::vector<TaskSpec>& tasks, const ResourcePool& pool,
                                  TaskRunner* runner, ScheduleMode mode) {
  if (mode == ScheduleMode::Simulated) return simulate_schedule(tasks, pool);
  if (runner == nullptr) throw Error(Errc::BadConfig, "realtime scheduling needs a task runner");
  return run_schedule_realtime(tasks, pool, *runner);
}

// ---------------------------------------------------------------------------
// Independent trace checker
// ---------------------------------------------------------------------------

struct TraceViolation {
  std::string kind;    // e.g. "DependencyViolation"
  std::string detail;
  long long time = 0;
};

inline std::vector<TraceViolation> validate_trace(const ScheduleTrace& trace,
                                                  const std::vector<TaskSpec>& tasks,
                                                  const ResourcePool& pool) {
  std::vector<TraceViolation> out;
  std::map<TaskId, const TaskSpec*> spec_of;
  for (const TaskSpec& t : tasks) spec_of[t.id] = &t;

  std::map<TaskId, std::vector<const TraceEvent*>> events_of;
  for (const TraceEvent& ev : trace.events) {
    if (spec_of.find(ev.task) == spec_of.end())
      out.push_back({"UnknownRefViolation", "event for unknown task " + to_string(ev.task),
                     ev.start});
    if (ev.worker < 0 || static_cast<std::size_t>(ev.worker) >= pool.workers.size())
      out.push_back({"UnknownRefViolation",
                     to_string(ev.task) + " ran on unknown worker " + std::to_string(ev.worker),
                     ev.start});
    if (ev.end < ev.start || ev.start < 0)
      out.push_back({"TimeViolation", to_string(ev.task) + " has inverted or negative times",
                     ev.start});
    events_of[ev.task].push_back(&ev);
  }

  for (const TaskSpec& t : tasks) {
    const auto it = events_of.find(t.id);
    const std::size_t count = it == events_of.end() ? 0 : it->second.size();
    if (count != 1)
      out.push_back({"ExecutionCountViolation",
                     to_string(t.id) + " executed " + std::to_string(count) + " times", 0});
  }

  // dependency ordering
  for (const TaskSpec& t : tasks) {
    const auto it = events_of.find(t.id);
    if (it == events_of.end()) continue;
    for (const TraceEvent* ev : it->second) {
      for (const TaskId& dep : t.deps) {
        const auto dit = events_of.find(dep);
        if (dit == events_of.end()) continue;
        for (const TraceEvent* dev : dit->second)
          if (ev->start < dev->end)
            out.push_back({"DependencyViolation",
                           to_string(t.id) + " started at " + std::to_string(ev->start) +
                               " before " + to_string(dep) + " ended at " +
                               std::to_string(dev->end),
                           ev->start});
      }
    }
  }

  // per-worker serialization and memory admission
  std::map<int, std::vector<const TraceEvent*>> by_worker;
  for (const TraceEvent& ev : trace.events) by_worker[ev.worker].push_back(&ev);
  for (auto& [w, evs] : by_worker) {
    std::sort(evs.begin(), evs.end(), [](const TraceEvent* a, const TraceEvent* b) {
      return a->start != b->start ? a->start < b->start : a->end < b->end;
    });
    for (std::size_t i = 1; i < evs.size(); ++i)
      if (evs[i]->start < evs[i - 1]->end)
        out.push_back({"OverlapViolation",
                       "worker " + std::to_string(w) + " ran " + to_string(evs[i - 1]->task) +
                           " and " + to_string(evs[i]->task) + " concurrently",
                       evs[i]->start});
    if (w < 0 || static_cast<std::size_t>(w) >= pool.workers.size()) continue;
    const double cap = pool.workers[static_cast<std::size_t>(w)].capacity;
    for (const TraceEvent* ev : evs) {
      const auto sit = spec_of.find(ev->task);
      if (sit == spec_of.end()) continue;
      if (std::max(sit->second->mem_demand, pool.mem_threshold) > cap)
        out.push_back({"MemoryViolation",
                       to_string(ev->task) + " admitted on worker " + std::to_string(w) +
                           " without free memory >= max(MEM, demand)",
                       ev->start});
    }
  }

  // global MJ cap: sweep event boundaries, ends processed before starts
  std::vector<std::pair<long long, int>> boundaries;
  for (const TraceEvent& ev : trace.events) {
    boundaries.push_back({ev.start, +1});
    boundaries.push_back({ev.end, -1});
  }
  std::sort(boundaries.begin(), boundaries.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first < b.first : a.second < b.second;
  });
  int concurrent = 0;
  bool mj_reported = false;
  for (const auto& [time, delta] : boundaries) {
    concurrent += delta;
    if (concurrent > pool.max_jobs && !mj_reported) {
      out.push_back({"ConcurrencyViolation",
                     std::to_string(concurrent) + " jobs in flight exceeds MJ = " +
                         std::to_string(pool.max_jobs),
                     time});
      mj_reported = true;  // one report per trace keeps the list readable
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Queueing statistics over a trace
// ---------------------------------------------------------------------------

struct QueueStats {
  double lambda = 0.0;  // arrivals per time unit
  double W = 0.0;       // mean time in system
  double L = 0.0;       // time-averaged tasks in system
};

/// Finite-horizon queueing summary over the observation window
/// [first arrival, last completion]. Measured this way, L = lambda * W is an
/// identity of the step integration, which is exactly the property the
/// residual check certifies.
inline QueueStats queue_stats(const ScheduleTrace& trace) {
  if (trace.events.empty()) throw Error(Errc::EmptyTrace, "queue_stats needs a non-empty trace");
  long long min_arrival = trace.events.front().arrival;
  long long max_end = trace.events.front().end;
  double total_in_system = 0.0;
  for (const TraceEvent& ev : trace.events) {
    min_arrival = std::min(min_arrival, ev.arrival);
    max_end = std::max(max_end, ev.end);
    total_in_system += static_cast<double>(ev.end - ev.arrival);
  }
  const double span = static_cast<double>(max_end - min_arrival);
  QueueStats s;
  if (span <= 0.0) return s;  // all tasks instantaneous; stats degenerate to zero
  const double count = static_cast<double>(trace.events.size());
  s.lambda = count / span;
  s.W = total_in_system / count;
  s.L = total_in_system / span;
  return s;
}

inline double littles_law_residual(const QueueStats& s) {
  if (s.L <= 0.0) return 0.0;
  return std::abs(s.L - s.lambda * s.W) / s.L;
}

}  // namespace pipeflow
