#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <chrono>
#include <climits>
#include <map>
#include <thread>

#include <pipeflow/scheduler.hpp>
#include <pipeflow/util.hpp>

using namespace pipeflow;

namespace {

std::vector<TaskSpec> uniform_segments(int n, long long t1, long long t2, double invert_mem = 1.0,
                                       double edit_mem = 1.0) {
  std::vector<TaskSpec> tasks;
  for (int i = 0; i < n; ++i) {
    tasks.push_back({{i, Stage::Invert}, {}, invert_mem, t1});
    tasks.push_back({{i, Stage::Edit}, {TaskId{i, Stage::Invert}}, edit_mem, t2});
  }
  return tasks;
}

const TraceEvent& event_for(const ScheduleTrace& trace, TaskId id) {
  for (const TraceEvent& ev : trace.events)
    if (ev.task == id) return ev;
  FAIL("no event for " + to_string(id));
  throw std::logic_error("unreachable");
}

long long serial_duration(const std::vector<TaskSpec>& tasks) {
  long long sum = 0;
  for (const TaskSpec& t : tasks) sum += t.est_duration;
  return sum;
}

// Exhaustive search for the optimal makespan under the same resource
// semantics the scheduler and the trace checker enforce: one job per worker,
// admission needs an idle worker with capacity >= max(MEM, demand), and at
// most MJ jobs in flight. Start times are event-aligned, which is sufficient
// for makespan optimality with deterministic durations. Tiny instances only.
class ExhaustiveScheduler {
 public:
  ExhaustiveScheduler(const std::vector<TaskSpec>& tasks, const ResourcePool& pool)
      : tasks_(tasks), pool_(pool), ended_(tasks.size(), -1), worker_of_(tasks.size(), -1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) index_of_[tasks_[i].id] = i;
  }

  long long optimal() {
    dfs(0, 0);
    return best_;
  }

 private:
  bool done_at(std::size_t i, long long now) const {
    return ended_[i] >= 0 && ended_[i] <= now;
  }
  bool running_at(std::size_t i, long long now) const { return ended_[i] > now; }

  bool worker_free(int w, long long now) const {
    for (std::size_t i = 0; i < tasks_.size(); ++i)
      if (worker_of_[i] == w && running_at(i, now)) return false;
    return true;
  }

  void dfs(long long now, std::size_t min_start) {
    if (now >= best_) return;
    long long done_max = 0;
    bool all_done = true;
    std::size_t running = 0;
    long long next_end = LLONG_MAX;
    for (std::size_t i = 0; i < tasks_.size(); ++i) {
      if (ended_[i] < 0) {
        all_done = false;
      } else {
        done_max = std::max(done_max, ended_[i]);
        if (running_at(i, now)) {
          ++running;
          next_end = std::min(next_end, ended_[i]);
          all_done = false;
        }
      }
    }
    if (all_done) {
      best_ = std::min(best_, done_max);
      return;
    }

    if (running < static_cast<std::size_t>(pool_.max_jobs)) {
      for (std::size_t i = min_start; i < tasks_.size(); ++i) {
        if (ended_[i] >= 0) continue;
        bool ready = true;
        for (const TaskId& dep : tasks_[i].deps)
          if (!done_at(index_of_.at(dep), now)) ready = false;
        if (!ready) continue;
        const double need = std::max(tasks_[i].mem_demand, pool_.mem_threshold);
        for (std::size_t w = 0; w < pool_.workers.size(); ++w) {
          if (pool_.workers[w].capacity < need) continue;
          if (!worker_free(static_cast<int>(w), now)) continue;
          ended_[i] = now + tasks_[i].est_duration;
          worker_of_[i] = static_cast<int>(w);
          dfs(now, i + 1);  // same instant: later-indexed starts only, kills permutations
          ended_[i] = -1;
          worker_of_[i] = -1;
        }
      }
    }
    if (next_end != LLONG_MAX) dfs(next_end, 0);
  }

  const std::vector<TaskSpec>& tasks_;
  const ResourcePool& pool_;
  std::map<TaskId, std::size_t> index_of_;
  std::vector<long long> ended_;
  std::vector<int> worker_of_;
  long long best_ = LLONG_MAX;
};

// runner that sleeps proportionally to est_duration
class SleepRunner final : public TaskRunner {
 public:
  void run(const TaskSpec& task) override {
    std::this_thread::sleep_for(std::chrono::microseconds(200 * task.est_duration));
  }
};

class FailOnRunner final : public TaskRunner {
 public:
  explicit FailOnRunner(TaskId victim) : victim_(victim) {}
  void run(const TaskSpec& task) override {
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
    if (task.id == victim_) throw Error(Errc::DecodeError, "injected backend failure");
  }

 private:
  TaskId victim_;
};

}  // namespace

TEST_CASE("one segment on one worker runs back to back", "[scheduler]") {
  const auto tasks = uniform_segments(1, 10, 20);
  const ScheduleTrace trace = simulate_schedule(tasks, make_pool(1, 4.0, 1, 0.0));
  REQUIRE(trace.makespan == 30);
  REQUIRE(event_for(trace, {0, Stage::Invert}).start == 0);
  REQUIRE(event_for(trace, {0, Stage::Invert}).end == 10);
  REQUIRE(event_for(trace, {0, Stage::Edit}).start == 10);
  REQUIRE(event_for(trace, {0, Stage::Edit}).end == 30);
}

TEST_CASE("three segments on two workers overlap stages", "[scheduler]") {
  const auto tasks = uniform_segments(3, 10, 10);
  const ResourcePool pool = make_pool(2, 4.0, 2, 0.0);
  const ScheduleTrace trace = simulate_schedule(tasks, pool);
  REQUIRE(trace.makespan == 40);
  REQUIRE(validate_trace(trace, tasks, pool).empty());

  // The edits-first policy trades a little makespan for edit latency: holding
  // the edits back in favor of invert:2 would finish at the work lower bound.
  REQUIRE(ExhaustiveScheduler(tasks, pool).optimal() == 30);
}

TEST_CASE("greedy matches the exhaustive optimum on small random instances", "[scheduler]") {
  Rng rng(53);
  for (int trial = 0; trial < 12; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform(3));
    const auto tasks = uniform_segments(n, 1 + static_cast<long long>(rng.uniform(10)),
                                        1 + static_cast<long long>(rng.uniform(10)));
    const ResourcePool pool =
        make_pool(1 + static_cast<int>(rng.uniform(3)), 4.0, 1 + static_cast<int>(rng.uniform(3)),
                  0.0);
    const long long greedy = simulate_schedule(tasks, pool).makespan;
    const long long optimal = ExhaustiveScheduler(tasks, pool).optimal();
    REQUIRE(greedy >= optimal);                      // cannot beat the optimum
    REQUIRE(greedy <= 2 * optimal);                  // and stays within 2x of it
  }
}

TEST_CASE("a memory-starved pool degenerates to serial execution", "[scheduler]") {
  // worker 1 sits below the admission threshold, so only worker 0 ever runs
  ResourcePool pool;
  pool.workers = {Worker{12.0}, Worker{9.0}};
  pool.max_jobs = 2;
  pool.mem_threshold = 10.0;
  const auto tasks = uniform_segments(3, 10, 10, 8.0, 8.0);
  const ScheduleTrace trace = simulate_schedule(tasks, pool);
  REQUIRE(trace.makespan == 60);
  for (const TraceEvent& ev : trace.events) REQUIRE(ev.worker == 0);
  REQUIRE(validate_trace(trace, tasks, pool).empty());
}

TEST_CASE("max-jobs of one serializes regardless of worker count", "[scheduler]") {
  Rng rng(54);
  for (int trial = 0; trial < 5; ++trial) {
    const auto tasks =
        uniform_segments(1 + static_cast<int>(rng.uniform(6)),
                         1 + static_cast<long long>(rng.uniform(20)),
                         1 + static_cast<long long>(rng.uniform(20)));
    const ScheduleTrace trace = simulate_schedule(tasks, make_pool(4, 4.0, 1, 0.0));
    REQUIRE(trace.makespan == serial_duration(tasks));
  }
}

TEST_CASE("nineteen equal segments give the classic 1.9x", "[scheduler]") {
  const auto tasks = uniform_segments(19, 10, 10);
  const ScheduleTrace trace = simulate_schedule(tasks, make_pool(2, 4.0, 2, 0.0));
  REQUIRE(trace.makespan == 200);  // (N+1)*T
  const double speedup =
      static_cast<double>(serial_duration(tasks)) / static_cast<double>(trace.makespan);
  REQUIRE(speedup == Catch::Approx(1.9).margin(0.05));
}

TEST_CASE("ready edits outrank ready inverts and drain in segment order", "[scheduler]") {
  // one worker: after invert:0 finishes, edit:0 beats invert:1 despite both ready
  const auto tasks = uniform_segments(2, 5, 5);
  const ScheduleTrace trace = simulate_schedule(tasks, make_pool(1, 4.0, 1, 0.0));
  REQUIRE(trace.events.size() == 4);
  REQUIRE(trace.events[0].task == TaskId{0, Stage::Invert});
  REQUIRE(trace.events[1].task == TaskId{0, Stage::Edit});
  REQUIRE(trace.events[2].task == TaskId{1, Stage::Invert});
  REQUIRE(trace.events[3].task == TaskId{1, Stage::Edit});
}

TEST_CASE("blocked tasks are scanned past, not waited on", "[scheduler]") {
  // invert:1 only fits worker 0; while worker 0 is busy, younger work backfills
  ResourcePool pool;
  pool.workers = {Worker{10.0}, Worker{3.0}};
  pool.max_jobs = 8;
  pool.mem_threshold = 0.0;
  std::vector<TaskSpec> tasks{
      {{0, Stage::Invert}, {}, 3.0, 2},
      {{0, Stage::Edit}, {TaskId{0, Stage::Invert}}, 10.0, 5},
      {{1, Stage::Invert}, {}, 10.0, 20},
      {{1, Stage::Edit}, {TaskId{1, Stage::Invert}}, 1.0, 1},
      {{2, Stage::Invert}, {}, 3.0, 3},
      {{2, Stage::Edit}, {TaskId{2, Stage::Invert}}, 1.0, 1},
  };
  const ScheduleTrace trace = simulate_schedule(tasks, pool);
  REQUIRE(validate_trace(trace, tasks, pool).empty());

  const TraceEvent& blocked = event_for(trace, {1, Stage::Invert});
  const TraceEvent& backfilled = event_for(trace, {2, Stage::Edit});
  REQUIRE(blocked.arrival == 0);
  REQUIRE(blocked.arrival < backfilled.arrival);
  REQUIRE(backfilled.start < blocked.start);  // younger task overtook the blocked one
  REQUIRE(trace.makespan == 28);
}

TEST_CASE("simulated schedules are deterministic", "[scheduler]") {
  Rng rng(55);
  const auto tasks = uniform_segments(12, 1 + static_cast<long long>(rng.uniform(9)),
                                      1 + static_cast<long long>(rng.uniform(9)));
  const ResourcePool pool = make_pool(3, 8.0, 3, 0.0);
  const ScheduleTrace a = simulate_schedule(tasks, pool);
  const ScheduleTrace b = simulate_schedule(tasks, pool);
  REQUIRE(a.makespan == b.makespan);
  REQUIRE(a.events.size() == b.events.size());
  for (std::size_t i = 0; i < a.events.size(); ++i) {
    REQUIRE(a.events[i].task == b.events[i].task);
    REQUIRE(a.events[i].worker == b.events[i].worker);
    REQUIRE(a.events[i].start == b.events[i].start);
    REQUIRE(a.events[i].end == b.events[i].end);
    REQUIRE(a.events[i].arrival == b.events[i].arrival);
  }
}

TEST_CASE("randomized schedules never violate the trace checker", "[scheduler]") {
  Rng rng(56);
  for (int trial = 0; trial < 200; ++trial) {
    const int segments = 1 + static_cast<int>(rng.uniform(24));
    const int workers = 1 + static_cast<int>(rng.uniform(8));
    const int mj = 1 + static_cast<int>(rng.uniform(8));
    const double cap = 4.0 + static_cast<double>(rng.uniform(12));
    const double mem = static_cast<double>(rng.uniform(static_cast<std::uint64_t>(cap)));

    std::vector<TaskSpec> tasks;
    for (int i = 0; i < segments; ++i) {
      const double invert_mem = 0.5 + static_cast<double>(rng.uniform(static_cast<std::uint64_t>(cap)));
      const double edit_mem = 0.5 + static_cast<double>(rng.uniform(static_cast<std::uint64_t>(cap)));
      tasks.push_back({{i, Stage::Invert}, {}, std::min(invert_mem, cap),
                       1 + static_cast<long long>(rng.uniform(30))});
      tasks.push_back({{i, Stage::Edit},
                       {TaskId{i, Stage::Invert}},
                       std::min(edit_mem, cap),
                       1 + static_cast<long long>(rng.uniform(30))});
    }
    const ResourcePool pool = make_pool(workers, cap, mj, mem);
    const ScheduleTrace trace = simulate_schedule(tasks, pool);
    const auto violations = validate_trace(trace, tasks, pool);
    if (!violations.empty()) {
      for (const auto& v : violations) UNSCOPED_INFO(v.kind + ": " + v.detail);
    }
    REQUIRE(violations.empty());
    REQUIRE(trace.events.size() == tasks.size());
  }
}

TEST_CASE("cyclic dependencies are rejected", "[scheduler]") {
  std::vector<TaskSpec> tasks{
      {{0, Stage::Invert}, {TaskId{0, Stage::Edit}}, 1.0, 1},
      {{0, Stage::Edit}, {TaskId{0, Stage::Invert}}, 1.0, 1},
  };
  REQUIRE_THROWS_MATCHES(simulate_schedule(tasks, make_pool(1, 4.0, 1, 0.0)), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.code() == Errc::CycleError; }));
}

TEST_CASE("oversized demands are unschedulable up front", "[scheduler]") {
  auto tasks = uniform_segments(1, 5, 5);
  tasks[1].mem_demand = 20.0;
  REQUIRE_THROWS_MATCHES(simulate_schedule(tasks, make_pool(2, 10.0, 2, 0.0)), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.code() == Errc::Unschedulable; }));

  // a MEM threshold above every capacity blocks everything
  REQUIRE_THROWS_MATCHES(
      simulate_schedule(uniform_segments(1, 5, 5), make_pool(2, 10.0, 2, 11.0)), Error,
      Catch::Matchers::Predicate<Error>(
          [](const Error& e) { return e.code() == Errc::Unschedulable; }));
}

TEST_CASE("malformed task sets are rejected as configuration errors", "[scheduler]") {
  REQUIRE_THROWS_MATCHES(simulate_schedule({}, make_pool(1, 4.0, 1, 0.0)), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.code() == Errc::EmptyInput; }));

  auto dup = uniform_segments(1, 5, 5);
  dup.push_back(dup[0]);
  REQUIRE_THROWS_MATCHES(simulate_schedule(dup, make_pool(1, 4.0, 1, 0.0)), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.code() == Errc::BadConfig; }));

  std::vector<TaskSpec> unknown{{{0, Stage::Edit}, {TaskId{7, Stage::Invert}}, 1.0, 1}};
  REQUIRE_THROWS_MATCHES(simulate_schedule(unknown, make_pool(1, 4.0, 1, 0.0)), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.code() == Errc::BadConfig; }));
}

TEST_CASE("the trace checker flags every seeded defect", "[scheduler]") {
  const auto tasks = uniform_segments(2, 10, 10);
  const ResourcePool pool = make_pool(2, 4.0, 2, 0.0);
  const ScheduleTrace good = simulate_schedule(tasks, pool);
  REQUIRE(validate_trace(good, tasks, pool).empty());

  const auto kinds = [&](const ScheduleTrace& t) {
    std::vector<std::string> out;
    for (const auto& v : validate_trace(t, tasks, pool)) out.push_back(v.kind);
    return out;
  };

  SECTION("dependency violation") {
    ScheduleTrace bad = good;
    for (TraceEvent& ev : bad.events)
      if (ev.task == TaskId{1, Stage::Edit}) ev.start = 0;
    const auto k = kinds(bad);
    REQUIRE(std::count(k.begin(), k.end(), "DependencyViolation") >= 1);
  }
  SECTION("execution count violation") {
    ScheduleTrace bad = good;
    bad.events.push_back(bad.events.front());
    const auto k = kinds(bad);
    REQUIRE(std::count(k.begin(), k.end(), "ExecutionCountViolation") >= 1);

    ScheduleTrace missing = good;
    missing.events.pop_back();
    const auto k2 = kinds(missing);
    REQUIRE(std::count(k2.begin(), k2.end(), "ExecutionCountViolation") >= 1);
  }
  SECTION("overlap violation") {
    ScheduleTrace bad = good;
    for (TraceEvent& ev : bad.events) ev.worker = 0;  // squeeze everything onto one worker
    const auto k = kinds(bad);
    REQUIRE(std::count(k.begin(), k.end(), "OverlapViolation") >= 1);
  }
  SECTION("concurrency violation") {
    // three simultaneous jobs under MJ = 2, each on its own worker
    ScheduleTrace bad;
    std::vector<TaskSpec> three = uniform_segments(3, 10, 10);
    for (int i = 0; i < 3; ++i)
      bad.events.push_back({{i, Stage::Invert}, i, 0, 10, 0, 4.0});
    for (int i = 0; i < 3; ++i)
      bad.events.push_back({{i, Stage::Edit}, i, 10, 20, 10, 4.0});
    bad.makespan = 20;
    std::vector<std::string> out;
    for (const auto& v : validate_trace(bad, three, make_pool(3, 4.0, 2, 0.0)))
      out.push_back(v.kind);
    REQUIRE(std::count(out.begin(), out.end(), "ConcurrencyViolation") == 1);
  }
  SECTION("memory violation") {
    ScheduleTrace bad = good;
    std::vector<TaskSpec> heavy = tasks;
    heavy[0].mem_demand = 9.0;  // trace now claims an impossible admission
    const auto violations = validate_trace(bad, heavy, pool);
    bool found = false;
    for (const auto& v : violations) found = found || v.kind == "MemoryViolation";
    REQUIRE(found);
  }
  SECTION("unknown references and broken times") {
    ScheduleTrace bad = good;
    bad.events.front().task = TaskId{9, Stage::Invert};
    bad.events.back().worker = 5;
    std::swap(bad.events[1].start, bad.events[1].end);
    const auto k = kinds(bad);
    REQUIRE(std::count(k.begin(), k.end(), "UnknownRefViolation") >= 2);
    REQUIRE(std::count(k.begin(), k.end(), "TimeViolation") >= 1);
  }
}

TEST_CASE("queue stats satisfy Little's law exactly by construction", "[scheduler]") {
  SECTION("single task") {
    ScheduleTrace trace;
    trace.events.push_back({{0, Stage::Invert}, 0, 0, 10, 0, 1.0});
    trace.makespan = 10;
    const QueueStats s = queue_stats(trace);
    REQUIRE(s.lambda == Catch::Approx(0.1));
    REQUIRE(s.W == Catch::Approx(10.0));
    REQUIRE(s.L == Catch::Approx(1.0));
    REQUIRE(littles_law_residual(s) == 0.0);
  }
  SECTION("two disjoint tasks, hand integration") {
    ScheduleTrace trace;
    trace.events.push_back({{0, Stage::Invert}, 0, 0, 10, 0, 1.0});
    trace.events.push_back({{1, Stage::Invert}, 0, 10, 30, 10, 1.0});
    trace.makespan = 30;
    const QueueStats s = queue_stats(trace);
    // span 30, in-system integrals 10 and 20: L = 30/30, W = 15, lambda = 2/30
    REQUIRE(s.L == Catch::Approx(1.0));
    REQUIRE(s.W == Catch::Approx(15.0));
    REQUIRE(s.lambda == Catch::Approx(2.0 / 30.0));
    REQUIRE(littles_law_residual(s) < 1e-12);
  }
  SECTION("steady-state pipeline") {
    const auto tasks = uniform_segments(100, 10, 10);
    const ScheduleTrace trace = simulate_schedule(tasks, make_pool(2, 4.0, 2, 0.0));
    const QueueStats s = queue_stats(trace);
    REQUIRE(s.L > 0.0);
    REQUIRE(littles_law_residual(s) <= 0.05);
  }
  SECTION("empty trace is an error") {
    REQUIRE_THROWS_MATCHES(queue_stats(ScheduleTrace{}), Error,
                           Catch::Matchers::Predicate<Error>(
                               [](const Error& e) { return e.code() == Errc::EmptyTrace; }));
  }
}

TEST_CASE("realtime mode executes the same dag on wall clock", "[scheduler][realtime]") {
  const auto tasks = uniform_segments(3, 4, 4);
  const ResourcePool pool = make_pool(2, 4.0, 2, 0.0);
  SleepRunner runner;
  const ScheduleTrace trace = run_schedule_realtime(tasks, pool, runner);
  REQUIRE(trace.events.size() == 6);
  REQUIRE(trace.makespan > 0);
  REQUIRE(validate_trace(trace, tasks, pool).empty());
  for (int i = 0; i < 3; ++i) {
    const TraceEvent& inv = event_for(trace, {i, Stage::Invert});
    const TraceEvent& ed = event_for(trace, {i, Stage::Edit});
    REQUIRE(ed.start >= inv.end);
    REQUIRE(ed.arrival >= inv.end);
  }
}

TEST_CASE("a backend failure cancels dependents and surfaces a partial trace",
          "[scheduler][realtime]") {
  const auto tasks = uniform_segments(2, 2, 2);
  const ResourcePool pool = make_pool(1, 4.0, 1, 0.0);
  FailOnRunner runner(TaskId{1, Stage::Invert});
  try {
    run_schedule_realtime(tasks, pool, runner);
    FAIL("expected PartialTraceError");
  } catch (const PartialTraceError& e) {
    REQUIRE(e.code() == Errc::PartialTrace);
    REQUIRE(e.failed_tasks == std::vector<TaskId>{TaskId{1, Stage::Invert}});
    REQUIRE(e.cancelled_tasks == std::vector<TaskId>{TaskId{1, Stage::Edit}});
    REQUIRE(e.trace.events.size() == 3);  // invert:0, edit:0, and the failed invert:1
    REQUIRE(std::string(e.what()).find("invert:1") != std::string::npos);
    for (const TraceEvent& ev : e.trace.events) REQUIRE(ev.task != TaskId{1, Stage::Edit});
  }
}

TEST_CASE("the mode dispatcher validates its arguments", "[scheduler]") {
  const auto tasks = uniform_segments(1, 2, 2);
  const ResourcePool pool = make_pool(1, 4.0, 1, 0.0);
  REQUIRE_NOTHROW(run_schedule(tasks, pool, nullptr, ScheduleMode::Simulated));
  REQUIRE_THROWS_MATCHES(run_schedule(tasks, pool, nullptr, ScheduleMode::Realtime), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.code() == Errc::BadConfig; }));
}

TEST_CASE("task ids render and parse round trip", "[scheduler]") {
  REQUIRE(to_string(TaskId{3, Stage::Invert}) == "invert:3");
  REQUIRE(to_string(TaskId{11, Stage::Edit}) == "edit:11");
  REQUIRE(parse_task_id("invert:3") == TaskId{3, Stage::Invert});
  REQUIRE(parse_task_id("edit:11") == TaskId{11, Stage::Edit});
  REQUIRE_THROWS_AS(parse_task_id("bogus:1"), Error);
  REQUIRE_THROWS_AS(parse_task_id("invert:"), Error);
}
