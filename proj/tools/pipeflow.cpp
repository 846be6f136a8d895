// pipeflow: motion-aware pipelined video processing over PPM/PGM sequences.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <pipeflow/pipeflow.hpp>

namespace fs = std::filesystem;
using namespace pipeflow;

namespace {

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::BadConfig, path.string() + ": cannot open");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::BadConfig, path.string() + ": " + e.what());
  }
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw Error(Errc::WriteError, path.string() + ": cannot open for writing");
  out << text;
  if (!out) throw Error(Errc::WriteError, path.string() + ": write failed");
}

struct FlowFlags {
  FlowConfig cfg;
  void attach(CLI::App* cmd) {
    cmd->add_option("--flow-pyramid-levels", cfg.pyramid_levels, "Flow pyramid levels")
        ->capture_default_str();
    cmd->add_option("--flow-window", cfg.window, "Flow window size (odd, >= 3)")
        ->capture_default_str();
    cmd->add_option("--flow-iterations", cfg.iterations, "Flow refinement iterations per level")
        ->capture_default_str();
  }
};

struct PoolFlags {
  int workers = 2;
  int max_jobs = 2;
  double mem_threshold = 0.0;
  double worker_mem = 16.0;
  void attach(CLI::App* cmd) {
    cmd->add_option("--workers", workers, "Worker count")->capture_default_str();
    cmd->add_option("--mj", max_jobs, "Max concurrent jobs (MJ)")->capture_default_str();
    cmd->add_option("--mem", mem_threshold, "Free-memory admission threshold (MEM)")
        ->capture_default_str();
    cmd->add_option("--worker-mem", worker_mem, "Per-worker memory capacity")
        ->capture_default_str();
  }
  ResourcePool pool() const { return make_pool(workers, worker_mem, max_jobs, mem_threshold); }
};

struct CostFlags {
  CostModelParams cost;
  void attach(CLI::App* cmd) {
    cmd->add_option("--cost-T", cost.T, "Cost model: diffusion timesteps")->capture_default_str();
    cmd->add_option("--cost-n", cost.n, "Cost model: tokens per frame")->capture_default_str();
    cmd->add_option("--cost-d", cost.d, "Cost model: token dimension")->capture_default_str();
    cmd->add_option("--cost-unit", cost.unit_cost, "Cost model: time per n^2*d unit")
        ->capture_default_str();
  }
};

int cmd_gen_synthetic(const std::string& kind, int frames, int width, int height,
                      std::uint64_t seed, long fps, const fs::path& out) {
  const auto emit = [&](ClipKind k, const fs::path& dir) {
    write_sequence(make_clip(k, frames, width, height, seed), dir, fps, 1);
    std::cout << clip_kind_name(k) << ": " << frames << " frames " << width << "x" << height
              << " -> " << dir.string() << "\n";
  };
  if (kind == "all") {
    for (ClipKind k : {ClipKind::Static, ClipKind::Moving, ClipKind::Alternating,
                       ClipKind::StaticThenMoving, ClipKind::Drift})
      emit(k, out / clip_kind_name(k));
  } else {
    emit(parse_clip_kind(kind), out);
  }
  return 0;
}

int cmd_analyze(const fs::path& input, const std::string& out, const FlowConfig& flow) {
  SequenceReader reader = SequenceReader::open(input);
  // thresholds do not affect the metric table, only which frames get kept
  const SelectionResult sel = select_frames(reader, SelectionConfig{}, flow);
  const std::string csv = selection_metrics_csv(sel);
  if (out.empty() || out == "-") {
    std::cout << csv;
  } else {
    write_text(out, csv);
    std::cout << "wrote " << sel.per_transition_metrics.size() << " rows to " << out << "\n";
  }
  return 0;
}

int cmd_select(const fs::path& input, const SelectionConfig& sel_cfg, const FlowConfig& flow,
               const fs::path& out) {
  SequenceReader reader = SequenceReader::open(input);
  const SelectionResult sel = select_frames(reader, sel_cfg, flow);
  write_text(out, selection_to_json(sel).dump(2) + "\n");
  const SelectionReport rep = selection_report(sel);
  std::cout << "kept " << rep.kept_count << "/" << rep.total_frames << " frames (skip ratio "
            << format_double(rep.skip_ratio) << ") -> " << out.string() << "\n";
  return 0;
}

int cmd_plan(const fs::path& selection_path, int seg_len, const std::string& keyframes,
             int overlap, const fs::path& out) {
  const SelectionResult sel = selection_from_json(read_json_file(selection_path));
  const SegmentPlan plan =
      plan_segments(sel, seg_len, KeyframePolicy::parse(keyframes), overlap);
  write_text(out, plan_to_json(plan).dump(2) + "\n");
  std::cout << plan.segments.size() << " segments -> " << out.string() << "\n";
  return 0;
}

int cmd_simulate(int segments, long long t1, long long t2, const PoolFlags& pool_flags,
                 double invert_mem, double edit_mem, const fs::path& out) {
  if (segments < 1) throw Error(Errc::BadConfig, "--segments must be >= 1");
  if (t1 < 1 || t2 < 1) throw Error(Errc::BadConfig, "--t1/--t2 must be >= 1");
  std::vector<TaskSpec> tasks;
  for (int i = 0; i < segments; ++i) {
    TaskSpec invert{{i, Stage::Invert}, {}, invert_mem, t1};
    TaskSpec edit{{i, Stage::Edit}, {TaskId{i, Stage::Invert}}, edit_mem, t2};
    tasks.push_back(invert);
    tasks.push_back(edit);
  }
  const ResourcePool pool = pool_flags.pool();
  const ScheduleTrace trace = simulate_schedule(tasks, pool);
  const std::vector<TraceViolation> violations = validate_trace(trace, tasks, pool);
  const QueueStats qs = queue_stats(trace);

  std::cout << "makespan " << trace.makespan << " (" << trace.events.size() << " tasks, serial "
            << (static_cast<long long>(segments) * (t1 + t2)) << ")\n"
            << "queue: lambda " << format_double(qs.lambda) << ", W " << format_double(qs.W)
            << ", L " << format_double(qs.L) << ", L-lambda*W residual "
            << format_double(littles_law_residual(qs)) << "\n";
  for (const TraceViolation& v : violations)
    std::cerr << v.kind << " at t=" << v.time << ": " << v.detail << "\n";
  if (!out.empty()) {
    write_text(out, schedule_file_to_json(trace, tasks, pool).dump(2) + "\n");
    std::cout << "trace -> " << out.string() << "\n";
  }
  return violations.empty() ? 0 : 1;
}

int cmd_run(const PipelineConfig& cfg) {
  try {
    const PipelineResult res = run_pipeline(cfg);
    std::cout << "input " << res.input_manifest.frame_count << " frames, kept "
              << res.selection.selected.size() << ", " << res.plan.segments.size()
              << " segments\n"
              << "makespan " << res.trace.makespan << ", speedup vs serial "
              << format_double(res.report.speedup_vs_serial) << ", violations "
              << res.violations.size() << "\n"
              << "wrote " << res.output_frames.size() << " frames -> "
              << cfg.output_dir.string() << ", report -> " << cfg.report_dir.string() << "\n";
    for (const TraceViolation& v : res.violations)
      std::cerr << v.kind << " at t=" << v.time << ": " << v.detail << "\n";
    return res.violations.empty() ? 0 : 1;
  } catch (const PartialTraceError& e) {
    // keep what did run so the failure can be diagnosed from the report dir
    std::error_code ec;
    fs::create_directories(cfg.report_dir, ec);
    if (!ec)
      write_text(cfg.report_dir / "trace.json", trace_to_json(e.trace).dump(2) + "\n");
    std::cerr << "error: " << e.what() << " (partial trace -> "
              << (cfg.report_dir / "trace.json").string() << ")\n";
    return 1;
  }
}

int cmd_report(const fs::path& from, const fs::path& out) {
  const ScheduleFile file = schedule_file_from_json(read_json_file(from));
  const std::vector<TraceViolation> violations =
      validate_trace(file.trace, file.tasks, file.pool);

  RunReport rep;
  rep.config = nlohmann::json{{"source", from.string()}};
  rep.keyframe_mode = "n/a";
  rep.makespan = file.trace.makespan;
  rep.queue = queue_stats(file.trace);
  rep.littles_residual = littles_law_residual(rep.queue);
  double busy = 0.0;
  for (const TraceEvent& ev : file.trace.events) busy += static_cast<double>(ev.end - ev.start);
  rep.speedup_vs_serial =
      file.trace.makespan > 0 ? busy / static_cast<double>(file.trace.makespan) : 1.0;
  rep.utilization = utilization_from_trace(file.trace, file.pool.workers.size());
  rep.scaling = scaling_sweep(file.tasks, file.pool, {1, 2, 4, 8});
  rep.trace = file.trace;
  rep.trace_violations = violations.size();

  CostModelParams pred;
  double n1 = 0, n2 = 0, s1 = 0, s2 = 0;
  for (const TaskSpec& t : file.tasks) {
    if (t.id.stage == Stage::Invert) { n1 += 1; s1 += static_cast<double>(t.est_duration); }
    else { n2 += 1; s2 += static_cast<double>(t.est_duration); }
  }
  pred.N1 = std::max(1.0, n1);
  pred.N2 = std::max(1.0, n2);
  pred.T1 = std::max(1.0, s1 / pred.N1);
  pred.T2 = std::max(1.0, s2 / pred.N2);
  pred.B = std::max(1.0, std::max(n1, n2));
  rep.predictions = predict_times(pred);

  emit_report(rep, out);
  std::cout << "report -> " << (out / kReportFileName).string() << " (violations "
            << violations.size() << ")\n";
  for (const TraceViolation& v : violations)
    std::cerr << v.kind << " at t=" << v.time << ": " << v.detail << "\n";
  return violations.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Motion-aware pipelined video processing over PPM/PGM frame sequences"};
  app.require_subcommand(1);

  // gen-synthetic -------------------------------------------------------------
  auto* gen = app.add_subcommand("gen-synthetic", "Generate deterministic test clips");
  std::string gen_kind = "all";
  int gen_frames = 60, gen_width = 64, gen_height = 64;
  std::uint64_t gen_seed = 42;
  long gen_fps = 30;
  std::string gen_out;
  gen->add_option("--kind", gen_kind,
                  "static|moving|alternating|static-then-moving|drift|all")
      ->capture_default_str();
  gen->add_option("--frames", gen_frames, "Frames per clip")->capture_default_str();
  gen->add_option("--width", gen_width, "Frame width")->capture_default_str();
  gen->add_option("--height", gen_height, "Frame height")->capture_default_str();
  gen->add_option("--seed", gen_seed, "Texture seed")->capture_default_str();
  gen->add_option("--fps", gen_fps, "Manifest fps")->capture_default_str();
  gen->add_option("--out", gen_out, "Output directory")->required();

  // analyze -------------------------------------------------------------------
  auto* analyze = app.add_subcommand("analyze", "Per-transition SSIM and mean flow magnitude");
  std::string analyze_in, analyze_out;
  FlowFlags analyze_flow;
  analyze->add_option("input", analyze_in, "Input sequence directory")->required();
  analyze->add_option("--out", analyze_out, "CSV path ('-' or empty for stdout)");
  analyze_flow.attach(analyze);

  // select ----------------------------------------------------------------------
  auto* select = app.add_subcommand("select", "Motion-gated frame selection");
  std::string select_in, select_out = "selection.json";
  SelectionConfig select_cfg;
  FlowFlags select_flow;
  select->add_option("input", select_in, "Input sequence directory")->required();
  select->add_option("--tau-s", select_cfg.tau_s, "SSIM threshold (motion if ssim < tau_s)")
      ->capture_default_str();
  select->add_option("--tau-f", select_cfg.tau_f, "Flow threshold (motion if mf > tau_f)")
      ->capture_default_str();
  select->add_option("--out", select_out, "Selection JSON path")->capture_default_str();
  select_flow.attach(select);

  // plan ------------------------------------------------------------------------
  auto* plan = app.add_subcommand("plan", "Chunk a selection into segments with keyframes");
  std::string plan_selection, plan_keyframes = "sparse", plan_out = "plan.json";
  int plan_seg_len = 32, plan_overlap = 0;
  plan->add_option("--selection", plan_selection, "Selection JSON from 'select'")->required();
  plan->add_option("--seg-len", plan_seg_len, "Frames per segment (>= 2)")
      ->capture_default_str();
  plan->add_option("--keyframes", plan_keyframes, "sparse|dense|<stride>")
      ->capture_default_str();
  plan->add_option("--overlap", plan_overlap, "Frames carried across segment borders")
      ->capture_default_str();
  plan->add_option("--out", plan_out, "Plan JSON path")->capture_default_str();

  // simulate ----------------------------------------------------------------------
  auto* simulate =
      app.add_subcommand("simulate", "Simulate the two-stage schedule for N uniform segments");
  int sim_segments = 0;
  long long sim_t1 = 0, sim_t2 = 0;
  double sim_invert_mem = 1.0, sim_edit_mem = 1.0;
  PoolFlags sim_pool;
  std::string sim_out;
  simulate->add_option("--segments", sim_segments, "Segment count")->required();
  simulate->add_option("--t1", sim_t1, "Invert duration per segment")->required();
  simulate->add_option("--t2", sim_t2, "Edit duration per segment")->required();
  simulate->add_option("--invert-mem", sim_invert_mem, "Invert memory demand")
      ->capture_default_str();
  simulate->add_option("--edit-mem", sim_edit_mem, "Edit memory demand")->capture_default_str();
  sim_pool.attach(simulate);
  simulate->add_option("--out", sim_out, "Trace JSON path (omit to skip)");

  // run -----------------------------------------------------------------------
  auto* run = app.add_subcommand("run", "Full pipeline: select, plan, schedule, edit, report");
  PipelineConfig run_cfg;
  std::string run_in, run_out, run_report, run_keyframes = "sparse";
  std::string run_mode = "simulated", run_interp = "on";
  PoolFlags run_pool;
  run_pool.worker_mem = 16.0;
  CostFlags run_cost;
  FlowFlags run_flow;
  run->add_option("input", run_in, "Input sequence directory")->required();
  run->add_option("--out", run_out, "Output sequence directory")->required();
  run->add_option("--report", run_report, "Report directory")->required();
  run->add_option("--tau-s", run_cfg.selection.tau_s, "SSIM threshold")->capture_default_str();
  run->add_option("--tau-f", run_cfg.selection.tau_f, "Flow threshold")->capture_default_str();
  run->add_option("--seg-len", run_cfg.seg_len, "Frames per segment")->capture_default_str();
  run->add_option("--keyframes", run_keyframes, "sparse|dense|<stride>")->capture_default_str();
  run->add_option("--overlap", run_cfg.overlap, "Overlap frames across borders")
      ->capture_default_str();
  run->add_option("--backend", run_cfg.backend, "mock|stylize:<invert-colors|sepia|posterize>")
      ->capture_default_str();
  run->add_option("--mode", run_mode, "simulated|realtime")->capture_default_str();
  run->add_option("--interp", run_interp, "on|off: fill skipped frames by interpolation")
      ->capture_default_str();
  run->add_option("--invert-mem", run_cfg.stage_mem.invert, "Invert memory demand")
      ->capture_default_str();
  run->add_option("--edit-mem", run_cfg.stage_mem.edit, "Edit memory demand")
      ->capture_default_str();
  run->add_option("--prompt-tag", run_cfg.prompt_tag, "Tag recorded on edited segments")
      ->capture_default_str();
  run->add_option("--seed", run_cfg.seed, "Seed recorded in the report")->capture_default_str();
  run_pool.attach(run);
  run_cost.attach(run);
  run_flow.attach(run);

  // report ----------------------------------------------------------------------
  auto* report = app.add_subcommand("report", "Rebuild analytics from a trace JSON file");
  std::string report_from, report_out;
  report->add_option("--from", report_from, "Trace JSON (as written by simulate/run)")
      ->required();
  report->add_option("--out", report_out, "Report directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed())
      return cmd_gen_synthetic(gen_kind, gen_frames, gen_width, gen_height, gen_seed, gen_fps,
                               gen_out);
    if (analyze->parsed()) return cmd_analyze(analyze_in, analyze_out, analyze_flow.cfg);
    if (select->parsed()) return cmd_select(select_in, select_cfg, select_flow.cfg, select_out);
    if (plan->parsed())
      return cmd_plan(plan_selection, plan_seg_len, plan_keyframes, plan_overlap, plan_out);
    if (simulate->parsed())
      return cmd_simulate(sim_segments, sim_t1, sim_t2, sim_pool, sim_invert_mem, sim_edit_mem,
                          sim_out);
    if (run->parsed()) {
      run_cfg.input_dir = run_in;
      run_cfg.output_dir = run_out;
      run_cfg.report_dir = run_report;
      run_cfg.keyframes = KeyframePolicy::parse(run_keyframes);
      run_cfg.pool = run_pool.pool();
      run_cfg.cost = run_cost.cost;
      run_cfg.flow = run_flow.cfg;
      if (run_mode == "simulated") run_cfg.mode = ScheduleMode::Simulated;
      else if (run_mode == "realtime") run_cfg.mode = ScheduleMode::Realtime;
      else throw Error(Errc::BadConfig, "--mode must be simulated|realtime");
      if (run_interp == "on") run_cfg.interpolate = true;
      else if (run_interp == "off") run_cfg.interpolate = false;
      else throw Error(Errc::BadConfig, "--interp must be on|off");
      return cmd_run(run_cfg);
    }
    if (report->parsed()) return cmd_report(report_from, report_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
