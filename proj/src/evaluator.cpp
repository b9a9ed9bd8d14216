#include "evolve/evaluator.hpp"

#include <chrono>
#include <fstream>

#include "json.hpp"

namespace evolve {

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

void write_report_json(const std::filesystem::path& path,
                       const EvalReport& report, double score) {
  nlohmann::json doc;
  doc["compile_ok"] = report.compile_ok;
  doc["sim_ok"] = report.sim_ok;
  doc["pass"] = report.pass;
  doc["total"] = report.total;
  if (report.area_um2) doc["area_um2"] = *report.area_um2;
  if (report.cycles) doc["cycles"] = *report.cycles;
  if (report.latency_ns) doc["latency_ns"] = *report.latency_ns;
  doc["stderr_excerpt"] = report.stderr_excerpt;
  doc["score"] = score;
  write_file(path, doc.dump(2) + "\n");
}

}  // namespace

EvalOutcome evaluate(const std::string& code, const ProblemSpec& spec,
                     const stg::TestbenchBundle& bundle, EvalBackend& backend,
                     const EvalContext& ctx) {
  auto t0 = std::chrono::steady_clock::now();
  const bool have_dir = !ctx.scratch_dir.empty();
  if (have_dir) {
    std::filesystem::create_directories(ctx.scratch_dir);
    write_file(ctx.scratch_dir / "dut.v", code);
    write_file(ctx.scratch_dir / "tb.v", bundle.source);
  }

  EvalOutcome out;
  EvalReport& report = out.report;

  SimResult sim = backend.run_sim(code, bundle.source, ctx.scratch_dir);
  report.compile_ok = sim.compile_ok;
  report.sim_ok = sim.sim_ok;
  report.pass = sim.pass;
  report.total = sim.total;
  report.cycles = sim.cycles;
  report.stderr_excerpt = sim.stderr_excerpt;
  report.failures = sim.failures;

  const bool ran = sim.compile_ok && sim.sim_ok;
  if (spec.task.kind == TaskType::Gen) {
    out.score = score_generation(sim.pass, sim.total, ran, spec.c_penalty);
  } else {
    if (!ran || sim.pass < sim.total) {
      out.score = spec.c_penalty;
    } else {
      SynthResult synth =
          backend.run_synth(code, spec.clock_period_ns, ctx.scratch_dir);
      if (!synth.synth_ok) {
        out.score = spec.c_penalty;
        report.stderr_excerpt =
            "synthesis failed" +
            (synth.note.empty() ? "" : "\n" + synth.note) +
            (report.stderr_excerpt.empty() ? ""
                                           : "\n" + report.stderr_excerpt);
      } else if (!synth.meets_timing) {
        out.score = spec.c_penalty;
        report.stderr_excerpt =
            "timing constraint violated at clock period " +
            format_double(spec.clock_period_ns) + " ns" +
            (report.stderr_excerpt.empty() ? ""
                                           : "\n" + report.stderr_excerpt);
      } else {
        if (!sim.cycles.has_value()) {
          throw BackendError(
              "simulation reported no cycle count (STG_CYCLES); required "
              "for Opt scoring");
        }
        report.area_um2 = synth.area_um2;
        report.latency_ns =
            static_cast<double>(*sim.cycles) * spec.clock_period_ns;
        out.score = score_optimization(synth.area_um2, *report.latency_ns,
                                       true, spec.eta, spec.c_penalty);
      }
    }
  }

  std::string summary;
  if (out.score != spec.c_penalty) {
    summary = ctx.summarize ? ctx.summarize(code) : summary_fallback(code);
  }
  out.feedback =
      select_feedback(spec.task, out.score, report, spec.c_penalty, summary);

  report.wall_time_ms = static_cast<long>(
      std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::steady_clock::now() - t0)
          .count());
  if (have_dir) {
    write_report_json(ctx.scratch_dir / "report.json", report, out.score);
  }
  return out;
}

}  // namespace evolve
