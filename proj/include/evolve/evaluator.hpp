#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

#include "evolve/domain.hpp"
#include "evolve/stg.hpp"

namespace evolve {

// Infrastructure failure (tool crash, unparsable tool report). Distinct
// from a candidate failing its checks; callers checkpoint and abort.
class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SimResult {
  bool compile_ok = false;
  bool sim_ok = false;
  int pass = 0;
  int total = 0;
  std::optional<long> cycles;
  std::string stderr_excerpt;  // starts with "timeout" when the run timed out
  std::vector<FailingVector> failures;
};

struct SynthResult {
  bool synth_ok = true;  // false -> the candidate failed synthesis
  double area_um2 = 0.0;
  bool meets_timing = true;
  std::string note;  // failure text, or e.g. "no timing data; assuming met"
};

// Seam hosting the simulation/synthesis toolchain. Implementations must be
// deterministic for identical inputs, wall time aside. `workdir` is the
// per-candidate scratch directory (already created, may be empty for
// backends that work in memory).
class EvalBackend {
 public:
  virtual ~EvalBackend() = default;
  virtual SimResult run_sim(const std::string& code,
                            const std::string& testbench,
                            const std::filesystem::path& workdir) = 0;
  virtual SynthResult run_synth(const std::string& code,
                                double clock_period_ns,
                                const std::filesystem::path& workdir) = 0;
  virtual int parallel_limit() const { return 1; }
};

using SummaryFn = std::function<std::string(const std::string& code)>;

struct EvalContext {
  // When set, per-candidate artifacts land here:
  // <scratch_dir>/{dut.v, tb.v, sim.log, synth.log, report.json}
  std::filesystem::path scratch_dir;
  // Produces the design summary embedded in feedback; defaults to
  // summary_fallback when empty.
  SummaryFn summarize;
};

struct EvalOutcome {
  double score = 0.0;
  Feedback feedback;
  EvalReport report;
};

// Runs compile/sim (and synthesis for Opt candidates that pass every
// check), then converts the raw results to (score, feedback). Opt
// candidates never receive a valid score unless pass == total and the
// timing constraint holds.
EvalOutcome evaluate(const std::string& code, const ProblemSpec& spec,
                     const stg::TestbenchBundle& bundle, EvalBackend& backend,
                     const EvalContext& ctx = {});

}  // namespace evolve
