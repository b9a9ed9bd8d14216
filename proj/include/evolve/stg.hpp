#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "evolve/domain.hpp"

namespace evolve::stg {

enum class PortDirection { In, Out, InOut };

// Category of an input port; outputs always carry Observed.
enum class PortCategory { Unclassified, ClockReset, Control, Datapath, Observed };

struct Port {
  std::string name;
  PortDirection direction = PortDirection::In;
  unsigned width = 1;
  PortCategory category = PortCategory::Unclassified;

  bool operator==(const Port&) const = default;
};

// Structured parse/generation error carrying the offending source line.
class StgError : public std::runtime_error {
 public:
  StgError(std::string message, int line = 0)
      : std::runtime_error(std::move(message)), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

enum class StimulusMode { Exhaustive, ConstrainedRandom };

// Stimulus values are hex strings (no prefix, lowercase, zero-padded to
// ceil(width/4) digits) so widths above 64 bits stay exact.
struct ControlStimulus {
  std::string port;
  unsigned width = 1;
  StimulusMode mode = StimulusMode::Exhaustive;
  std::vector<std::string> values;
};

struct DatapathStimulus {
  std::string port;
  unsigned width = 1;
  std::vector<std::string> corner_values;
  std::vector<std::string> random_values;
};

struct StimulusConfig {
  unsigned w_exhaustive_max = 8;
  int random_vectors = 16;
  std::uint64_t seed = 0;
  // Soft cap on total check events. Per-control exhaustive coverage and
  // datapath corner values are never cut to satisfy it.
  int max_total_checks = 512;
};

struct StimulusPlan {
  std::uint64_t seed = 0;
  int random_vectors = 0;
  int max_total_checks = 512;
  std::vector<ControlStimulus> controls;
  std::vector<DatapathStimulus> datapaths;

  // Outer loop: one step per joint control assignment; each control port
  // cycles through its own value list so per-signal coverage is complete
  // even when list lengths differ.
  int outer_steps() const;
  // Inner loop: datapath vector index, corners first then random fill.
  int inner_steps() const;
  int total_checks() const;
};

struct TestbenchBundle {
  std::vector<Port> ports;  // classified DUT ports
  StimulusPlan plan;
  std::string source;
  int total_vectors = 0;
};

struct SimLogSummary {
  bool sim_ok = false;
  int pass = 0;
  int total = 0;
  std::optional<long> cycles;
  std::vector<FailingVector> failures;
};

// Phase 1a: extract the port list of `top_module` from Verilog-2005 source
// (ANSI or non-ANSI headers; parameterized ranges resolved from parameter
// defaults).
std::vector<Port> parse_ports(const std::string& dut_source,
                              const std::string& top_module);

// Phase 1b: assign categories by the fixed first-match rule table:
//   1. ClockReset — any underscore token equals clk/clock, or the name
//      starts with rst/reset (optionally followed by _n/_p/_...).
//   2. Control — a control keyword (valid, ready, en, enable, start, done,
//      sel, mode, we, re, req, ack, flush, stall) appears as an underscore
//      token, or the input is 1 bit wide.
//   3. Datapath — everything else.
// Outputs are marked Observed. InOut ports are rejected.
std::vector<Port> classify_ports(std::vector<Port> ports);

// Phase 2: per-signal stimulus. Control w<=8 -> exhaustive 2^w values;
// wider controls -> constrained random; datapaths -> corner seeds
// (0, all-ones, alternating 0xAA.., 0x55..) then random fill.
StimulusPlan plan_stimulus(const std::vector<Port>& ports,
                           const StimulusConfig& config);

// Phase 3: emit the self-checking IEEE 1364-2005 testbench instantiating
// the DUT and <top_module>_ref side by side. `golden_ports` must match the
// DUT ports or emission fails listing the differences.
TestbenchBundle emit_testbench(const std::vector<Port>& dut_ports,
                               const StimulusPlan& plan,
                               const std::string& top_module,
                               const std::vector<Port>& golden_ports,
                               double clock_period_ns);

// Extracts STG_RESULT / STG_CYCLES / STG_FAIL lines from simulator stdout.
// Absent or malformed summary -> sim_ok=false.
SimLogSummary parse_sim_log(const std::string& stdout_text);

// Generator version recorded in the emitted file header.
inline constexpr const char* kGeneratorVersion = "evolve-stg v1";

}  // namespace evolve::stg
