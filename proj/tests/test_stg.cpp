#include <algorithm>
#include <set>
#include <sstream>

#include "doctest.h"
#include "evolve/stg.hpp"

using namespace evolve;
using namespace evolve::stg;

namespace {

// Independent scanner: counts check-call lines in emitted source.
int count_check_calls(const std::string& source) {
  std::istringstream is(source);
  std::string line;
  int count = 0;
  while (std::getline(is, line)) {
    std::size_t a = line.find_first_not_of(" \t");
    if (a == std::string::npos) continue;
    std::size_t b = line.find_last_not_of(" \t\r");
    if (line.substr(a, b - a + 1) == "stg_check;") ++count;
  }
  return count;
}

// Independent scanner: all values assigned to `name` in the source.
std::set<std::string> scan_assigned_values(const std::string& source,
                                           const std::string& name) {
  std::set<std::string> values;
  std::istringstream is(source);
  std::string line;
  const std::string prefix = name + " = ";
  while (std::getline(is, line)) {
    std::size_t a = line.find_first_not_of(" \t");
    if (a == std::string::npos) continue;
    std::string t = line.substr(a);
    if (t.rfind(prefix, 0) != 0) continue;
    std::size_t tick = t.find("'h");
    std::size_t semi = t.find(';');
    if (tick == std::string::npos || semi == std::string::npos) continue;
    values.insert(t.substr(tick + 2, semi - tick - 2));
  }
  return values;
}

std::vector<Port> classified(const std::string& src, const std::string& top) {
  return classify_ports(parse_ports(src, top));
}

const char* kSeqDut = R"(
module top(
  input clk,
  input rst_n,
  input [1:0] mode,
  input [7:0] din,
  output reg [8:0] dout
);
  always @(posedge clk) dout <= din + mode;
endmodule
)";

}  // namespace

TEST_CASE("parse_ports reads an ANSI header") {
  auto ports = parse_ports(
      "module m(input clk, input [7:0] a, output reg [3:0] y);\nendmodule\n",
      "m");
  REQUIRE(ports.size() == 3);
  CHECK(ports[0].name == "clk");
  CHECK(ports[0].direction == PortDirection::In);
  CHECK(ports[0].width == 1);
  CHECK(ports[1].name == "a");
  CHECK(ports[1].width == 8);
  CHECK(ports[2].name == "y");
  CHECK(ports[2].direction == PortDirection::Out);
  CHECK(ports[2].width == 4);
}

TEST_CASE("width is |msb-lsb|+1 regardless of bit order") {
  auto ports =
      parse_ports("module m(input [0:3] b, output y);\nendmodule\n", "m");
  CHECK(ports[0].width == 4);
}

TEST_CASE("missing module is a structured error") {
  CHECK_THROWS_WITH_AS(parse_ports("", "top"), "module 'top' not found",
                       StgError);
  CHECK_THROWS_WITH_AS(
      parse_ports("module other(input a);\nendmodule\n", "top"),
      "module 'top' not found", StgError);
}

TEST_CASE("parse_ports reads non-ANSI declarations") {
  const char* src = R"(
module legacy(a, b, y);
  input a;
  input [7:0] b;
  output reg [3:0] y;
  wire w;
endmodule
)";
  auto ports = parse_ports(src, "legacy");
  REQUIRE(ports.size() == 3);
  CHECK(ports[0].name == "a");
  CHECK(ports[0].width == 1);
  CHECK(ports[1].width == 8);
  CHECK(ports[2].direction == PortDirection::Out);
  CHECK(ports[2].width == 4);
}

TEST_CASE("undeclared non-ANSI port names the offender") {
  const char* src = "module m(a, b);\n  input a;\nendmodule\n";
  CHECK_THROWS_WITH_AS(parse_ports(src, "m"),
                       "port 'b' has no direction declaration", StgError);
}

TEST_CASE("parameterized ranges resolve from defaults") {
  const char* src = R"(
module p #(parameter W = 8, parameter D = 2*W) (
  input clk,
  input [W-1:0] a,
  output [D-1:0] y
);
endmodule
)";
  auto ports = parse_ports(src, "p");
  CHECK(ports[1].width == 8);
  CHECK(ports[2].width == 16);
}

TEST_CASE("body parameters resolve for non-ANSI ranges") {
  const char* src = R"(
module q(d, y);
  parameter WIDTH = 12;
  input [WIDTH-1:0] d;
  output [WIDTH-1:0] y;
endmodule
)";
  auto ports = parse_ports(src, "q");
  CHECK(ports[0].width == 12);
}

TEST_CASE("unknown parameter in a range is an error") {
  const char* src = "module m(input [N-1:0] a, output y);\nendmodule\n";
  CHECK_THROWS_AS(parse_ports(src, "m"), StgError);
}

TEST_CASE("comments and direction carry-over parse correctly") {
  const char* src = R"(
// header comment
module c(
  input  wire [3:0] a, b, /* two nibbles */
  output wire       y
);
endmodule
)";
  auto ports = parse_ports(src, "c");
  REQUIRE(ports.size() == 3);
  CHECK(ports[0].width == 4);
  CHECK(ports[1].width == 4);  // bare name inherits the 4-bit range
  CHECK(ports[1].name == "b");
  CHECK(ports[2].width == 1);
}

TEST_CASE("classifier rule table") {
  auto cat = [](const std::string& name, unsigned width) {
    Port p;
    p.name = name;
    p.width = width;
    return classify_ports({p})[0].category;
  };
  CHECK(cat("clk", 1) == PortCategory::ClockReset);
  CHECK(cat("clock", 1) == PortCategory::ClockReset);
  CHECK(cat("clk_in", 1) == PortCategory::ClockReset);
  CHECK(cat("sys_clk", 1) == PortCategory::ClockReset);
  CHECK(cat("rst", 1) == PortCategory::ClockReset);
  CHECK(cat("rst_n", 1) == PortCategory::ClockReset);
  CHECK(cat("reset", 1) == PortCategory::ClockReset);
  CHECK(cat("resetn", 1) == PortCategory::ClockReset);

  CHECK(cat("valid", 1) == PortCategory::Control);
  CHECK(cat("in_valid", 1) == PortCategory::Control);
  CHECK(cat("ready", 1) == PortCategory::Control);
  CHECK(cat("mode", 3) == PortCategory::Control);
  CHECK(cat("sel", 2) == PortCategory::Control);
  CHECK(cat("mem_we", 1) == PortCategory::Control);
  // width-1 inputs default to control even without a keyword
  CHECK(cat("bit_in", 1) == PortCategory::Control);

  CHECK(cat("data_in", 32) == PortCategory::Datapath);
  CHECK(cat("din", 8) == PortCategory::Datapath);
  CHECK(cat("operand_a", 16) == PortCategory::Datapath);
  // 'rstate' must not be mistaken for a reset
  CHECK(cat("rstate", 4) == PortCategory::Datapath);
}

TEST_CASE("outputs are observed and inout is rejected") {
  Port out;
  out.name = "y";
  out.direction = PortDirection::Out;
  CHECK(classify_ports({out})[0].category == PortCategory::Observed);

  Port io;
  io.name = "sda";
  io.direction = PortDirection::InOut;
  CHECK_THROWS_AS(classify_ports({io}), StgError);
}

TEST_CASE("classification is deterministic") {
  auto ports = classified(kSeqDut, "top");
  auto again = classified(kSeqDut, "top");
  CHECK(ports == again);
}

TEST_CASE("plan gives exhaustive coverage to narrow controls") {
  auto ports = classified(kSeqDut, "top");
  StimulusConfig cfg;
  cfg.seed = 42;
  cfg.random_vectors = 16;
  StimulusPlan plan = plan_stimulus(ports, cfg);
  REQUIRE(plan.controls.size() == 1);
  CHECK(plan.controls[0].port == "mode");
  CHECK(plan.controls[0].mode == StimulusMode::Exhaustive);
  CHECK(plan.controls[0].values.size() == 4);  // 2^2
  REQUIRE(plan.datapaths.size() == 1);
  CHECK(plan.datapaths[0].corner_values.size() == 4);
  CHECK(plan.datapaths[0].random_values.size() == 16);
}

TEST_CASE("wide controls switch to constrained random") {
  Port wide;
  wide.name = "mode_bus";
  wide.width = 12;
  StimulusConfig cfg;
  cfg.random_vectors = 10;
  StimulusPlan plan = plan_stimulus(classify_ports({wide}), cfg);
  REQUIRE(plan.controls.size() == 1);
  CHECK(plan.controls[0].mode == StimulusMode::ConstrainedRandom);
  CHECK(plan.controls[0].values.size() == 10);
  // 3-bit control stays exhaustive: 8 vectors
  Port narrow;
  narrow.name = "sel_mode";
  narrow.width = 3;
  StimulusPlan plan2 = plan_stimulus(classify_ports({narrow}), cfg);
  CHECK(plan2.controls[0].values.size() == 8);
}

TEST_CASE("datapath corners cover zero, ones and alternating patterns") {
  Port data;
  data.name = "din_word";
  data.width = 16;
  StimulusConfig cfg;
  StimulusPlan plan = plan_stimulus(classify_ports({data}), cfg);
  REQUIRE(plan.datapaths.size() == 1);
  const auto& corners = plan.datapaths[0].corner_values;
  REQUIRE(corners.size() == 4);
  CHECK(corners[0] == "0000");
  CHECK(corners[1] == "ffff");
  CHECK(corners[2] == "aaaa");
  CHECK(corners[3] == "5555");
}

TEST_CASE("corners truncate to odd widths") {
  Port data;
  data.name = "din_nine";
  data.width = 9;
  StimulusPlan plan = plan_stimulus(classify_ports({data}), {});
  const auto& corners = plan.datapaths[0].corner_values;
  CHECK(corners[0] == "000");
  CHECK(corners[1] == "1ff");
  CHECK(corners[2] == "0aa");  // odd bits of a 9-bit lane
  CHECK(corners[3] == "155");
}

TEST_CASE("plans are a pure function of ports and config") {
  auto ports = classified(kSeqDut, "top");
  StimulusConfig cfg;
  cfg.seed = 7;
  StimulusPlan a = plan_stimulus(ports, cfg);
  StimulusPlan b = plan_stimulus(ports, cfg);
  CHECK(a.datapaths[0].random_values == b.datapaths[0].random_values);
  cfg.seed = 8;
  StimulusPlan c = plan_stimulus(ports, cfg);
  CHECK(a.datapaths[0].random_values != c.datapaths[0].random_values);
}

TEST_CASE("emitted testbench matches the counted-check example") {
  // 1 clock + 1 reset + 1 control (w=2) + 1 datapath (w=8), 16 randoms:
  // 4 exhaustive x (4 corners + 16 randoms) = 80 checks
  auto ports = classified(kSeqDut, "top");
  StimulusConfig cfg;
  cfg.seed = 1;
  cfg.random_vectors = 16;
  StimulusPlan plan = plan_stimulus(ports, cfg);
  TestbenchBundle bundle = emit_testbench(ports, plan, "top", ports, 4.0);
  CHECK(bundle.total_vectors == 80);
  CHECK(count_check_calls(bundle.source) == 80);
}

TEST_CASE("identical seeds emit byte-identical testbenches") {
  auto ports = classified(kSeqDut, "top");
  StimulusConfig cfg;
  cfg.seed = 99;
  StimulusPlan plan = plan_stimulus(ports, cfg);
  TestbenchBundle a = emit_testbench(ports, plan, "top", ports, 4.0);
  TestbenchBundle b = emit_testbench(ports, plan, "top", ports, 4.0);
  CHECK(a.source == b.source);
  StimulusConfig other = cfg;
  other.seed = 100;
  TestbenchBundle c =
      emit_testbench(ports, plan_stimulus(ports, other), "top", ports, 4.0);
  CHECK(a.source != c.source);
}

TEST_CASE("every narrow control value appears in the emitted source") {
  auto ports = classified(kSeqDut, "top");
  StimulusPlan plan = plan_stimulus(ports, {});
  TestbenchBundle bundle = emit_testbench(ports, plan, "top", ports, 4.0);
  std::set<std::string> seen = scan_assigned_values(bundle.source, "mode");
  CHECK(seen == std::set<std::string>{"0", "1", "2", "3"});
  // corner values for the datapath are all present
  std::set<std::string> din = scan_assigned_values(bundle.source, "din");
  for (const char* corner : {"00", "ff", "aa", "55"}) {
    CHECK(din.count(corner) == 1);
  }
}

TEST_CASE("the check cap trims random fill but never corners or coverage") {
  const char* src = R"(
module capped(
  input clk,
  input [3:0] mode,
  input [15:0] din,
  output [15:0] dout
);
endmodule
)";
  auto ports = classified(src, "capped");
  StimulusConfig cfg;
  cfg.random_vectors = 100;  // would be 16 x 104 = 1664 checks uncapped
  cfg.max_total_checks = 512;
  StimulusPlan plan = plan_stimulus(ports, cfg);
  CHECK(plan.outer_steps() == 16);
  CHECK(plan.inner_steps() == 32);  // 512 / 16
  TestbenchBundle bundle = emit_testbench(ports, plan, "capped", ports, 4.0);
  CHECK(bundle.total_vectors == 512);
  CHECK(count_check_calls(bundle.source) == 512);
  // full exhaustive coverage of the 4-bit control survives the cap
  std::set<std::string> seen = scan_assigned_values(bundle.source, "mode");
  CHECK(seen.size() == 16);
}

TEST_CASE("golden port mismatch lists the differing port") {
  auto ports = classified(kSeqDut, "top");
  auto golden = ports;
  golden.push_back({"extra_flag", PortDirection::In, 1, PortCategory::Control});
  try {
    emit_testbench(ports, plan_stimulus(ports, {}), "top", golden, 4.0);
    FAIL("expected StgError");
  } catch (const StgError& e) {
    CHECK(std::string(e.what()).find("extra_flag") != std::string::npos);
  }
}

TEST_CASE("width mismatches are reported too") {
  auto ports = classified(kSeqDut, "top");
  auto golden = ports;
  golden[3].width = 16;  // din
  try {
    emit_testbench(ports, plan_stimulus(ports, {}), "top", golden, 4.0);
    FAIL("expected StgError");
  } catch (const StgError& e) {
    CHECK(std::string(e.what()).find("din") != std::string::npos);
  }
}

TEST_CASE("emitted source instantiates both designs and the summary line") {
  auto ports = classified(kSeqDut, "top");
  StimulusPlan plan = plan_stimulus(ports, {});
  TestbenchBundle bundle = emit_testbench(ports, plan, "top", ports, 4.0);
  const std::string& src = bundle.source;
  CHECK(src.find("top dut (") != std::string::npos);
  CHECK(src.find("top_ref gold (") != std::string::npos);
  CHECK(src.find("`timescale 1ns/1ps") != std::string::npos);
  CHECK(src.find("STG_RESULT pass=%0d total=%0d") != std::string::npos);
  CHECK(src.find("STG_CYCLES n=%0d") != std::string::npos);
  CHECK(src.find("STG_FAIL t=%0t sig=dout exp=%h got=%h") !=
        std::string::npos);
  CHECK(src.find("$finish") != std::string::npos);
  // header records generator version and seed
  CHECK(src.rfind("// evolve-stg v1 seed=0", 0) == 0);
  // active-low reset asserted then released
  CHECK(src.find("rst_n = 1'b0;") != std::string::npos);
  CHECK(src.find("rst_n = 1'b1;") != std::string::npos);
  // half-period clock toggle for 4 ns
  CHECK(src.find("always #2 clk = ~clk;") != std::string::npos);
}

TEST_CASE("combinational designs get a clockless harness") {
  const char* src = R"(
module comb(input [7:0] a, input [7:0] b, output [8:0] s);
  assign s = a + b;
endmodule
)";
  auto ports = classified(src, "comb");
  StimulusPlan plan = plan_stimulus(ports, {});
  TestbenchBundle bundle = emit_testbench(ports, plan, "comb", ports, 4.0);
  CHECK(bundle.source.find("posedge") == std::string::npos);
  CHECK(bundle.source.find("#4;") != std::string::npos);
  CHECK(count_check_calls(bundle.source) == bundle.total_vectors);
}

TEST_CASE("a module without outputs cannot be verified") {
  const char* src = "module sink(input clk, input [7:0] a);\nendmodule\n";
  auto ports = classified(src, "sink");
  CHECK_THROWS_AS(emit_testbench(ports, plan_stimulus(ports, {}), "sink",
                                 ports, 4.0),
                  StgError);
}

TEST_CASE("parse_sim_log extracts the summary") {
  SimLogSummary s =
      parse_sim_log("booting\nSTG_CYCLES n=85\nSTG_RESULT pass=38 total=40\n");
  CHECK(s.sim_ok);
  CHECK(s.pass == 38);
  CHECK(s.total == 40);
  REQUIRE(s.cycles.has_value());
  CHECK(*s.cycles == 85);
  CHECK(static_cast<double>(s.pass) / s.total == doctest::Approx(0.95));
}

TEST_CASE("parse_sim_log failure modes") {
  CHECK_FALSE(parse_sim_log("").sim_ok);
  CHECK_FALSE(parse_sim_log("no summary here\n").sim_ok);
  CHECK_FALSE(parse_sim_log("STG_RESULT pass=x total=40\n").sim_ok);
  CHECK_FALSE(parse_sim_log("STG_RESULT pass=41 total=40\n").sim_ok);
  CHECK_FALSE(parse_sim_log("STG_RESULT pass=0 total=0\n").sim_ok);
  // duplicate summaries violate the exactly-once protocol
  CHECK_FALSE(
      parse_sim_log("STG_RESULT pass=1 total=2\nSTG_RESULT pass=1 total=2\n")
          .sim_ok);
  SimLogSummary all = parse_sim_log("STG_RESULT pass=40 total=40\n");
  CHECK(all.sim_ok);
  CHECK(static_cast<double>(all.pass) / all.total == 1.0);
}

TEST_CASE("parse_sim_log collects failure excerpts") {
  SimLogSummary s = parse_sim_log(
      "STG_FAIL t=25000 sig=dout exp=1a got=0a\n"
      "STG_FAIL t=29000 sig=dout exp=ff got=fe\n"
      "STG_RESULT pass=38 total=40\n");
  REQUIRE(s.failures.size() == 2);
  CHECK(s.failures[0].where == "t=25000 sig=dout");
  CHECK(s.failures[0].expected == "1a");
  CHECK(s.failures[0].observed == "0a");
}
