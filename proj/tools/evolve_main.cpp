#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>

#include "CLI11.hpp"
#include "evolve/eda.hpp"
#include "evolve/llm.hpp"
#include "evolve/orchestrator.hpp"
#include "evolve/stg.hpp"

namespace {

using namespace evolve;

std::string read_file_or_die(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw orch::ConfigError("cannot open " + path);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// First "module <name>" in the source; used when --top is omitted.
std::string infer_top_module(const std::string& source) {
  std::size_t pos = 0;
  while ((pos = source.find("module", pos)) != std::string::npos) {
    bool word_start = pos == 0 || !(std::isalnum(static_cast<unsigned char>(
                                        source[pos - 1])) ||
                                    source[pos - 1] == '_');
    std::size_t after = pos + 6;
    if (word_start && after < source.size() &&
        std::isspace(static_cast<unsigned char>(source[after]))) {
      while (after < source.size() &&
             std::isspace(static_cast<unsigned char>(source[after]))) {
        ++after;
      }
      std::size_t end = after;
      while (end < source.size() &&
             (std::isalnum(static_cast<unsigned char>(source[end])) ||
              source[end] == '_' || source[end] == '$')) {
        ++end;
      }
      if (end > after) {
        return source.substr(after, end - after);
      }
    }
    pos += 6;
  }
  throw orch::ConfigError("no module declaration found; pass --top");
}

struct RunArgs {
  std::string problem_dir;
  std::string strategy = "mcts";
  int max_nodes = 300;
  std::uint64_t seed = 0;
  std::string backend = "open-source";
  std::string llm = "remote";
  std::vector<double> clock_sweep;
  std::string directive;
  std::string out_dir;
  int igr_ideas = 60;
  int igr_chain_length = 5;
  int expansion_rate = 3;
  double exploration_c = 1.4;
  std::string prompts_dir;
  std::string endpoint;
  std::string model;
  std::string llm_fixtures;
  unsigned synthetic_width = 8;
  bool binary_feedback = false;
  bool resume = false;
  int random_vectors = 16;
  int max_checks = 512;
};

std::unique_ptr<EvalBackend> build_backend(const ProblemSpec& spec,
                                           const orch::RunConfig& config) {
  if (config.backend_kind == "synthetic") {
    return std::make_unique<eda::SyntheticBackend>(config.synthetic);
  }
  eda::ToolConfig tools = config.tools;
  tools.scratch_root = config.out_dir.empty()
                           ? std::filesystem::path()
                           : config.out_dir / "scratch";
  eda::validate_tools(tools);
  return std::make_unique<eda::OpenSourceBackend>(tools, spec.top_module,
                                                  spec.golden_ref);
}

std::unique_ptr<llm::LlmClient> build_llm(const orch::RunConfig& config) {
  if (config.llm_kind == "remote") {
    if (config.llm_config.endpoint.empty()) {
      throw orch::ConfigError("--endpoint is required for --llm remote");
    }
    return std::make_unique<llm::HttpLlm>(config.llm_config);
  }
  if (config.backend_kind == "synthetic") {
    return std::make_unique<eda::SyntheticLlm>(config.synthetic.width,
                                               config.seed);
  }
  if (!config.llm_fixtures_path.empty()) {
    return std::make_unique<llm::ReplayLlm>(
        llm::ReplayLlm::from_file(config.llm_fixtures_path));
  }
  throw orch::ConfigError(
      "--llm mock with the open-source backend needs --llm-fixtures");
}

int cmd_run(const RunArgs& args, bool max_nodes_given) {
  ProblemSpec spec = orch::ingest_problem(args.problem_dir);

  orch::RunConfig config;
  config.strategy = orch::strategy_from_string(args.strategy);
  config.max_nodes = max_nodes_given ? args.max_nodes : spec.max_nodes;
  config.igr_ideas = args.igr_ideas;
  config.igr_chain_length = args.igr_chain_length;
  config.expansion_rate = args.expansion_rate;
  config.exploration_c = args.exploration_c;
  config.clock_sweep = args.clock_sweep;
  config.seed = args.seed;
  config.backend_kind = args.backend;
  config.llm_kind = args.llm;
  config.prompts_dir = args.prompts_dir;
  config.llm_fixtures_path = args.llm_fixtures;
  config.stimulus.random_vectors = args.random_vectors;
  config.stimulus.max_total_checks = args.max_checks;
  config.tools = eda::ToolConfig::from_env();
  config.synthetic.seed = args.seed;
  config.synthetic.width = args.synthetic_width;
  config.synthetic.fine_grained = !args.binary_feedback;
  config.synthetic.landscape = spec.task.kind == TaskType::Opt
                                   ? eda::Landscape::HammingOpt
                                   : eda::Landscape::HammingGen;
  config.llm_config.endpoint = args.endpoint;
  config.llm_config.model_name = args.model;
  if (!args.directive.empty()) {
    Directive d = directive_from_string(args.directive);
    config.directive_override = d;
    spec.task.directive = d;
  }
  config.out_dir = args.out_dir.empty()
                       ? std::filesystem::path("runs") /
                             (spec.name + "-" + args.strategy + "-seed" +
                              std::to_string(args.seed))
                       : std::filesystem::path(args.out_dir);

  if (args.resume) {
    auto backend = build_backend(spec, config);
    auto client = build_llm(config);
    orch::RunResult result = orch::resume(config.out_dir, *client, *backend);
    std::cout << "resumed: " << result.archive.node_count() << " nodes, best "
              << (result.archive.best()
                      ? format_double(result.archive.best()->score)
                      : "n/a")
              << "\n";
    return result.exit_code;
  }

  // Opt clock sweeps are independent runs, one per period.
  std::vector<double> periods = config.clock_sweep;
  if (periods.empty()) {
    periods.push_back(spec.clock_period_ns);
  } else if (spec.task.kind != TaskType::Opt) {
    throw orch::ConfigError("--clock-sweep applies to opt tasks only");
  }

  int exit_code = orch::kExitComplete;
  std::filesystem::path base_out = config.out_dir;
  for (double period : periods) {
    ProblemSpec run_spec = spec;
    run_spec.clock_period_ns = period;
    orch::RunConfig run_config = config;
    if (periods.size() > 1) {
      run_config.out_dir =
          base_out / ("tclk_" + format_double(period) + "ns");
    }
    auto backend = build_backend(run_spec, run_config);
    auto client = build_llm(run_config);
    orch::RunResult result =
        orch::run(run_spec, run_config, *client, *backend);
    std::cout << "run " << run_config.out_dir.string() << ": "
              << result.archive.node_count() << " nodes, best "
              << (result.archive.best()
                      ? format_double(result.archive.best()->score)
                      : "n/a");
    if (result.nodes_to_solve) {
      std::cout << ", solved at node " << *result.nodes_to_solve;
    }
    std::cout << ", tokens " << result.tokens.total() << "\n";
    if (!result.failure.empty()) {
      std::cerr << "backend failure: " << result.failure << "\n";
    }
    exit_code = std::max(exit_code, result.exit_code);
  }
  return exit_code;
}

int cmd_stg(const std::string& dut_path, const std::string& golden_path,
            std::string top, std::uint64_t seed, const std::string& out_path,
            int random_vectors, int max_checks, double clock_period) {
  std::string dut_src = read_file_or_die(dut_path);
  std::string golden_src = read_file_or_die(golden_path);
  if (top.empty()) {
    top = infer_top_module(dut_src);
  }
  std::vector<stg::Port> dut_ports =
      stg::classify_ports(stg::parse_ports(dut_src, top));
  std::vector<stg::Port> golden_ports =
      stg::classify_ports(stg::parse_ports(golden_src, top + "_ref"));
  stg::StimulusConfig stim;
  stim.seed = seed;
  stim.random_vectors = random_vectors;
  stim.max_total_checks = max_checks;
  stg::StimulusPlan plan = stg::plan_stimulus(dut_ports, stim);
  stg::TestbenchBundle bundle =
      stg::emit_testbench(dut_ports, plan, top, golden_ports, clock_period);
  if (out_path.empty()) {
    std::cout << bundle.source;
  } else {
    std::ofstream out(out_path, std::ios::binary);
    out << bundle.source;
    std::cout << "wrote " << out_path << " (" << bundle.total_vectors
              << " checks)\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"evolve - evolutionary search engine for HDL generation and "
               "PPA optimization"};
  app.require_subcommand(1);

  RunArgs run_args;
  CLI::App* run_cmd =
      app.add_subcommand("run", "Run an evolutionary search on a problem");
  run_cmd->add_option("--problem", run_args.problem_dir, "Problem directory")
      ->required();
  run_cmd->add_option("--strategy", run_args.strategy, "mcts|igr")
      ->check(CLI::IsMember({"mcts", "igr"}));
  run_cmd->add_option("--max-nodes", run_args.max_nodes, "Evaluation budget");
  run_cmd->add_option("--seed", run_args.seed, "Run seed");
  run_cmd->add_option("--backend", run_args.backend, "open-source|synthetic")
      ->check(CLI::IsMember({"open-source", "synthetic"}));
  run_cmd->add_option("--llm", run_args.llm, "remote|mock")
      ->check(CLI::IsMember({"remote", "mock"}));
  run_cmd
      ->add_option("--clock-sweep", run_args.clock_sweep,
                   "Clock periods in ns, e.g. 3,4,5,6,7 (opt tasks)")
      ->delimiter(',');
  run_cmd->add_option("--directive", run_args.directive,
                      "balanced|opt-area|opt-cycle");
  run_cmd->add_option("--out", run_args.out_dir, "Run output directory");
  run_cmd->add_option("--k", run_args.igr_ideas, "IGR idea count");
  run_cmd->add_option("--m", run_args.igr_chain_length, "IGR chain length");
  run_cmd->add_option("--expansion-rate", run_args.expansion_rate,
                      "MCTS children per node");
  run_cmd->add_option("--c", run_args.exploration_c,
                      "MCTS exploration constant");
  run_cmd->add_option("--prompts", run_args.prompts_dir,
                      "Prompt template directory");
  run_cmd->add_option("--endpoint", run_args.endpoint,
                      "Chat-completion endpoint URL");
  run_cmd->add_option("--model", run_args.model, "Model name");
  run_cmd->add_option("--llm-fixtures", run_args.llm_fixtures,
                      "Replay fixture file for --llm mock");
  run_cmd->add_option("--synthetic-width", run_args.synthetic_width,
                      "Synthetic landscape width in bits");
  run_cmd->add_flag("--binary-feedback", run_args.binary_feedback,
                    "Degrade the synthetic backend to pass/fail feedback");
  run_cmd->add_flag("--resume", run_args.resume,
                    "Continue the checkpointed run in --out");
  run_cmd->add_option("--random-vectors", run_args.random_vectors,
                      "Random stimulus vectors per signal");
  run_cmd->add_option("--max-checks", run_args.max_checks,
                      "Soft cap on testbench check events");

  std::string report_dir;
  CLI::App* report_cmd =
      app.add_subcommand("report", "Summarize a finished run directory");
  report_cmd->add_option("run_dir", report_dir, "Run directory")->required();

  std::string stg_dut, stg_golden, stg_top, stg_out;
  std::uint64_t stg_seed = 0;
  int stg_random = 16, stg_max_checks = 512;
  double stg_clock = 4.0;
  CLI::App* stg_cmd = app.add_subcommand(
      "stg", "Emit a standalone self-checking testbench for a DUT");
  stg_cmd->add_option("dut", stg_dut, "DUT Verilog file")->required();
  stg_cmd->add_option("--golden", stg_golden, "Golden reference file")
      ->required();
  stg_cmd->add_option("--top", stg_top, "Top module name (default: inferred)");
  stg_cmd->add_option("--seed", stg_seed, "Stimulus seed");
  stg_cmd->add_option("--out", stg_out, "Output file (default: stdout)");
  stg_cmd->add_option("--random-vectors", stg_random,
                      "Random vectors per signal");
  stg_cmd->add_option("--max-checks", stg_max_checks,
                      "Soft cap on check events");
  stg_cmd->add_option("--clock-period", stg_clock, "Clock period in ns");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return evolve::orch::kExitConfigError;
  }

  try {
    if (run_cmd->parsed()) {
      return cmd_run(run_args, run_cmd->count("--max-nodes") > 0);
    }
    if (report_cmd->parsed()) {
      std::cout << evolve::orch::report(report_dir).dump(2) << "\n";
      return 0;
    }
    if (stg_cmd->parsed()) {
      return cmd_stg(stg_dut, stg_golden, stg_top, stg_seed, stg_out,
                     stg_random, stg_max_checks, stg_clock);
    }
  } catch (const evolve::orch::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return evolve::orch::kExitConfigError;
  } catch (const evolve::stg::StgError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return evolve::orch::kExitConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return evolve::orch::kExitConfigError;
  } catch (const evolve::BackendError& e) {
    std::cerr << "backend failure: " << e.what() << "\n";
    return evolve::orch::kExitBackendFailure;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return evolve::orch::kExitBackendFailure;
  }
  return 0;
}
