#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "evolve/domain.hpp"
#include "evolve/eda.hpp"
#include "evolve/evaluator.hpp"
#include "evolve/llm.hpp"
#include "evolve/stg.hpp"
#include "json.hpp"

namespace evolve::orch {

enum class StrategyKind { Mcts, Igr };

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// CLI exit codes.
inline constexpr int kExitComplete = 0;
inline constexpr int kExitBudgetExhausted = 2;
inline constexpr int kExitConfigError = 3;
inline constexpr int kExitBackendFailure = 4;

struct RunConfig {
  StrategyKind strategy = StrategyKind::Mcts;
  int max_nodes = 300;
  int igr_ideas = 60;        // k
  int igr_chain_length = 5;  // m
  int expansion_rate = 3;
  double exploration_c = 1.4;
  std::vector<double> clock_sweep;  // Opt only; empty -> single run
  std::uint64_t seed = 0;
  std::string backend_kind = "synthetic";  // open-source | synthetic
  std::string llm_kind = "mock";           // remote | mock
  std::filesystem::path out_dir;           // empty -> no persistence
  std::optional<Directive> directive_override;
  std::filesystem::path prompts_dir;
  llm::LlmConfig llm_config;
  eda::ToolConfig tools;
  eda::SyntheticConfig synthetic;
  stg::StimulusConfig stimulus;
  std::string llm_fixtures_path;  // replay fixtures for --llm mock runs
};

struct RunResult {
  Archive archive;
  llm::TokenUsage tokens;
  bool solved = false;
  std::optional<int> nodes_to_solve;
  int exit_code = kExitComplete;
  std::string failure;  // backend failure detail when exit_code == 4
};

// Reads problem.md / golden.v / problem.json (plus optional context.md,
// tb.v) into a validated ProblemSpec.
ProblemSpec ingest_problem(const std::filesystem::path& dir);

// Builds the run's fixed testbench bundle: STG over the golden reference,
// or the user-supplied tb.v when present (STG bypass), or an empty bundle
// for the synthetic backend.
stg::TestbenchBundle make_bundle(const ProblemSpec& spec,
                                 const RunConfig& config);

// One full evolutionary run: seed generation, then
// select-parent / generate / evaluate / archive until the task is solved or
// the budget is exhausted. Checkpoints after every node when out_dir is
// set; a crashed run loses at most one candidate.
RunResult run(const ProblemSpec& spec, const RunConfig& config,
              llm::LlmClient& client, EvalBackend& backend);

// Continues a checkpointed run directory (same config, reloaded archive
// and strategy state).
RunResult resume(const std::filesystem::path& run_dir, llm::LlmClient& client,
                 EvalBackend& backend);

// Rebuilds report.json and scaling.csv from the persisted artifacts.
nlohmann::json report(const std::filesystem::path& run_dir);

// Persistence codecs (stable field layout; doubles use shortest
// round-trip formatting upstream).
nlohmann::json node_to_json(const Node& node);
Node node_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const RunConfig& config);
RunConfig config_from_json(const nlohmann::json& doc);
nlohmann::json problem_to_json(const ProblemSpec& spec);
ProblemSpec problem_from_json(const nlohmann::json& doc);

const char* to_string(StrategyKind s);
StrategyKind strategy_from_string(const std::string& s);

}  // namespace evolve::orch
