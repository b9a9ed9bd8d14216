#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "evolve/evaluator.hpp"
#include "evolve/llm.hpp"

namespace evolve::eda {

struct ToolConfig {
  std::string sim_cmd = "iverilog";
  std::string sim_run_cmd = "vvp";
  std::string synth_cmd = "yosys";
  std::string liberty_or_target;  // liberty file; empty -> generic synthesis
  std::filesystem::path scratch_root;
  int parallel_limit = 0;  // 0 -> hardware concurrency
  int sim_timeout_s = 60;
  int synth_timeout_s = 300;

  // Applies EVOLVE_IVERILOG / EVOLVE_VVP / EVOLVE_YOSYS / EVOLVE_LIBERTY
  // overrides.
  static ToolConfig from_env();
};

// Raises ConfigError (std::runtime_error) when a configured tool is not
// executable. Called once at startup, never per candidate.
void validate_tools(const ToolConfig& config);

// Extracts the cell-area statistic from a synthesis log. Liberty-mapped
// logs report "Chip area for (top )module ...: <um^2>"; generic logs fall
// back to the cell count as normalized gate-equivalents.
std::optional<double> parse_synth_area(const std::string& log);

// Critical-path delay in ps from the tech-mapping report, when present.
std::optional<double> parse_synth_delay_ps(const std::string& log);

// Icarus Verilog + Yosys subprocess drivers. The golden reference source is
// fixed at construction and compiled next to every candidate.
class OpenSourceBackend : public EvalBackend {
 public:
  OpenSourceBackend(ToolConfig config, std::string top_module,
                    std::string golden_source);
  ~OpenSourceBackend() override;

  SimResult run_sim(const std::string& code, const std::string& testbench,
                    const std::filesystem::path& workdir) override;
  SynthResult run_synth(const std::string& code, double clock_period_ns,
                        const std::filesystem::path& workdir) override;
  int parallel_limit() const override { return parallel_limit_; }

 private:
  struct Gate;  // admission gate bounding concurrent tool invocations

  ToolConfig config_;
  std::string top_module_;
  std::string golden_source_;
  int parallel_limit_;
  std::unique_ptr<Gate> gate_;
};

// ---------------------------------------------------------------------------
// Synthetic oracle: desk-scale testing of the whole engine without EDA
// tools. Candidates are integer-parameter text blocks ("value = N"); the
// score comes from a published landscape over an integer target derived
// from the seed.
// ---------------------------------------------------------------------------

enum class Landscape { HammingGen, HammingOpt };

struct SyntheticConfig {
  Landscape landscape = Landscape::HammingGen;
  std::uint64_t seed = 0;
  unsigned width = 8;  // bits in the search space
  std::optional<std::uint64_t> target;  // derived from seed when absent
  // When false, run_sim reports all-or-nothing pass counts (binary
  // feedback) instead of the per-bit gradient.
  bool fine_grained = true;
};

class SyntheticBackend : public EvalBackend {
 public:
  explicit SyntheticBackend(SyntheticConfig config);

  SimResult run_sim(const std::string& code, const std::string& testbench,
                    const std::filesystem::path& workdir) override;
  SynthResult run_synth(const std::string& code, double clock_period_ns,
                        const std::filesystem::path& workdir) override;

  std::uint64_t target() const { return target_; }
  unsigned width() const { return config_.width; }

  // Parses the "value = N" parameter block; nullopt mirrors a compile
  // failure.
  static std::optional<std::uint64_t> parse_candidate_value(
      const std::string& code);

 private:
  SyntheticConfig config_;
  std::uint64_t target_ = 0;
};

std::unique_ptr<EvalBackend> synthetic_oracle_backend(
    const SyntheticConfig& config);

// Deterministic generative mock for the synthetic landscape: emits
// "value = N" candidates, flips one pseudorandom bit of the parent value on
// refinement (honoring the edit-script format when the refine_edit template
// asked for it), and produces fixed idea/summary text. Token counts are a
// pure function of the text lengths.
class SyntheticLlm : public llm::LlmClient {
 public:
  SyntheticLlm(unsigned width, std::uint64_t seed);
  llm::LlmResult complete(const llm::PromptBundle& bundle) override;

 private:
  unsigned width_;
  std::uint64_t seed_;
};

}  // namespace evolve::eda
