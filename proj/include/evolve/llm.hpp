#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include "evolve/domain.hpp"

namespace evolve::llm {

enum class Purpose { InitialCode, Refine, IdeaGen, Summary };

const char* to_string(Purpose p);

struct PromptBundle {
  std::string system;
  std::string user;
  Purpose purpose = Purpose::InitialCode;
  std::string node_budget_info;
  std::string template_id;
};

struct LlmConfig {
  std::string endpoint;  // full URL including path, e.g. http://host:8000/v1/chat/completions
  std::string model_name;
  double temperature = 0.6;
  int max_tokens = 8192;
  std::string api_key_env = "EVOLVE_API_KEY";
  int transport_retries = 2;
};

struct TokenUsage {
  long prompt_tokens = 0;
  long completion_tokens = 0;

  TokenUsage& operator+=(const TokenUsage& o) {
    prompt_tokens += o.prompt_tokens;
    completion_tokens += o.completion_tokens;
    return *this;
  }
  long total() const { return prompt_tokens + completion_tokens; }
};

struct LlmResult {
  std::string text;
  TokenUsage usage;
};

class LlmError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Network/protocol failure; retried per config before surfacing.
class LlmTransportError : public LlmError {
 public:
  using LlmError::LlmError;
};

// Credential rejection; never retried, aborts the run before it consumes
// budget.
class LlmAuthError : public LlmError {
 public:
  using LlmError::LlmError;
};

// Response arrived but carries no usable payload (empty code block etc.).
class LlmMalformedOutput : public LlmError {
 public:
  using LlmError::LlmError;
};

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual LlmResult complete(const PromptBundle& bundle) = 0;
};

// Stable 64-bit key over (system, user) used by the replay mock.
std::uint64_t prompt_hash(const std::string& system, const std::string& user);

// Deterministic replay mock keyed on prompt hashes. Strict mode errors on
// unknown prompts; lenient mode returns a canned response (fuzzing support).
class ReplayLlm : public LlmClient {
 public:
  explicit ReplayLlm(bool strict = true) : strict_(strict) {}

  void add_fixture(const std::string& system, const std::string& user,
                   LlmResult result);
  void add_fixture_by_hash(std::uint64_t hash, LlmResult result);
  void set_canned_response(LlmResult result) { canned_ = std::move(result); }

  // Loads fixtures from a JSON file: [{"hash": "...", "text": "...",
  // "prompt_tokens": n, "completion_tokens": n}, ...].
  static ReplayLlm from_file(const std::string& path, bool strict = true);

  LlmResult complete(const PromptBundle& bundle) override;

 private:
  std::map<std::uint64_t, LlmResult> fixtures_;
  bool strict_;
  LlmResult canned_{"// canned response\n", {1, 1}};
};

// Chat-completion client over HTTP (messages array, temperature,
// max_tokens). API key read from the env var named in the config.
class HttpLlm : public LlmClient {
 public:
  explicit HttpLlm(LlmConfig config);
  LlmResult complete(const PromptBundle& bundle) override;

 private:
  LlmResult complete_once(const PromptBundle& bundle);
  LlmConfig config_;
};

// Returns the last fenced code block, or the whole response when no fence
// is present. Empty extraction -> LlmMalformedOutput.
std::string extract_code(const std::string& response);

// Versioned prompt templates. Each template file holds the system text, a
// line "===USER===", then the user text with {placeholder} slots. The
// rendered bundle records a template id (name plus content hash) so runs
// can be replayed against the exact wording.
class PromptLibrary {
 public:
  // Loads *.prompt files from `dir`; falls back to the compiled-in copies
  // of the shipped templates when the directory is missing or empty.
  static PromptLibrary load(const std::string& dir);
  static PromptLibrary builtin();

  PromptBundle render(const std::string& template_name, Purpose purpose,
                      const std::map<std::string, std::string>& values) const;

  bool has_template(const std::string& name) const;

 private:
  struct Template {
    std::string system;
    std::string user;
    std::string id;
  };
  std::map<std::string, Template> templates_;
};

// Prompt assembly for the search loops. Pure: identical inputs produce
// identical bundles.
PromptBundle make_initial_prompt(const PromptLibrary& lib,
                                 const ProblemSpec& spec,
                                 const std::string& budget_info);
PromptBundle make_refine_prompt(const PromptLibrary& lib,
                                const ProblemSpec& spec, const Node& parent,
                                const std::string& budget_info,
                                bool edit_script_format);
PromptBundle make_idea_prompt(const PromptLibrary& lib,
                              const ProblemSpec& spec,
                              const std::vector<std::string>& prior_ideas);
PromptBundle make_idea_impl_prompt(const PromptLibrary& lib,
                                   const ProblemSpec& spec,
                                   const std::string& idea,
                                   const std::string& budget_info);
PromptBundle make_summary_prompt(const PromptLibrary& lib,
                                 const std::string& code);

// "This is candidate <i> of a <max> candidate budget."
std::string budget_info_text(int index, int max_nodes);

}  // namespace evolve::llm
