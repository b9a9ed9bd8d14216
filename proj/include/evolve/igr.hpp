#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "evolve/domain.hpp"
#include "evolve/evaluator.hpp"
#include "evolve/llm.hpp"

namespace evolve::igr {

struct Idea {
  int index = 0;  // 1-based
  std::string text;
  std::string context_used;  // reference text injected into the prompt, if any
};

enum class ChainStatus { Active, Exhausted, Solved };

// Independent refinement chain seeded by one idea. Lineage is strictly
// linear: node j's parent is node j-1.
struct Chain {
  Idea idea;
  std::vector<Node> nodes;
  ChainStatus status = ChainStatus::Active;
};

struct EditHunk {
  std::string search_block;
  std::string replace_block;
};

struct EditScript {
  std::vector<EditHunk> hunks;
};

class EditError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Extracts <<<SEARCH / ==== / >>>REPLACE hunks; anything outside the
// fences is ignored.
EditScript parse_edit_script(const std::string& response);

// Applies hunks in order; every search block must match the evolving text
// exactly once or EditError is raised.
std::string apply_edits(const std::string& parent_code,
                        const EditScript& script);

// Observer for every LLM exchange (token accounting + transcripts).
using LlmObserver =
    std::function<void(const llm::PromptBundle&, const llm::LlmResult&)>;

// Evaluation seam so chain logic is testable without a full evaluator
// stack. The node id names the candidate's scratch directory.
using EvaluateFn =
    std::function<EvalOutcome(const std::string& code, NodeId id)>;

// Hands out (node id, budget index) pairs; shared across strategies by the
// orchestrator.
struct NodeAllocator {
  NodeId next_id = 1;
  int next_index = 1;
  std::pair<NodeId, int> alloc() { return {next_id++, next_index++}; }
};

// Phase 1: k diverse ideas, each prompt embedding all earlier idea texts.
// A failed idea call is retried per policy then skipped (logged gap).
std::vector<Idea> generate_ideas(const ProblemSpec& spec, int k,
                                 llm::LlmClient& client,
                                 const llm::PromptLibrary& lib,
                                 const LlmObserver& observe = {});

// Advances `chain` by one node (root implementation first, then diff-based
// refinements). Returns the appended node, or nullopt when the chain is
// already done. Edit failures are surfaced to the LLM once, then a
// full-file regeneration is attempted; a candidate is evaluated either way
// so the slot is never wasted silently.
std::optional<Node> advance_chain(Chain& chain, const ProblemSpec& spec,
                                  int chain_length,
                                  const EvaluateFn& evaluate_fn,
                                  llm::LlmClient& client,
                                  const llm::PromptLibrary& lib,
                                  NodeAllocator& alloc, int max_nodes,
                                  const LlmObserver& observe = {});

// Steps a single chain to completion (at most `chain_length` nodes).
Chain run_chain(Chain chain, const ProblemSpec& spec, int chain_length,
                const EvaluateFn& evaluate_fn, llm::LlmClient& client,
                const llm::PromptLibrary& lib, NodeAllocator& alloc,
                int max_nodes, const LlmObserver& observe = {});

const char* to_string(ChainStatus s);

}  // namespace evolve::igr
