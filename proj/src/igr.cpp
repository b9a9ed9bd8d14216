#include "evolve/igr.hpp"

#include <iostream>
#include <sstream>

namespace evolve::igr {

namespace {

std::string trim_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

constexpr const char* kSearchMarker = "<<<SEARCH";
constexpr const char* kSplitMarker = "====";
constexpr const char* kReplaceMarker = ">>>REPLACE";

std::size_t count_occurrences(const std::string& haystack,
                              const std::string& needle) {
  if (needle.empty()) return 0;
  std::size_t count = 0, pos = 0;
  while ((pos = haystack.find(needle, pos)) != std::string::npos) {
    ++count;
    pos += needle.size();
  }
  return count;
}

std::string format_reminder() {
  return "\n\nReminder: respond with one or more edit blocks in exactly this "
         "form:\n<<<SEARCH\n<text copied verbatim from the candidate>\n====\n"
         "<replacement text>\n>>>REPLACE";
}

}  // namespace

EditScript parse_edit_script(const std::string& response) {
  EditScript script;
  std::istringstream is(response);
  std::string line;
  enum class State { Outside, InSearch, InReplace } state = State::Outside;
  std::vector<std::string> search, replace;
  auto join = [](const std::vector<std::string>& lines) {
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (i) out.push_back('\n');
      out += lines[i];
    }
    return out;
  };
  while (std::getline(is, line)) {
    line = trim_cr(line);
    switch (state) {
      case State::Outside:
        if (line == kSearchMarker) {
          search.clear();
          replace.clear();
          state = State::InSearch;
        }
        break;
      case State::InSearch:
        if (line == kSplitMarker) {
          state = State::InReplace;
        } else {
          search.push_back(line);
        }
        break;
      case State::InReplace:
        if (line == kReplaceMarker) {
          script.hunks.push_back({join(search), join(replace)});
          state = State::Outside;
        } else {
          replace.push_back(line);
        }
        break;
    }
  }
  return script;
}

std::string apply_edits(const std::string& parent_code,
                        const EditScript& script) {
  std::string code = parent_code;
  for (std::size_t i = 0; i < script.hunks.size(); ++i) {
    const EditHunk& hunk = script.hunks[i];
    if (hunk.search_block.empty()) {
      throw EditError("hunk " + std::to_string(i + 1) +
                      ": empty search block");
    }
    std::size_t n = count_occurrences(code, hunk.search_block);
    if (n == 0) {
      throw EditError("hunk " + std::to_string(i + 1) +
                      ": search text not found");
    }
    if (n > 1) {
      throw EditError("hunk " + std::to_string(i + 1) + ": ambiguous match (" +
                      std::to_string(n) + " occurrences)");
    }
    std::size_t pos = code.find(hunk.search_block);
    code.replace(pos, hunk.search_block.size(), hunk.replace_block);
  }
  return code;
}

std::vector<Idea> generate_ideas(const ProblemSpec& spec, int k,
                                 llm::LlmClient& client,
                                 const llm::PromptLibrary& lib,
                                 const LlmObserver& observe) {
  if (k < 1) {
    throw std::invalid_argument("generate_ideas: k must be >= 1");
  }
  std::vector<Idea> ideas;
  std::vector<std::string> prior_texts;
  for (int i = 1; i <= k; ++i) {
    llm::PromptBundle bundle = llm::make_idea_prompt(lib, spec, prior_texts);
    std::string text;
    bool got = false;
    for (int attempt = 0; attempt < 2 && !got; ++attempt) {
      llm::PromptBundle attempt_bundle = bundle;
      if (attempt == 1) {
        attempt_bundle.user +=
            "\n\nReminder: reply with the idea text itself, nothing else.";
      }
      try {
        llm::LlmResult result = client.complete(attempt_bundle);
        if (observe) observe(attempt_bundle, result);
        if (!result.text.empty()) {
          text = result.text;
          got = true;
        }
      } catch (const llm::LlmAuthError&) {
        throw;
      } catch (const llm::LlmError& e) {
        if (attempt == 1) {
          std::cerr << "idea " << i << " skipped: " << e.what() << "\n";
        }
      }
    }
    if (!got) continue;  // logged gap; chain count shrinks
    Idea idea;
    idea.index = i;
    idea.text = text;
    idea.context_used = spec.context_text;
    prior_texts.push_back(text);
    ideas.push_back(std::move(idea));
  }
  return ideas;
}

namespace {

struct GeneratedCandidate {
  std::string code;
};

// refinement candidate: edit-script route with one corrective retry, then
// full-file regeneration
GeneratedCandidate refine_candidate(const Node& parent,
                                    const ProblemSpec& spec,
                                    llm::LlmClient& client,
                                    const llm::PromptLibrary& lib,
                                    const std::string& budget_info,
                                    const LlmObserver& observe) {
  llm::PromptBundle bundle =
      llm::make_refine_prompt(lib, spec, parent, budget_info, true);
  std::string failure_note;
  for (int attempt = 0; attempt < 2; ++attempt) {
    llm::PromptBundle attempt_bundle = bundle;
    if (attempt == 1) {
      attempt_bundle.user += "\n\nPrevious edit failed: " + failure_note +
                             format_reminder();
    }
    llm::LlmResult result;
    try {
      result = client.complete(attempt_bundle);
    } catch (const llm::LlmAuthError&) {
      throw;
    } catch (const llm::LlmError& e) {
      failure_note = e.what();
      continue;
    }
    if (observe) observe(attempt_bundle, result);
    EditScript script = parse_edit_script(result.text);
    if (script.hunks.empty()) {
      failure_note = "no edit blocks found in the response";
      continue;
    }
    try {
      return {apply_edits(parent.code, script)};
    } catch (const EditError& e) {
      failure_note = e.what();
    }
  }

  // fall back to regenerating the whole file
  llm::PromptBundle full =
      llm::make_refine_prompt(lib, spec, parent, budget_info, false);
  try {
    llm::LlmResult result = client.complete(full);
    if (observe) observe(full, result);
    return {llm::extract_code(result.text)};
  } catch (const llm::LlmAuthError&) {
    throw;
  } catch (const llm::LlmError&) {
    // evaluation of the empty candidate records the failure as c_penalty
    return {""};
  }
}

}  // namespace

std::optional<Node> advance_chain(Chain& chain, const ProblemSpec& spec,
                                  int chain_length,
                                  const EvaluateFn& evaluate_fn,
                                  llm::LlmClient& client,
                                  const llm::PromptLibrary& lib,
                                  NodeAllocator& alloc, int max_nodes,
                                  const LlmObserver& observe) {
  if (chain.status != ChainStatus::Active) {
    return std::nullopt;
  }
  auto [id, index] = alloc.alloc();
  std::string budget = llm::budget_info_text(index, max_nodes);

  std::string code;
  std::optional<NodeId> parent_id;
  int depth = 0;
  if (chain.nodes.empty()) {
    llm::PromptBundle bundle =
        llm::make_idea_impl_prompt(lib, spec, chain.idea.text, budget);
    try {
      llm::LlmResult result = client.complete(bundle);
      if (observe) observe(bundle, result);
      code = llm::extract_code(result.text);
    } catch (const llm::LlmAuthError&) {
      throw;
    } catch (const llm::LlmError&) {
      code = "";
    }
  } else {
    const Node& parent = chain.nodes.back();
    parent_id = parent.id;
    depth = parent.depth + 1;
    code = refine_candidate(parent, spec, client, lib, budget, observe).code;
  }

  EvalOutcome outcome = evaluate_fn(code, id);
  Node node;
  node.id = id;
  node.code = std::move(code);
  node.score = outcome.score;
  node.feedback = outcome.feedback;
  node.parent_id = parent_id;
  node.depth = depth;
  node.created_at_node_index = index;
  chain.nodes.push_back(node);

  if (spec.task.kind == TaskType::Gen && node.score >= 1.0) {
    chain.status = ChainStatus::Solved;
  } else if (static_cast<int>(chain.nodes.size()) >= chain_length) {
    chain.status = ChainStatus::Exhausted;
  }
  return node;
}

Chain run_chain(Chain chain, const ProblemSpec& spec, int chain_length,
                const EvaluateFn& evaluate_fn, llm::LlmClient& client,
                const llm::PromptLibrary& lib, NodeAllocator& alloc,
                int max_nodes, const LlmObserver& observe) {
  while (chain.status == ChainStatus::Active) {
    if (!advance_chain(chain, spec, chain_length, evaluate_fn, client, lib,
                       alloc, max_nodes, observe)
             .has_value()) {
      break;
    }
  }
  return chain;
}

const char* to_string(ChainStatus s) {
  switch (s) {
    case ChainStatus::Active:
      return "active";
    case ChainStatus::Exhausted:
      return "exhausted";
    case ChainStatus::Solved:
      return "solved";
  }
  return "active";
}

}  // namespace evolve::igr
