#include "evolve/llm.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace evolve::llm {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(Purpose p) {
  switch (p) {
    case Purpose::InitialCode:
      return "initial_code";
    case Purpose::Refine:
      return "refine";
    case Purpose::IdeaGen:
      return "idea_gen";
    case Purpose::Summary:
      return "summary";
  }
  return "initial_code";
}

std::uint64_t prompt_hash(const std::string& system, const std::string& user) {
  // FNV-1a over system \x1e user
  std::uint64_t h = 14695981039346656037ull;
  auto mix = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
  };
  mix(system);
  h ^= 0x1e;
  h *= 1099511628211ull;
  mix(user);
  return h;
}

void ReplayLlm::add_fixture(const std::string& system, const std::string& user,
                            LlmResult result) {
  fixtures_[prompt_hash(system, user)] = std::move(result);
}

void ReplayLlm::add_fixture_by_hash(std::uint64_t hash, LlmResult result) {
  fixtures_[hash] = std::move(result);
}

ReplayLlm ReplayLlm::from_file(const std::string& path, bool strict) {
  std::ifstream in(path);
  if (!in) {
    throw LlmError("cannot open fixture file: " + path);
  }
  json doc = json::parse(in);
  ReplayLlm mock(strict);
  for (const auto& entry : doc) {
    LlmResult r;
    r.text = entry.at("text").get<std::string>();
    r.usage.prompt_tokens = entry.value("prompt_tokens", 0L);
    r.usage.completion_tokens = entry.value("completion_tokens", 0L);
    std::uint64_t hash = 0;
    if (entry.contains("hash")) {
      hash = std::stoull(entry.at("hash").get<std::string>(), nullptr, 16);
    } else {
      hash = prompt_hash(entry.value("system", ""), entry.at("user"));
    }
    mock.add_fixture_by_hash(hash, std::move(r));
  }
  return mock;
}

LlmResult ReplayLlm::complete(const PromptBundle& bundle) {
  auto it = fixtures_.find(prompt_hash(bundle.system, bundle.user));
  if (it != fixtures_.end()) {
    return it->second;
  }
  if (strict_) {
    std::ostringstream os;
    os << "no fixture for prompt hash " << std::hex
       << prompt_hash(bundle.system, bundle.user) << " (purpose "
       << to_string(bundle.purpose) << ")";
    throw LlmError(os.str());
  }
  return canned_;
}

std::string extract_code(const std::string& response) {
  // last fenced block wins; the opening fence may carry a language tag
  std::string result;
  bool found = false;
  std::size_t pos = 0;
  while (true) {
    std::size_t open = response.find("```", pos);
    if (open == std::string::npos) break;
    std::size_t body_start = response.find('\n', open);
    if (body_start == std::string::npos) break;
    ++body_start;
    std::size_t close = response.find("```", body_start);
    if (close == std::string::npos) break;
    std::string block = response.substr(body_start, close - body_start);
    while (!block.empty() && (block.back() == '\n' || block.back() == '\r')) {
      block.pop_back();
    }
    result = block;
    found = true;
    pos = close + 3;
  }
  if (!found) {
    result = response;
  }
  bool all_space = true;
  for (char c : result) {
    if (!std::isspace(static_cast<unsigned char>(c))) {
      all_space = false;
      break;
    }
  }
  if (result.empty() || all_space) {
    throw LlmMalformedOutput("response contains no code");
  }
  return result;
}

// ---------------------------------------------------------------------------
// Prompt templates
// ---------------------------------------------------------------------------

namespace {

struct BuiltinTemplate {
  const char* name;
  const char* text;
};

// Compiled-in copies of the files under prompts/. Keep both in sync; the
// files are the source of truth for deployed runs.
const BuiltinTemplate kBuiltinTemplates[] = {
    {"initial_code",
     R"(You are an expert Verilog-2005 RTL designer.
===USER===
Write a complete Verilog-2005 module that satisfies the problem below.
Respond with a single fenced code block containing only the module source.

## Problem
{description}

## Target
Top module name: {top_module}. {budget}
)"},
    {"refine",
     R"(You are an expert Verilog-2005 RTL designer improving an existing candidate.
===USER===
Improve the candidate design below. Respond with a single fenced code block
containing the complete revised module.

## Problem
{description}

## Objective
{directive}

## Candidate (score {score})
```verilog
{code}
```

## Evaluation feedback
{feedback}

{budget}
)"},
    {"refine_edit",
     R"(You are an expert Verilog-2005 RTL designer applying targeted edits.
===USER===
Refine the candidate using search/replace edit blocks. For each change emit:
<<<SEARCH
exact text copied from the candidate
====
replacement text
>>>REPLACE
Text outside the blocks is ignored; each search text must match exactly once.

## Problem
{description}

## Objective
{directive}

## Candidate (score {score})
```verilog
{code}
```

## Evaluation feedback
{feedback}

{budget}
)"},
    {"idea_gen",
     R"(You are a hardware architect brainstorming implementation strategies.
===USER===
Propose one new high-level architectural concept for the problem below.
Be specific about the microarchitecture. Keep it under 120 words and make
it clearly different from the earlier ideas listed.

## Problem
{description}

## Earlier ideas
{prior_ideas}

## Reference notes
{context}
)"},
    {"idea_impl",
     R"(You are an expert Verilog-2005 RTL designer.
===USER===
Implement the architectural idea below as a complete Verilog-2005 module.
Respond with a single fenced code block containing only the module source.

## Problem
{description}

## Architectural idea
{idea}

## Target
Top module name: {top_module}. {budget}
)"},
    {"summary",
     R"(You summarize hardware designs.
===USER===
Summarize the architecture of the Verilog module below in at most 200 words.
Cover the datapath structure, control scheme, and any notable trade-offs.

```verilog
{code}
```
)"},
};

std::string short_hash(const std::string& content) {
  std::uint64_t h = prompt_hash(content, "");
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%08llx",
                static_cast<unsigned long long>(h & 0xffffffffull));
  return buf;
}

std::string substitute(const std::string& text,
                       const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '{') {
      std::size_t close = text.find('}', i);
      if (close != std::string::npos) {
        std::string key = text.substr(i + 1, close - i - 1);
        auto it = values.find(key);
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(text[i]);
    ++i;
  }
  return out;
}

constexpr const char* kUserMarker = "===USER===";

}  // namespace

PromptLibrary PromptLibrary::builtin() {
  PromptLibrary lib;
  for (const auto& t : kBuiltinTemplates) {
    std::string text = t.text;
    std::size_t marker = text.find(kUserMarker);
    Template tpl;
    tpl.system = text.substr(0, marker);
    tpl.user = text.substr(marker + std::string(kUserMarker).size());
    while (!tpl.system.empty() && tpl.system.back() == '\n') {
      tpl.system.pop_back();
    }
    if (!tpl.user.empty() && tpl.user.front() == '\n') {
      tpl.user.erase(tpl.user.begin());
    }
    tpl.id = std::string(t.name) + "#builtin-" + short_hash(text);
    lib.templates_[t.name] = std::move(tpl);
  }
  return lib;
}

PromptLibrary PromptLibrary::load(const std::string& dir) {
  PromptLibrary lib = builtin();
  if (dir.empty() || !fs::is_directory(dir)) {
    return lib;
  }
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".prompt") {
      continue;
    }
    std::ifstream in(entry.path());
    std::stringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    std::size_t marker = text.find(kUserMarker);
    if (marker == std::string::npos) {
      throw LlmError("template " + entry.path().string() +
                     " lacks the ===USER=== marker");
    }
    Template tpl;
    tpl.system = text.substr(0, marker);
    tpl.user = text.substr(marker + std::string(kUserMarker).size());
    while (!tpl.system.empty() && tpl.system.back() == '\n') {
      tpl.system.pop_back();
    }
    if (!tpl.user.empty() && tpl.user.front() == '\n') {
      tpl.user.erase(tpl.user.begin());
    }
    std::string name = entry.path().stem().string();
    tpl.id = name + "#" + short_hash(text);
    lib.templates_[name] = std::move(tpl);
  }
  return lib;
}

bool PromptLibrary::has_template(const std::string& name) const {
  return templates_.count(name) > 0;
}

PromptBundle PromptLibrary::render(
    const std::string& template_name, Purpose purpose,
    const std::map<std::string, std::string>& values) const {
  auto it = templates_.find(template_name);
  if (it == templates_.end()) {
    throw LlmError("unknown prompt template '" + template_name + "'");
  }
  PromptBundle bundle;
  bundle.system = substitute(it->second.system, values);
  bundle.user = substitute(it->second.user, values);
  bundle.purpose = purpose;
  bundle.template_id = it->second.id;
  auto budget = values.find("budget");
  if (budget != values.end()) {
    bundle.node_budget_info = budget->second;
  }
  return bundle;
}

// ---------------------------------------------------------------------------
// Prompt assembly
// ---------------------------------------------------------------------------

namespace {

std::string objective_sentence(const ProblemSpec& spec) {
  if (spec.task.kind == TaskType::Gen) {
    return "achieve full functional correctness on every check";
  }
  return directive_sentence(spec.task.directive);
}

std::string feedback_text(const Node& parent) {
  std::ostringstream os;
  os << parent.feedback.text;
  if (!parent.feedback.failing_vectors.empty()) {
    os << "\nFailing checks:";
    for (const auto& fv : parent.feedback.failing_vectors) {
      os << "\n  " << fv.where << " expected=" << fv.expected
         << " observed=" << fv.observed;
    }
  }
  return os.str();
}

}  // namespace

PromptBundle make_initial_prompt(const PromptLibrary& lib,
                                 const ProblemSpec& spec,
                                 const std::string& budget_info) {
  return lib.render("initial_code", Purpose::InitialCode,
                    {{"description", spec.description},
                     {"top_module", spec.top_module},
                     {"budget", budget_info}});
}

PromptBundle make_refine_prompt(const PromptLibrary& lib,
                                const ProblemSpec& spec, const Node& parent,
                                const std::string& budget_info,
                                bool edit_script_format) {
  return lib.render(edit_script_format ? "refine_edit" : "refine",
                    Purpose::Refine,
                    {{"description", spec.description},
                     {"directive", objective_sentence(spec)},
                     {"score", format_double(parent.score)},
                     {"code", parent.code},
                     {"feedback", feedback_text(parent)},
                     {"budget", budget_info}});
}

PromptBundle make_idea_prompt(const PromptLibrary& lib,
                              const ProblemSpec& spec,
                              const std::vector<std::string>& prior_ideas) {
  std::ostringstream prior;
  if (prior_ideas.empty()) {
    prior << "(none yet)";
  } else {
    for (std::size_t i = 0; i < prior_ideas.size(); ++i) {
      prior << (i + 1) << ". " << prior_ideas[i] << "\n";
    }
  }
  return lib.render(
      "idea_gen", Purpose::IdeaGen,
      {{"description", spec.description},
       {"prior_ideas", prior.str()},
       {"context",
        spec.context_text.empty() ? std::string("(none)") : spec.context_text}});
}

PromptBundle make_idea_impl_prompt(const PromptLibrary& lib,
                                   const ProblemSpec& spec,
                                   const std::string& idea,
                                   const std::string& budget_info) {
  return lib.render("idea_impl", Purpose::InitialCode,
                    {{"description", spec.description},
                     {"idea", idea},
                     {"top_module", spec.top_module},
                     {"budget", budget_info}});
}

PromptBundle make_summary_prompt(const PromptLibrary& lib,
                                 const std::string& code) {
  return lib.render("summary", Purpose::Summary, {{"code", code}});
}

std::string budget_info_text(int index, int max_nodes) {
  std::ostringstream os;
  os << "This is candidate " << index << " of a " << max_nodes
     << " candidate budget.";
  return os.str();
}

}  // namespace evolve::llm
