#include <map>

#include "doctest.h"
#include "evolve/igr.hpp"
#include "helpers.hpp"

using namespace evolve;
using namespace evolve::igr;
using test_support::FnLlm;
using test_support::text_result;

TEST_CASE("parse_edit_script reads fenced hunks and ignores prose") {
  std::string response =
      "I will adjust the assignment.\n"
      "<<<SEARCH\n"
      "assign y = a;\n"
      "====\n"
      "assign y = a ^ b;\n"
      ">>>REPLACE\n"
      "Done.\n";
  EditScript script = parse_edit_script(response);
  REQUIRE(script.hunks.size() == 1);
  CHECK(script.hunks[0].search_block == "assign y = a;");
  CHECK(script.hunks[0].replace_block == "assign y = a ^ b;");
}

TEST_CASE("parse_edit_script handles multiple hunks and CRLF") {
  std::string response =
      "<<<SEARCH\r\none\r\n====\r\nuno\r\n>>>REPLACE\r\n"
      "<<<SEARCH\ntwo\nlines\n====\nreplacement\n>>>REPLACE\n";
  EditScript script = parse_edit_script(response);
  REQUIRE(script.hunks.size() == 2);
  CHECK(script.hunks[0].search_block == "one");
  CHECK(script.hunks[1].search_block == "two\nlines");
  CHECK(script.hunks[1].replace_block == "replacement");
}

TEST_CASE("parse_edit_script of plain text yields no hunks") {
  CHECK(parse_edit_script("no edits here").hunks.empty());
  CHECK(parse_edit_script("").hunks.empty());
}

TEST_CASE("apply_edits identity on the empty script") {
  CHECK(apply_edits("module m; endmodule", {}) == "module m; endmodule");
}

TEST_CASE("apply_edits replaces a single occurrence") {
  EditScript script;
  script.hunks.push_back({"assign y = a;", "assign y = a ^ b;"});
  CHECK(apply_edits("module m;\nassign y = a;\nendmodule", script) ==
        "module m;\nassign y = a ^ b;\nendmodule");
}

TEST_CASE("apply_edits applies hunks in order to the evolving text") {
  EditScript script;
  script.hunks.push_back({"a = 1", "a = 2"});
  script.hunks.push_back({"a = 2", "a = 3"});  // matches the first edit
  CHECK(apply_edits("a = 1", script) == "a = 3");
}

TEST_CASE("apply_edits rejects ambiguous matches") {
  EditScript script;
  script.hunks.push_back({"x <= x + 1;", "x <= x + 2;"});
  std::string code = "x <= x + 1;\nx <= x + 1;\n";
  CHECK_THROWS_WITH_AS(apply_edits(code, script),
                       doctest::Contains("ambiguous match"), EditError);
}

TEST_CASE("apply_edits rejects missing and empty search text") {
  EditScript missing;
  missing.hunks.push_back({"not present", "y"});
  CHECK_THROWS_WITH_AS(apply_edits("code", missing),
                       doctest::Contains("not found"), EditError);
  EditScript empty;
  empty.hunks.push_back({"", "y"});
  CHECK_THROWS_AS(apply_edits("code", empty), EditError);
}

namespace {

ProblemSpec gen_spec() {
  ProblemSpec spec;
  spec.name = "toy";
  spec.description = "toy problem";
  spec.top_module = "toy";
  spec.task.kind = TaskType::Gen;
  return spec;
}

// evaluator stub: score encoded in the candidate text as "score:<v>",
// c_penalty otherwise
EvaluateFn scripted_eval() {
  return [](const std::string& code, NodeId) {
    EvalOutcome out;
    auto pos = code.find("score:");
    if (pos == std::string::npos) {
      out.score = -1e5;
      out.feedback.variant = FeedbackVariant::ErrorMsg;
      out.feedback.text = "unparsable";
      return out;
    }
    out.score = std::stod(code.substr(pos + 6));
    out.feedback.variant = FeedbackVariant::DesignSummary;
    out.feedback.text = "stub summary";
    return out;
  };
}

}  // namespace

TEST_CASE("generate_ideas issues one call for k=1 with no prior ideas") {
  FnLlm client([](const llm::PromptBundle&) { return text_result("idea A"); });
  auto lib = llm::PromptLibrary::builtin();
  auto ideas = generate_ideas(gen_spec(), 1, client, lib);
  REQUIRE(ideas.size() == 1);
  CHECK(ideas[0].index == 1);
  CHECK(ideas[0].text == "idea A");
  REQUIRE(client.calls.size() == 1);
  CHECK(client.calls[0].user.find("(none yet)") != std::string::npos);
}

TEST_CASE("idea prompts accumulate prior ideas verbatim") {
  int n = 0;
  FnLlm client([&n](const llm::PromptBundle&) {
    return text_result("idea #" + std::to_string(++n));
  });
  auto lib = llm::PromptLibrary::builtin();
  auto ideas = generate_ideas(gen_spec(), 3, client, lib);
  REQUIRE(ideas.size() == 3);
  REQUIRE(client.calls.size() == 3);
  CHECK(client.calls[2].user.find("idea #1") != std::string::npos);
  CHECK(client.calls[2].user.find("idea #2") != std::string::npos);
  CHECK(client.calls[1].user.find("idea #1") != std::string::npos);
}

TEST_CASE("a persistently failing idea is skipped as a logged gap") {
  int call = 0;
  FnLlm client([&call](const llm::PromptBundle&) {
    if (++call <= 2) {  // both attempts for idea 1 hit a transport failure
      throw llm::LlmTransportError("down");
    }
    return text_result("recovered idea");
  });
  auto lib = llm::PromptLibrary::builtin();
  auto ideas = generate_ideas(gen_spec(), 2, client, lib);
  REQUIRE(ideas.size() == 1);
  CHECK(ideas[0].index == 2);
  CHECK(call >= 3);  // two attempts for idea 1, one for idea 2
}

TEST_CASE("run_chain stops at the chain length") {
  // root + refinements, never solving
  FnLlm client([](const llm::PromptBundle& b) {
    if (b.purpose == llm::Purpose::InitialCode) {
      return text_result("```\n// v0 score:0.1\n```");
    }
    return text_result(
        "<<<SEARCH\nscore:0.1\n====\nscore:0.2\n>>>REPLACE\n");
  });
  auto lib = llm::PromptLibrary::builtin();
  Chain chain;
  chain.idea = {1, "an idea", ""};
  NodeAllocator alloc;
  Chain done = run_chain(std::move(chain), gen_spec(), 5, scripted_eval(),
                         client, lib, alloc, 300);
  CHECK(done.nodes.size() == 5);
  CHECK(done.status == ChainStatus::Exhausted);
  // linear lineage
  for (std::size_t i = 1; i < done.nodes.size(); ++i) {
    REQUIRE(done.nodes[i].parent_id.has_value());
    CHECK(*done.nodes[i].parent_id == done.nodes[i - 1].id);
    CHECK(done.nodes[i].depth == done.nodes[i - 1].depth + 1);
  }
  CHECK_FALSE(done.nodes[0].parent_id.has_value());
  CHECK(done.nodes[0].depth == 0);
}

TEST_CASE("a perfect first node solves the chain immediately") {
  FnLlm client([](const llm::PromptBundle&) {
    return text_result("```\n// v0 score:1.0\n```");
  });
  auto lib = llm::PromptLibrary::builtin();
  Chain chain;
  chain.idea = {1, "idea", ""};
  NodeAllocator alloc;
  Chain done = run_chain(std::move(chain), gen_spec(), 5, scripted_eval(),
                         client, lib, alloc, 300);
  CHECK(done.nodes.size() == 1);
  CHECK(done.status == ChainStatus::Solved);
  CHECK(done.nodes[0].score == 1.0);
}

TEST_CASE("edit failures are surfaced once then fall back to a full file") {
  std::vector<std::string> kinds;
  FnLlm client([&kinds](const llm::PromptBundle& b) {
    if (b.purpose == llm::Purpose::InitialCode) {
      kinds.push_back("root");
      return text_result("```\n// v0 score:0.1\n```");
    }
    if (b.template_id.find("refine_edit") == 0) {
      if (b.user.find("Previous edit failed") != std::string::npos) {
        kinds.push_back("edit-retry");
      } else {
        kinds.push_back("edit");
      }
      // search text that never matches
      return text_result("<<<SEARCH\nmissing text\n====\nx\n>>>REPLACE\n");
    }
    kinds.push_back("full");
    return text_result("```\n// v1 score:0.3\n```");
  });
  auto lib = llm::PromptLibrary::builtin();
  Chain chain;
  chain.idea = {1, "idea", ""};
  NodeAllocator alloc;
  Chain done = run_chain(std::move(chain), gen_spec(), 2, scripted_eval(),
                         client, lib, alloc, 300);
  REQUIRE(done.nodes.size() == 2);
  CHECK(done.nodes[1].score == doctest::Approx(0.3));
  CHECK(kinds == std::vector<std::string>{"root", "edit", "edit-retry",
                                          "full"});
  // the retry prompt carries the edit error back to the model
  bool saw_not_found = false;
  for (const auto& call : client.calls) {
    if (call.user.find("search text not found") != std::string::npos) {
      saw_not_found = true;
    }
  }
  CHECK(saw_not_found);
}

TEST_CASE("a chain slot is consumed with the penalty on persistent failure") {
  FnLlm client([](const llm::PromptBundle& b) {
    if (b.purpose == llm::Purpose::InitialCode) {
      return text_result("```\n// v0 score:0.1\n```");
    }
    // edit attempts and the full-file fallback all return garbage edits
    return text_result("<<<SEARCH\nmissing\n====\nx\n>>>REPLACE\n");
  });
  auto lib = llm::PromptLibrary::builtin();
  Chain chain;
  chain.idea = {1, "idea", ""};
  NodeAllocator alloc;
  Chain done = run_chain(std::move(chain), gen_spec(), 2, scripted_eval(),
                         client, lib, alloc, 300);
  REQUIRE(done.nodes.size() == 2);
  // fallback returned a non-candidate, evaluated to the penalty
  CHECK(done.nodes[1].score == -1e5);
}

TEST_CASE("refinement prompts embed only their own chain state") {
  std::map<int, std::string> seen_prompts;
  FnLlm client([&](const llm::PromptBundle& b) {
    if (b.purpose == llm::Purpose::InitialCode) {
      // distinct code per chain pulled from the idea text
      std::string tag =
          b.user.find("idea-one") != std::string::npos ? "one" : "two";
      return text_result("```\n// chain-" + tag + " score:0.1\n```");
    }
    return text_result("<<<SEARCH\nscore:0.1\n====\nscore:0.2\n>>>REPLACE\n");
  });
  auto lib = llm::PromptLibrary::builtin();
  NodeAllocator alloc;
  Chain one;
  one.idea = {1, "idea-one", ""};
  Chain two;
  two.idea = {2, "idea-two", ""};
  run_chain(std::move(one), gen_spec(), 2, scripted_eval(), client, lib,
            alloc, 300);
  run_chain(std::move(two), gen_spec(), 2, scripted_eval(), client, lib,
            alloc, 300);
  for (const auto& call : client.calls) {
    if (call.purpose != llm::Purpose::Refine) continue;
    bool has_one = call.user.find("chain-one") != std::string::npos;
    bool has_two = call.user.find("chain-two") != std::string::npos;
    CHECK(has_one != has_two);
  }
}

TEST_CASE("budget accounting covers chains without early stops") {
  // k chains of m nodes consume exactly k*m slots
  FnLlm client([](const llm::PromptBundle& b) {
    if (b.purpose == llm::Purpose::InitialCode) {
      return text_result("```\n// v score:0.1\n```");
    }
    return text_result("<<<SEARCH\nscore:0.1\n====\nscore:0.1\n>>>REPLACE\n");
  });
  auto lib = llm::PromptLibrary::builtin();
  NodeAllocator alloc;
  int total_nodes = 0;
  const int k = 6, m = 5;
  for (int i = 1; i <= k; ++i) {
    Chain chain;
    chain.idea = {i, "idea " + std::to_string(i), ""};
    Chain done = run_chain(std::move(chain), gen_spec(), m, scripted_eval(),
                           client, lib, alloc, k * m);
    total_nodes += static_cast<int>(done.nodes.size());
  }
  CHECK(total_nodes == k * m);
  CHECK(alloc.next_index == k * m + 1);
}
