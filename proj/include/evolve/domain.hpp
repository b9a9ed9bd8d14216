#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace evolve {

using NodeId = std::int64_t;

enum class TaskType { Gen, Opt };

// Optimization directive injected into Opt prompts. Balanced for Gen tasks.
enum class Directive { Balanced, OptArea, OptCycle };

struct TaskKind {
  TaskType kind = TaskType::Gen;
  Directive directive = Directive::Balanced;
};

enum class FeedbackVariant { ErrorMsg, DesignSummary, OptGuidanceAndSummary };

// One failing check extracted from the simulation log.
// `where` carries the locator from the STG_FAIL line (time + signal name).
struct FailingVector {
  std::string where;
  std::string expected;
  std::string observed;

  bool operator==(const FailingVector&) const = default;
};

struct Feedback {
  FeedbackVariant variant = FeedbackVariant::ErrorMsg;
  std::string text;
  std::vector<FailingVector> failing_vectors;
};

// Ingested task: everything a run needs to know about the problem.
struct ProblemSpec {
  std::string name;
  std::string description;
  TaskKind task;
  std::string golden_ref;      // golden reference HDL, module <top_module>_ref
  std::string top_module;
  double clock_period_ns = 4.0;
  int max_nodes = 300;
  double eta = 1e5;
  double c_penalty = -1e5;
  std::string context_text;    // optional user-supplied insight text for idea prompts
  std::string user_testbench;  // optional user tb.v; when set, STG emission is bypassed
};

// One candidate: the paper's tuple (V, S, F) plus lineage metadata.
struct Node {
  NodeId id = 0;
  std::string code;
  double score = 0.0;
  Feedback feedback;
  std::optional<NodeId> parent_id;
  int depth = 0;
  int created_at_node_index = 0;  // position in the global budget, 1-based
};

// Append-only record of every evaluated candidate plus the running best.
class Archive {
 public:
  void append(Node node);

  const std::optional<Node>& best() const { return best_; }
  const std::vector<Node>& all_nodes() const { return nodes_; }
  int node_count() const { return static_cast<int>(nodes_.size()); }

 private:
  std::optional<Node> best_;
  std::vector<Node> nodes_;
};

// Raw evaluator output for one candidate.
struct EvalReport {
  bool compile_ok = false;
  bool sim_ok = false;
  int pass = 0;
  int total = 0;
  std::optional<double> area_um2;
  std::optional<long> cycles;
  std::optional<double> latency_ns;
  std::string stderr_excerpt;
  long wall_time_ms = 0;
  std::vector<FailingVector> failures;
};

// Pass-rate score for generative synthesis; c_penalty on compile/sim failure.
double score_generation(int pass_count, int total, bool sim_ok, double c_penalty);

// Negated area-latency product normalized by eta; c_penalty unless all
// vectors pass.
double score_optimization(double area_um2, double latency_ns, bool all_pass,
                          double eta, double c_penalty);

// Picks the feedback variant from (task, score) and assembles the text.
// `design_summary` is the caller-supplied candidate summary (an LLM product
// upstream; callers without one pass the code-head fallback, see
// summary_fallback).
Feedback select_feedback(const TaskKind& task, double score,
                         const EvalReport& eval, double c_penalty,
                         const std::string& design_summary);

// First 40 lines of the candidate code, used when no summary call is wired
// up or the call failed.
std::string summary_fallback(const std::string& code);

// Directive sentence embedded in OptGuidance text.
std::string directive_sentence(Directive directive);

const char* to_string(TaskType t);
const char* to_string(Directive d);
const char* to_string(FeedbackVariant v);
TaskType task_type_from_string(const std::string& s);
Directive directive_from_string(const std::string& s);
FeedbackVariant feedback_variant_from_string(const std::string& s);

// Shortest round-trip decimal formatting; used everywhere a double reaches
// a persisted artifact so reruns stay byte-identical.
std::string format_double(double v);

}  // namespace evolve
