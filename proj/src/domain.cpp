#include "evolve/domain.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

namespace evolve {

void Archive::append(Node node) {
  if (!best_ || node.score > best_->score) {
    best_ = node;
  }
  nodes_.push_back(std::move(node));
}

double score_generation(int pass_count, int total, bool sim_ok,
                        double c_penalty) {
  if (!sim_ok) {
    return c_penalty;
  }
  if (total < 1) {
    throw std::invalid_argument(
        "score_generation: total must be >= 1 when simulation succeeded");
  }
  if (pass_count < 0 || pass_count > total) {
    throw std::invalid_argument(
        "score_generation: pass_count out of [0, total]");
  }
  return static_cast<double>(pass_count) / static_cast<double>(total);
}

double score_optimization(double area_um2, double latency_ns, bool all_pass,
                          double eta, double c_penalty) {
  if (!all_pass) {
    return c_penalty;
  }
  if (area_um2 <= 0.0 || latency_ns <= 0.0) {
    throw std::invalid_argument(
        "score_optimization: area and latency must be positive for a valid "
        "design");
  }
  return -(area_um2 * latency_ns) / eta;
}

std::string summary_fallback(const std::string& code) {
  std::string out;
  int lines = 0;
  for (std::size_t i = 0; i < code.size() && lines < 40; ++i) {
    out.push_back(code[i]);
    if (code[i] == '\n') {
      ++lines;
    }
  }
  return out;
}

std::string directive_sentence(Directive directive) {
  switch (directive) {
    case Directive::Balanced:
      return "minimize area\xc3\x97latency";
    case Directive::OptArea:
      return "reduce area without increasing latency";
    case Directive::OptCycle:
      return "reduce cycle count, area increase permitted";
  }
  return {};
}

namespace {

constexpr std::size_t kMaxFailingVectors = 10;

std::vector<FailingVector> capped_failures(const EvalReport& eval) {
  std::vector<FailingVector> out = eval.failures;
  if (out.size() > kMaxFailingVectors) {
    out.resize(kMaxFailingVectors);
  }
  return out;
}

std::string error_text(const EvalReport& eval) {
  std::ostringstream os;
  if (!eval.compile_ok) {
    os << "compilation failed";
  } else if (!eval.sim_ok) {
    os << "simulation failed";
  } else {
    os << "failed " << (eval.total - eval.pass) << " of " << eval.total
       << " checks (passed " << eval.pass << ")";
  }
  if (!eval.stderr_excerpt.empty()) {
    os << "\n" << eval.stderr_excerpt;
  }
  return os.str();
}

}  // namespace

Feedback select_feedback(const TaskKind& task, double score,
                         const EvalReport& eval, double c_penalty,
                         const std::string& design_summary) {
  Feedback fb;
  fb.failing_vectors = capped_failures(eval);
  if (score == c_penalty) {
    fb.variant = FeedbackVariant::ErrorMsg;
    fb.text = error_text(eval);
    return fb;
  }
  if (task.kind == TaskType::Gen) {
    fb.variant = FeedbackVariant::DesignSummary;
    fb.text = design_summary;
    return fb;
  }
  fb.variant = FeedbackVariant::OptGuidanceAndSummary;
  std::ostringstream os;
  os << "current area=" << format_double(eval.area_um2.value_or(0.0))
     << " \xc2\xb5m\xc2\xb2, latency="
     << format_double(eval.latency_ns.value_or(0.0))
     << " ns, score=" << format_double(score)
     << "; objective: " << directive_sentence(task.directive);
  if (!design_summary.empty()) {
    os << "\n\n" << design_summary;
  }
  fb.text = os.str();
  return fb;
}

const char* to_string(TaskType t) {
  return t == TaskType::Gen ? "gen" : "opt";
}

const char* to_string(Directive d) {
  switch (d) {
    case Directive::Balanced:
      return "balanced";
    case Directive::OptArea:
      return "opt-area";
    case Directive::OptCycle:
      return "opt-cycle";
  }
  return "balanced";
}

const char* to_string(FeedbackVariant v) {
  switch (v) {
    case FeedbackVariant::ErrorMsg:
      return "ErrorMsg";
    case FeedbackVariant::DesignSummary:
      return "DesignSummary";
    case FeedbackVariant::OptGuidanceAndSummary:
      return "OptGuidanceAndSummary";
  }
  return "ErrorMsg";
}

TaskType task_type_from_string(const std::string& s) {
  if (s == "gen") return TaskType::Gen;
  if (s == "opt") return TaskType::Opt;
  throw std::invalid_argument("unknown task kind '" + s + "' (want gen|opt)");
}

Directive directive_from_string(const std::string& s) {
  if (s == "balanced") return Directive::Balanced;
  if (s == "opt-area") return Directive::OptArea;
  if (s == "opt-cycle") return Directive::OptCycle;
  throw std::invalid_argument("unknown directive '" + s +
                              "' (want balanced|opt-area|opt-cycle)");
}

FeedbackVariant feedback_variant_from_string(const std::string& s) {
  if (s == "ErrorMsg") return FeedbackVariant::ErrorMsg;
  if (s == "DesignSummary") return FeedbackVariant::DesignSummary;
  if (s == "OptGuidanceAndSummary")
    return FeedbackVariant::OptGuidanceAndSummary;
  throw std::invalid_argument("unknown feedback variant '" + s + "'");
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace evolve
