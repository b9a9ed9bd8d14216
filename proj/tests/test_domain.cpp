#include <algorithm>
#include <random>

#include "doctest.h"
#include "evolve/domain.hpp"

using namespace evolve;

TEST_CASE("score_generation matches the pass-rate definition") {
  CHECK(score_generation(7, 10, true, -1e5) == doctest::Approx(0.7));
  CHECK(score_generation(10, 10, true, -1e5) == 1.0);
  CHECK(score_generation(0, 10, true, -1e5) == 0.0);
  CHECK(score_generation(3, 4, false, -1e5) == -100000.0);
  CHECK(score_generation(0, 0, false, -1e5) == -100000.0);
}

TEST_CASE("score_generation rejects evaluator defects") {
  CHECK_THROWS_AS(score_generation(0, 0, true, -1e5), std::invalid_argument);
  CHECK_THROWS_AS(score_generation(5, 4, true, -1e5), std::invalid_argument);
  CHECK_THROWS_AS(score_generation(-1, 4, true, -1e5), std::invalid_argument);
}

TEST_CASE("score_generation range and monotonicity") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 500; ++i) {
    int total = 1 + static_cast<int>(rng() % 50);
    int pass = static_cast<int>(rng() % (total + 1));
    bool ok = (rng() % 2) == 0;
    double s = score_generation(pass, total, ok, -1e5);
    if (ok) {
      CHECK(s >= 0.0);
      CHECK(s <= 1.0);
      if (pass < total) {
        CHECK(score_generation(pass + 1, total, true, -1e5) > s);
      }
    } else {
      CHECK(s == -1e5);
    }
  }
}

TEST_CASE("score_optimization reproduces the recorded area-latency row") {
  // 269657 um^2 at 362 cycles x 4 ns = 1448 ns
  CHECK(269657.0 * 1448.0 == 390463336.0);
  double score = score_optimization(269657.0, 1448.0, true, 1e5, -1e5);
  CHECK(score == -(269657.0 * 1448.0) / 1e5);
  CHECK(score == doctest::Approx(-3904.63336).epsilon(1e-12));
}

TEST_CASE("score_optimization edge cases") {
  CHECK(score_optimization(1e5, 1.0, true, 1e5, -1e5) == -1.0);
  CHECK(score_optimization(123.0, 456.0, false, 1e5, -1e5) == -100000.0);
  CHECK_THROWS_AS(score_optimization(0.0, 1.0, true, 1e5, -1e5),
                  std::invalid_argument);
  CHECK_THROWS_AS(score_optimization(1.0, -2.0, true, 1e5, -1e5),
                  std::invalid_argument);
}

TEST_CASE("score_optimization is strictly decreasing in area and latency") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    double area = 1.0 + static_cast<double>(rng() % 100000);
    double latency = 1.0 + static_cast<double>(rng() % 10000);
    double s = score_optimization(area, latency, true, 1e5, -1e5);
    CHECK(score_optimization(area + 1.0, latency, true, 1e5, -1e5) < s);
    CHECK(score_optimization(area, latency + 1.0, true, 1e5, -1e5) < s);
  }
}

namespace {

EvalReport passing_report() {
  EvalReport r;
  r.compile_ok = true;
  r.sim_ok = true;
  r.pass = 7;
  r.total = 10;
  return r;
}

}  // namespace

TEST_CASE("select_feedback picks ErrorMsg on penalty scores") {
  EvalReport r;
  r.compile_ok = false;
  r.stderr_excerpt = "dut.v:3: syntax error";
  TaskKind task;  // Gen
  Feedback fb = select_feedback(task, -1e5, r, -1e5, "unused");
  CHECK(fb.variant == FeedbackVariant::ErrorMsg);
  CHECK(fb.text.find("dut.v:3: syntax error") != std::string::npos);
}

TEST_CASE("select_feedback picks DesignSummary for valid Gen scores") {
  TaskKind task;
  Feedback fb =
      select_feedback(task, 0.7, passing_report(), -1e5, "two-stage adder");
  CHECK(fb.variant == FeedbackVariant::DesignSummary);
  CHECK(fb.text == "two-stage adder");
}

TEST_CASE("select_feedback embeds guidance for valid Opt scores") {
  TaskKind task{TaskType::Opt, Directive::OptArea};
  EvalReport r = passing_report();
  r.pass = r.total;
  r.area_um2 = 269657.0;
  r.latency_ns = 1448.0;
  Feedback fb = select_feedback(task, -3904.6, r, -1e5, "systolic array");
  CHECK(fb.variant == FeedbackVariant::OptGuidanceAndSummary);
  CHECK(fb.text.find("area=269657") != std::string::npos);
  CHECK(fb.text.find("latency=1448") != std::string::npos);
  CHECK(fb.text.find("score=-3904.6") != std::string::npos);
  CHECK(fb.text.find("reduce area without increasing latency") !=
        std::string::npos);
  CHECK(fb.text.find("systolic array") != std::string::npos);
}

TEST_CASE("directive sentences are fixed") {
  CHECK(directive_sentence(Directive::OptCycle) ==
        "reduce cycle count, area increase permitted");
  CHECK(directive_sentence(Directive::Balanced).find("minimize area") == 0);
}

TEST_CASE("feedback variant is a pure function of task kind and penalty") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 300; ++i) {
    bool penalty = (rng() % 2) == 0;
    bool opt = (rng() % 2) == 0;
    TaskKind task{opt ? TaskType::Opt : TaskType::Gen, Directive::Balanced};
    EvalReport r = passing_report();
    double score = penalty ? -1e5 : (opt ? -12.5 : 0.5);
    Feedback fb = select_feedback(task, score, r, -1e5, "s");
    if (penalty) {
      CHECK(fb.variant == FeedbackVariant::ErrorMsg);
    } else if (opt) {
      CHECK(fb.variant == FeedbackVariant::OptGuidanceAndSummary);
    } else {
      CHECK(fb.variant == FeedbackVariant::DesignSummary);
    }
  }
}

TEST_CASE("failing vector excerpts are capped") {
  EvalReport r = passing_report();
  for (int i = 0; i < 25; ++i) {
    r.failures.push_back({"t=" + std::to_string(i), "1", "0"});
  }
  Feedback fb = select_feedback(TaskKind{}, 0.5, r, -1e5, "s");
  CHECK(fb.failing_vectors.size() == 10);
  CHECK(fb.failing_vectors.front().where == "t=0");
}

TEST_CASE("archive best is the running max") {
  Archive archive;
  std::mt19937_64 rng(21);
  double best = -1e18;
  for (int i = 0; i < 200; ++i) {
    Node n;
    n.id = i + 1;
    n.score = ((rng() % 2) == 0) ? -1e5
                                 : static_cast<double>(rng() % 1000) / 1000.0;
    archive.append(n);
    best = std::max(best, n.score);
    REQUIRE(archive.best().has_value());
    CHECK(archive.best()->score == best);
  }
  CHECK(archive.node_count() == 200);
}

TEST_CASE("summary_fallback truncates to 40 lines") {
  std::string code;
  for (int i = 0; i < 100; ++i) {
    code += "line " + std::to_string(i) + "\n";
  }
  std::string head = summary_fallback(code);
  CHECK(std::count(head.begin(), head.end(), '\n') == 40);
  CHECK(head.find("line 39") != std::string::npos);
  CHECK(head.find("line 40") == std::string::npos);
  CHECK(summary_fallback("short") == "short");
}

TEST_CASE("format_double round-trips") {
  for (double v : {0.7, -3904.63336, 1.0, -1e5, 0.0, 4.0, 1.5}) {
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(4.0) == "4");
  CHECK(format_double(0.7) == "0.7");
}
