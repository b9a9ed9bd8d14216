#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "evolve/llm.hpp"

namespace test_support {

// Scriptable in-process client for driving search logic in tests.
struct FnLlm : evolve::llm::LlmClient {
  using Fn =
      std::function<evolve::llm::LlmResult(const evolve::llm::PromptBundle&)>;
  Fn fn;
  std::vector<evolve::llm::PromptBundle> calls;

  explicit FnLlm(Fn f) : fn(std::move(f)) {}

  evolve::llm::LlmResult complete(
      const evolve::llm::PromptBundle& bundle) override {
    calls.push_back(bundle);
    return fn(bundle);
  }
};

inline evolve::llm::LlmResult text_result(std::string text) {
  evolve::llm::LlmResult r;
  r.text = std::move(text);
  r.usage = {10, 5};
  return r;
}

struct TempDir {
  std::filesystem::path path;

  TempDir() {
    std::string tmpl =
        (std::filesystem::temp_directory_path() / "evolve-test-XXXXXX")
            .string();
    std::vector<char> buf(tmpl.begin(), tmpl.end());
    buf.push_back('\0');
    path = mkdtemp(buf.data());
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
}

}  // namespace test_support
