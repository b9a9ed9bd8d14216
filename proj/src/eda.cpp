#include "evolve/eda.hpp"

#include <bit>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <random>
#include <semaphore>
#include <sstream>
#include <thread>

#include "subprocess.hpp"

namespace evolve::eda {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kStderrCap = 2000;

std::string cap_text(const std::string& s) {
  if (s.size() <= kStderrCap) return s;
  return s.substr(0, kStderrCap) + "\n...[truncated]";
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return (v != nullptr && v[0] != '\0') ? std::string(v) : fallback;
}

// Temp scratch for callers that did not supply a workdir.
fs::path ensure_workdir(const fs::path& given, const fs::path& root) {
  if (!given.empty()) {
    fs::create_directories(given);
    return given;
  }
  fs::path base = root.empty() ? fs::temp_directory_path() : root;
  fs::create_directories(base);
  std::string tmpl = (base / "evolve-XXXXXX").string();
  std::vector<char> buf(tmpl.begin(), tmpl.end());
  buf.push_back('\0');
  if (mkdtemp(buf.data()) == nullptr) {
    throw BackendError("cannot create scratch directory under " +
                       base.string());
  }
  return fs::path(buf.data());
}

std::optional<double> parse_number_after_colon(const std::string& line) {
  auto colon = line.rfind(':');
  if (colon == std::string::npos) return std::nullopt;
  const char* p = line.c_str() + colon + 1;
  char* end = nullptr;
  double v = std::strtod(p, &end);
  if (end == p) return std::nullopt;
  return v;
}

}  // namespace

ToolConfig ToolConfig::from_env() {
  ToolConfig cfg;
  cfg.sim_cmd = env_or("EVOLVE_IVERILOG", cfg.sim_cmd);
  cfg.sim_run_cmd = env_or("EVOLVE_VVP", cfg.sim_run_cmd);
  cfg.synth_cmd = env_or("EVOLVE_YOSYS", cfg.synth_cmd);
  cfg.liberty_or_target = env_or("EVOLVE_LIBERTY", cfg.liberty_or_target);
  return cfg;
}

void validate_tools(const ToolConfig& config) {
  for (const std::string& cmd :
       {config.sim_cmd, config.sim_run_cmd, config.synth_cmd}) {
    if (!executable_exists(cmd)) {
      throw std::runtime_error("required tool not found: " + cmd);
    }
  }
  if (!config.liberty_or_target.empty() &&
      !fs::exists(config.liberty_or_target)) {
    throw std::runtime_error("liberty file not found: " +
                             config.liberty_or_target);
  }
}

std::optional<double> parse_synth_area(const std::string& log) {
  std::istringstream is(log);
  std::string line;
  std::optional<double> chip_area;
  std::optional<double> cell_count;
  while (std::getline(is, line)) {
    if (line.find("Chip area for") != std::string::npos) {
      if (auto v = parse_number_after_colon(line)) chip_area = v;
    } else if (line.find("Number of cells:") != std::string::npos) {
      if (auto v = parse_number_after_colon(line)) cell_count = v;
    }
  }
  if (chip_area) return chip_area;
  return cell_count;  // gate-equivalent fallback for unmapped flows
}

std::optional<double> parse_synth_delay_ps(const std::string& log) {
  // matches "Delay = 1234.5 ps" and lowercase variants from the mapper
  std::size_t pos = 0;
  std::optional<double> last;
  while (true) {
    std::size_t d = log.find("elay", pos);
    if (d == std::string::npos || d == 0) break;
    char lead = log[d - 1];
    pos = d + 4;
    if (lead != 'D' && lead != 'd') continue;
    std::size_t i = pos;
    while (i < log.size() && (log[i] == ' ' || log[i] == '=')) ++i;
    char* end = nullptr;
    double v = std::strtod(log.c_str() + i, &end);
    if (end == log.c_str() + i) continue;
    std::size_t j = static_cast<std::size_t>(end - log.c_str());
    while (j < log.size() && log[j] == ' ') ++j;
    if (log.compare(j, 2, "ps") == 0) last = v;
  }
  return last;
}

// ---------------------------------------------------------------------------
// OpenSourceBackend
// ---------------------------------------------------------------------------

struct OpenSourceBackend::Gate {
  explicit Gate(int limit) : sem(limit) {}
  std::counting_semaphore<> sem;

  struct Hold {
    std::counting_semaphore<>& s;
    explicit Hold(std::counting_semaphore<>& sem_) : s(sem_) { s.acquire(); }
    ~Hold() { s.release(); }
  };
};

OpenSourceBackend::OpenSourceBackend(ToolConfig config, std::string top_module,
                                     std::string golden_source)
    : config_(std::move(config)),
      top_module_(std::move(top_module)),
      golden_source_(std::move(golden_source)) {
  parallel_limit_ = config_.parallel_limit > 0
                        ? config_.parallel_limit
                        : static_cast<int>(std::max(
                              1u, std::thread::hardware_concurrency()));
  gate_ = std::make_unique<Gate>(parallel_limit_);
}

OpenSourceBackend::~OpenSourceBackend() = default;

SimResult OpenSourceBackend::run_sim(const std::string& code,
                                     const std::string& testbench,
                                     const fs::path& workdir) {
  Gate::Hold hold(gate_->sem);
  fs::path dir = ensure_workdir(workdir, config_.scratch_root);
  write_file(dir / "dut.v", code);
  write_file(dir / "golden.v", golden_source_);
  write_file(dir / "tb.v", testbench);

  SimResult result;
  CommandResult compile = run_command(
      {config_.sim_cmd, "-g2005", "-o", "sim.vvp", "dut.v", "golden.v",
       "tb.v"},
      dir, config_.sim_timeout_s);
  if (compile.timed_out) {
    result.stderr_excerpt =
        "timeout after " + std::to_string(config_.sim_timeout_s) +
        " s (compile)";
    return result;
  }
  if (compile.exit_code != 0) {
    result.stderr_excerpt = cap_text(compile.err);
    return result;
  }
  result.compile_ok = true;

  CommandResult sim = run_command({config_.sim_run_cmd, "sim.vvp"}, dir,
                                  config_.sim_timeout_s);
  write_file(dir / "sim.log", sim.out + sim.err);
  if (sim.timed_out) {
    result.stderr_excerpt =
        "timeout after " + std::to_string(config_.sim_timeout_s) + " s";
    return result;
  }
  stg::SimLogSummary summary = stg::parse_sim_log(sim.out);
  result.sim_ok = summary.sim_ok;
  result.pass = summary.pass;
  result.total = summary.total;
  result.cycles = summary.cycles;
  result.failures = summary.failures;
  if (!summary.sim_ok) {
    result.stderr_excerpt = cap_text(sim.err.empty() ? sim.out : sim.err);
  }
  return result;
}

SynthResult OpenSourceBackend::run_synth(const std::string& code,
                                         double clock_period_ns,
                                         const fs::path& workdir) {
  Gate::Hold hold(gate_->sem);
  fs::path dir = ensure_workdir(workdir, config_.scratch_root);
  write_file(dir / "dut.v", code);

  // fixed synthesis recipe; liberty mapping only when a cell library is
  // configured (absolute um^2 otherwise unavailable -> gate equivalents)
  std::ostringstream script;
  script << "hierarchy -top " << top_module_ << "; synth -top " << top_module_;
  if (!config_.liberty_or_target.empty()) {
    script << "; dfflibmap -liberty " << config_.liberty_or_target
           << "; abc -liberty " << config_.liberty_or_target
           << "; clean; stat -liberty " << config_.liberty_or_target;
  } else {
    script << "; stat";
  }

  CommandResult synth = run_command(
      {config_.synth_cmd, "-l", "synth.log", "-p", script.str(), "dut.v"},
      dir, config_.synth_timeout_s);
  SynthResult result;
  if (synth.timed_out) {
    result.synth_ok = false;
    result.note = "timeout after " + std::to_string(config_.synth_timeout_s) +
                  " s";
    return result;
  }
  if (synth.exit_code != 0) {
    result.synth_ok = false;
    result.note = cap_text(synth.err.empty() ? synth.out : synth.err);
    return result;
  }
  std::optional<double> area = parse_synth_area(synth.out);
  if (!area.has_value()) {
    throw BackendError("could not parse area from synthesis report");
  }
  result.area_um2 = *area;
  if (auto delay_ps = parse_synth_delay_ps(synth.out)) {
    result.meets_timing = (*delay_ps / 1000.0) <= clock_period_ns;
  } else {
    result.meets_timing = true;
    result.note = "no timing data reported; assuming met";
  }
  return result;
}

// ---------------------------------------------------------------------------
// Synthetic oracle
// ---------------------------------------------------------------------------

SyntheticBackend::SyntheticBackend(SyntheticConfig config)
    : config_(config) {
  if (config_.width < 1 || config_.width > 64) {
    throw std::invalid_argument("synthetic landscape width must be in 1..64");
  }
  std::uint64_t mask = config_.width == 64
                           ? ~std::uint64_t(0)
                           : (std::uint64_t(1) << config_.width) - 1;
  if (config_.target.has_value()) {
    target_ = *config_.target & mask;
  } else {
    std::mt19937_64 rng(config_.seed);
    target_ = rng() & mask;
  }
}

std::optional<std::uint64_t> SyntheticBackend::parse_candidate_value(
    const std::string& code) {
  std::size_t pos = code.find("value");
  while (pos != std::string::npos) {
    std::size_t i = pos + 5;
    while (i < code.size() && std::isspace(static_cast<unsigned char>(code[i])))
      ++i;
    if (i < code.size() && code[i] == '=') {
      ++i;
      while (i < code.size() &&
             std::isspace(static_cast<unsigned char>(code[i])))
        ++i;
      char* end = nullptr;
      unsigned long long v = std::strtoull(code.c_str() + i, &end, 0);
      if (end != code.c_str() + i) {
        return v;
      }
    }
    pos = code.find("value", pos + 5);
  }
  return std::nullopt;
}

SimResult SyntheticBackend::run_sim(const std::string& code,
                                    const std::string& /*testbench*/,
                                    const fs::path& /*workdir*/) {
  SimResult result;
  auto value = parse_candidate_value(code);
  if (!value.has_value()) {
    result.stderr_excerpt = "unparsable candidate: no 'value = <int>' block";
    return result;
  }
  result.compile_ok = true;
  result.sim_ok = true;
  std::uint64_t mask = config_.width == 64
                           ? ~std::uint64_t(0)
                           : (std::uint64_t(1) << config_.width) - 1;
  int h = std::popcount((*value ^ target_) & mask);
  int w = static_cast<int>(config_.width);
  result.total = w;
  if (config_.landscape == Landscape::HammingOpt) {
    result.pass = w;  // Opt candidates are functionally valid by construction
  } else if (config_.fine_grained) {
    result.pass = w - h;
  } else {
    result.pass = (h == 0) ? w : 0;
  }
  result.cycles = 10 + h;
  return result;
}

SynthResult SyntheticBackend::run_synth(const std::string& code,
                                        double /*clock_period_ns*/,
                                        const fs::path& /*workdir*/) {
  SynthResult result;
  auto value = parse_candidate_value(code);
  if (!value.has_value()) {
    result.synth_ok = false;
    result.note = "unparsable candidate";
    return result;
  }
  std::uint64_t mask = config_.width == 64
                           ? ~std::uint64_t(0)
                           : (std::uint64_t(1) << config_.width) - 1;
  int h = std::popcount((*value ^ target_) & mask);
  result.area_um2 = 1000.0 + 50.0 * h;
  result.meets_timing = true;
  return result;
}

std::unique_ptr<EvalBackend> synthetic_oracle_backend(
    const SyntheticConfig& config) {
  return std::make_unique<SyntheticBackend>(config);
}

// ---------------------------------------------------------------------------
// SyntheticLlm
// ---------------------------------------------------------------------------

SyntheticLlm::SyntheticLlm(unsigned width, std::uint64_t seed)
    : width_(width), seed_(seed) {
  if (width_ < 1 || width_ > 64) {
    throw std::invalid_argument("synthetic mock width must be in 1..64");
  }
}

llm::LlmResult SyntheticLlm::complete(const llm::PromptBundle& bundle) {
  std::uint64_t mask =
      width_ == 64 ? ~std::uint64_t(0) : (std::uint64_t(1) << width_) - 1;
  std::uint64_t h = llm::prompt_hash(bundle.system, bundle.user) ^ seed_;
  // one splitmix round so nearby prompts land on unrelated values
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ull;
  h ^= h >> 27;

  std::string text;
  switch (bundle.purpose) {
    case llm::Purpose::IdeaGen: {
      std::uint64_t basis = h & mask;
      text = "Explore the neighborhood of basis point " +
             std::to_string(basis) +
             ": initialize there and refine bit by bit.";
      break;
    }
    case llm::Purpose::Summary:
      text = "Integer-parameter candidate over a " + std::to_string(width_) +
             "-bit search space.";
      break;
    case llm::Purpose::InitialCode: {
      std::uint64_t v = h & mask;
      // idea-seeded chains start at the basis point named in the idea
      auto basis_pos = bundle.user.find("basis point ");
      if (basis_pos != std::string::npos) {
        char* end = nullptr;
        unsigned long long parsed = std::strtoull(
            bundle.user.c_str() + basis_pos + 12, &end, 10);
        if (end != bundle.user.c_str() + basis_pos + 12) {
          v = parsed & mask;
        }
      }
      text = "Candidate:\n```\n// parameter block\nvalue = " +
             std::to_string(v) + "\n```\n";
      break;
    }
    case llm::Purpose::Refine: {
      auto parent = SyntheticBackend::parse_candidate_value(bundle.user);
      unsigned bit = static_cast<unsigned>(h % width_);
      std::uint64_t v;
      if (parent.has_value()) {
        v = (*parent ^ (std::uint64_t(1) << bit)) & mask;
      } else {
        v = h & mask;
      }
      if (bundle.template_id.find("refine_edit") != std::string::npos &&
          parent.has_value()) {
        text = "<<<SEARCH\nvalue = " + std::to_string(*parent) +
               "\n====\nvalue = " + std::to_string(v) + "\n>>>REPLACE\n";
      } else {
        text = "Candidate:\n```\n// parameter block\nvalue = " +
               std::to_string(v) + "\n```\n";
      }
      break;
    }
  }

  llm::LlmResult result;
  result.text = text;
  result.usage.prompt_tokens =
      static_cast<long>((bundle.system.size() + bundle.user.size() + 3) / 4);
  result.usage.completion_tokens = static_cast<long>((text.size() + 3) / 4);
  return result;
}

}  // namespace evolve::eda
