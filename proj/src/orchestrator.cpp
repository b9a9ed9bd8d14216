#include "evolve/orchestrator.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include "evolve/igr.hpp"
#include "evolve/mcts.hpp"

namespace evolve::orch {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

json node_to_json(const Node& node) {
  json fb;
  fb["variant"] = to_string(node.feedback.variant);
  fb["text"] = node.feedback.text;
  json fvs = json::array();
  for (const auto& fv : node.feedback.failing_vectors) {
    fvs.push_back({{"where", fv.where},
                   {"expected", fv.expected},
                   {"observed", fv.observed}});
  }
  fb["failing_vectors"] = std::move(fvs);

  json doc;
  doc["id"] = node.id;
  doc["code"] = node.code;
  doc["score"] = node.score;
  doc["feedback"] = std::move(fb);
  if (node.parent_id) {
    doc["parent_id"] = *node.parent_id;
  } else {
    doc["parent_id"] = nullptr;
  }
  doc["depth"] = node.depth;
  doc["created_at"] = node.created_at_node_index;
  return doc;
}

Node node_from_json(const json& doc) {
  Node node;
  node.id = doc.at("id").get<NodeId>();
  node.code = doc.at("code").get<std::string>();
  node.score = doc.at("score").get<double>();
  const json& fb = doc.at("feedback");
  node.feedback.variant =
      feedback_variant_from_string(fb.at("variant").get<std::string>());
  node.feedback.text = fb.at("text").get<std::string>();
  for (const auto& fv : fb.at("failing_vectors")) {
    node.feedback.failing_vectors.push_back(
        {fv.at("where").get<std::string>(),
         fv.at("expected").get<std::string>(),
         fv.at("observed").get<std::string>()});
  }
  if (!doc.at("parent_id").is_null()) {
    node.parent_id = doc.at("parent_id").get<NodeId>();
  }
  node.depth = doc.at("depth").get<int>();
  node.created_at_node_index = doc.at("created_at").get<int>();
  return node;
}

const char* to_string(StrategyKind s) {
  return s == StrategyKind::Mcts ? "mcts" : "igr";
}

StrategyKind strategy_from_string(const std::string& s) {
  if (s == "mcts") return StrategyKind::Mcts;
  if (s == "igr") return StrategyKind::Igr;
  throw ConfigError("unknown strategy '" + s + "' (want mcts|igr)");
}

json config_to_json(const RunConfig& config) {
  json doc;
  doc["strategy"] = to_string(config.strategy);
  doc["max_nodes"] = config.max_nodes;
  doc["igr_ideas"] = config.igr_ideas;
  doc["igr_chain_length"] = config.igr_chain_length;
  doc["expansion_rate"] = config.expansion_rate;
  doc["exploration_c"] = config.exploration_c;
  doc["clock_sweep"] = config.clock_sweep;
  doc["seed"] = config.seed;
  doc["backend"] = config.backend_kind;
  doc["llm"] = config.llm_kind;
  if (config.directive_override) {
    doc["directive"] = to_string(*config.directive_override);
  } else {
    doc["directive"] = nullptr;
  }
  doc["stimulus"] = {{"w_exhaustive_max", config.stimulus.w_exhaustive_max},
                     {"random_vectors", config.stimulus.random_vectors},
                     {"max_total_checks", config.stimulus.max_total_checks}};
  doc["synthetic"] = {
      {"landscape",
       config.synthetic.landscape == eda::Landscape::HammingGen ? "hamming-gen"
                                                                : "hamming-opt"},
      {"width", config.synthetic.width},
      {"fine_grained", config.synthetic.fine_grained}};
  doc["llm_config"] = {{"endpoint", config.llm_config.endpoint},
                       {"model_name", config.llm_config.model_name},
                       {"temperature", config.llm_config.temperature},
                       {"max_tokens", config.llm_config.max_tokens},
                       {"api_key_env", config.llm_config.api_key_env}};
  return doc;
}

RunConfig config_from_json(const json& doc) {
  RunConfig config;
  config.strategy = strategy_from_string(doc.at("strategy").get<std::string>());
  config.max_nodes = doc.at("max_nodes").get<int>();
  config.igr_ideas = doc.at("igr_ideas").get<int>();
  config.igr_chain_length = doc.at("igr_chain_length").get<int>();
  config.expansion_rate = doc.at("expansion_rate").get<int>();
  config.exploration_c = doc.at("exploration_c").get<double>();
  config.clock_sweep = doc.at("clock_sweep").get<std::vector<double>>();
  config.seed = doc.at("seed").get<std::uint64_t>();
  config.backend_kind = doc.at("backend").get<std::string>();
  config.llm_kind = doc.at("llm").get<std::string>();
  if (!doc.at("directive").is_null()) {
    config.directive_override =
        directive_from_string(doc.at("directive").get<std::string>());
  }
  const json& st = doc.at("stimulus");
  config.stimulus.w_exhaustive_max = st.at("w_exhaustive_max").get<unsigned>();
  config.stimulus.random_vectors = st.at("random_vectors").get<int>();
  config.stimulus.max_total_checks = st.at("max_total_checks").get<int>();
  const json& sy = doc.at("synthetic");
  config.synthetic.landscape =
      sy.at("landscape").get<std::string>() == "hamming-gen"
          ? eda::Landscape::HammingGen
          : eda::Landscape::HammingOpt;
  config.synthetic.width = sy.at("width").get<unsigned>();
  config.synthetic.fine_grained = sy.at("fine_grained").get<bool>();
  const json& lc = doc.at("llm_config");
  config.llm_config.endpoint = lc.at("endpoint").get<std::string>();
  config.llm_config.model_name = lc.at("model_name").get<std::string>();
  config.llm_config.temperature = lc.at("temperature").get<double>();
  config.llm_config.max_tokens = lc.at("max_tokens").get<int>();
  config.llm_config.api_key_env = lc.at("api_key_env").get<std::string>();
  return config;
}

json problem_to_json(const ProblemSpec& spec) {
  json doc;
  doc["name"] = spec.name;
  doc["description"] = spec.description;
  doc["task"] = to_string(spec.task.kind);
  doc["directive"] = to_string(spec.task.directive);
  doc["golden_ref"] = spec.golden_ref;
  doc["top_module"] = spec.top_module;
  doc["clock_period_ns"] = spec.clock_period_ns;
  doc["max_nodes"] = spec.max_nodes;
  doc["eta"] = spec.eta;
  doc["c_penalty"] = spec.c_penalty;
  doc["context_text"] = spec.context_text;
  doc["user_testbench"] = spec.user_testbench;
  return doc;
}

ProblemSpec problem_from_json(const json& doc) {
  ProblemSpec spec;
  spec.name = doc.at("name").get<std::string>();
  spec.description = doc.at("description").get<std::string>();
  spec.task.kind = task_type_from_string(doc.at("task").get<std::string>());
  spec.task.directive =
      directive_from_string(doc.at("directive").get<std::string>());
  spec.golden_ref = doc.at("golden_ref").get<std::string>();
  spec.top_module = doc.at("top_module").get<std::string>();
  spec.clock_period_ns = doc.at("clock_period_ns").get<double>();
  spec.max_nodes = doc.at("max_nodes").get<int>();
  spec.eta = doc.at("eta").get<double>();
  spec.c_penalty = doc.at("c_penalty").get<double>();
  spec.context_text = doc.at("context_text").get<std::string>();
  spec.user_testbench = doc.at("user_testbench").get<std::string>();
  return spec;
}

// ---------------------------------------------------------------------------
// Problem ingestion
// ---------------------------------------------------------------------------

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string read_required(const fs::path& path) {
  if (!fs::exists(path)) {
    throw ConfigError("missing required file: " + path.string());
  }
  return read_file(path);
}

}  // namespace

ProblemSpec ingest_problem(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw ConfigError("problem directory not found: " + dir.string());
  }
  ProblemSpec spec;
  spec.description = read_required(dir / "problem.md");

  std::string meta_text = read_required(dir / "problem.json");
  json meta;
  try {
    meta = json::parse(meta_text);
  } catch (const json::exception& e) {
    throw ConfigError("problem.json is not valid JSON: " +
                      std::string(e.what()));
  }
  spec.name = meta.value("name", dir.filename().string());
  try {
    spec.task.kind = task_type_from_string(meta.at("task").get<std::string>());
    spec.top_module = meta.at("top_module").get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError("problem.json lacks a required field: " +
                      std::string(e.what()));
  }
  if (meta.contains("directive")) {
    spec.task.directive =
        directive_from_string(meta.at("directive").get<std::string>());
  }
  if (spec.task.kind == TaskType::Gen &&
      spec.task.directive != Directive::Balanced) {
    throw ConfigError("directive must be balanced for gen tasks");
  }
  spec.clock_period_ns = meta.value("clock_period_ns", 4.0);
  spec.max_nodes = meta.value("max_nodes", 300);
  spec.eta = meta.value("eta", 1e5);
  spec.c_penalty = meta.value("c_penalty", -1e5);
  if (spec.clock_period_ns <= 0) {
    throw ConfigError("clock_period_ns must be positive");
  }
  if (spec.max_nodes < 1) {
    throw ConfigError("max_nodes must be >= 1");
  }
  if (spec.eta <= 0) {
    throw ConfigError("eta must be positive");
  }
  if (spec.c_penalty >= 0) {
    throw ConfigError("c_penalty must be negative");
  }

  if (fs::exists(dir / "golden.v")) {
    spec.golden_ref = read_file(dir / "golden.v");
  }
  if (fs::exists(dir / "context.md")) {
    spec.context_text = read_file(dir / "context.md");
  }
  if (fs::exists(dir / "tb.v")) {
    spec.user_testbench = read_file(dir / "tb.v");
  }
  return spec;
}

stg::TestbenchBundle make_bundle(const ProblemSpec& spec,
                                 const RunConfig& config) {
  stg::TestbenchBundle bundle;
  if (!spec.user_testbench.empty()) {
    // user testbench substitutes STG; results still arrive via the
    // STG_RESULT protocol
    bundle.source = spec.user_testbench;
    return bundle;
  }
  if (config.backend_kind == "synthetic") {
    return bundle;
  }
  if (spec.golden_ref.empty()) {
    throw ConfigError(
        "golden.v is required: testbench generation verifies candidates "
        "against an executable reference model (or supply tb.v to bypass "
        "it)");
  }
  std::vector<stg::Port> ports = stg::classify_ports(
      stg::parse_ports(spec.golden_ref, spec.top_module + "_ref"));
  stg::StimulusConfig stim = config.stimulus;
  stim.seed = config.seed;
  stg::StimulusPlan plan = stg::plan_stimulus(ports, stim);
  return stg::emit_testbench(ports, plan, spec.top_module, ports,
                             spec.clock_period_ns);
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

namespace {

class Persister {
 public:
  Persister() = default;
  Persister(fs::path dir, bool fresh) : dir_(std::move(dir)) {
    if (dir_.empty()) return;
    fs::create_directories(dir_);
    auto mode = fresh ? std::ios::trunc : std::ios::app;
    nodes_.open(dir_ / "nodes.jsonl", std::ios::binary | mode);
    chains_.open(dir_ / "chains.jsonl", std::ios::binary | mode);
  }

  bool enabled() const { return !dir_.empty(); }
  const fs::path& dir() const { return dir_; }

  void write_json(const std::string& name, const json& doc) {
    if (!enabled()) return;
    std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
    out << doc.dump(2) << "\n";
  }

  void append_node(const json& doc) {
    if (!enabled()) return;
    nodes_ << doc.dump() << "\n";
    nodes_.flush();
  }

  void append_chain_event(const json& doc) {
    if (!enabled()) return;
    chains_ << doc.dump() << "\n";
    chains_.flush();
  }

  void write_scaling_csv(const Archive& archive) {
    if (!enabled()) return;
    std::ofstream out(dir_ / "scaling.csv", std::ios::binary | std::ios::trunc);
    out << "node_index,score,best_score\n";
    double best = 0.0;
    bool first = true;
    for (const auto& node : archive.all_nodes()) {
      if (first || node.score > best) best = node.score;
      first = false;
      out << node.created_at_node_index << "," << format_double(node.score)
          << "," << format_double(best) << "\n";
    }
  }

  fs::path scratch_dir(NodeId id) const {
    if (!enabled()) return {};
    return dir_ / "scratch" / std::to_string(id);
  }

 private:
  fs::path dir_;
  std::ofstream nodes_;
  std::ofstream chains_;
};

// ---------------------------------------------------------------------------
// Strategy drivers
// ---------------------------------------------------------------------------

struct LoopCtx {
  const ProblemSpec& spec;
  const RunConfig& config;
  llm::LlmClient& client;
  EvalBackend& backend;
  const stg::TestbenchBundle& bundle;
  llm::PromptLibrary lib;
  Persister& persist;
  igr::NodeAllocator alloc;
  llm::TokenUsage tokens;
  igr::LlmObserver extra_observer;  // transcript hook set by the IGR driver

  void observe(const llm::PromptBundle& b, const llm::LlmResult& r) {
    tokens += r.usage;
    if (extra_observer) extra_observer(b, r);
  }

  igr::LlmObserver observer() {
    return [this](const llm::PromptBundle& b, const llm::LlmResult& r) {
      observe(b, r);
    };
  }

  EvalOutcome evaluate_code(const std::string& code, NodeId id) {
    EvalContext ectx;
    ectx.scratch_dir = persist.scratch_dir(id);
    ectx.summarize = [this](const std::string& c) -> std::string {
      try {
        llm::PromptBundle b = llm::make_summary_prompt(lib, c);
        llm::LlmResult r = client.complete(b);
        observe(b, r);
        return r.text.empty() ? summary_fallback(c) : r.text;
      } catch (const llm::LlmAuthError&) {
        throw;
      } catch (const llm::LlmError&) {
        return summary_fallback(c);
      }
    };
    return evaluate(code, spec, bundle, backend, ectx);
  }

  std::string complete_code(const llm::PromptBundle& bundle_in) {
    try {
      llm::LlmResult result = client.complete(bundle_in);
      observe(bundle_in, result);
      return llm::extract_code(result.text);
    } catch (const llm::LlmAuthError&) {
      throw;
    } catch (const llm::LlmError&) {
      return "";  // evaluated as-is; the penalty records the failure
    }
  }
};

class Driver {
 public:
  virtual ~Driver() = default;
  virtual std::optional<Node> step() = 0;
  virtual void replay(const Node& node) = 0;
  virtual void persist_state() = 0;
};

class MctsDriver : public Driver {
 public:
  explicit MctsDriver(LoopCtx& ctx) : ctx_(ctx) {}

  std::optional<Node> step() override {
    if (!tree_.has_value()) {
      auto [id, index] = ctx_.alloc.alloc();
      llm::PromptBundle prompt = llm::make_initial_prompt(
          ctx_.lib, ctx_.spec,
          llm::budget_info_text(index, ctx_.config.max_nodes));
      std::string code = ctx_.complete_code(prompt);
      EvalOutcome out = ctx_.evaluate_code(code, id);
      Node node;
      node.id = id;
      node.code = std::move(code);
      node.score = out.score;
      node.feedback = out.feedback;
      node.depth = 0;
      node.created_at_node_index = index;
      tree_.emplace(node, ctx_.config.expansion_rate,
                    ctx_.config.exploration_c);
      return node;
    }
    std::size_t leaf = tree_->select_leaf();
    auto [id, index] = ctx_.alloc.alloc();
    const Node& parent = tree_->at(leaf).node;
    llm::PromptBundle prompt = llm::make_refine_prompt(
        ctx_.lib, ctx_.spec, parent,
        llm::budget_info_text(index, ctx_.config.max_nodes), false);
    std::string code = ctx_.complete_code(prompt);
    EvalOutcome out = ctx_.evaluate_code(code, id);
    Node node;
    node.id = id;
    node.code = std::move(code);
    node.score = out.score;
    node.feedback = out.feedback;
    node.parent_id = parent.id;
    node.depth = parent.depth + 1;
    node.created_at_node_index = index;
    std::size_t child_idx = tree_->expand_and_backprop(leaf, node);
    return tree_->at(child_idx).node;
  }

  void replay(const Node& node) override {
    if (!tree_.has_value()) {
      tree_.emplace(node, ctx_.config.expansion_rate,
                    ctx_.config.exploration_c);
      return;
    }
    if (!node.parent_id.has_value()) {
      throw ConfigError("nodes.jsonl holds a second parentless node; not a "
                        "valid MCTS run");
    }
    std::size_t parent_idx = tree_->index_of(*node.parent_id);
    if (parent_idx == tree_->size()) {
      throw ConfigError("nodes.jsonl references unknown parent id " +
                        std::to_string(*node.parent_id));
    }
    tree_->expand_and_backprop(parent_idx, node);
  }

  void persist_state() override {
    if (tree_.has_value()) {
      ctx_.persist.write_json("tree.json", tree_->snapshot());
    }
  }

 private:
  LoopCtx& ctx_;
  std::optional<mcts::Tree> tree_;
};

class IgrDriver : public Driver {
 public:
  explicit IgrDriver(LoopCtx& ctx) : ctx_(ctx) {
    if (ctx_.config.igr_ideas * ctx_.config.igr_chain_length !=
        ctx_.config.max_nodes) {
      std::cerr << "warning: k*m = "
                << ctx_.config.igr_ideas * ctx_.config.igr_chain_length
                << " differs from the node budget " << ctx_.config.max_nodes
                << "\n";
    }
  }

  std::optional<Node> step() override {
    ensure_chains();
    if (chains_.empty()) return std::nullopt;
    for (std::size_t probe = 0; probe < chains_.size(); ++probe) {
      std::size_t i = (rr_ + probe) % chains_.size();
      if (chains_[i].status != igr::ChainStatus::Active) continue;
      current_chain_ = static_cast<int>(i);
      ctx_.extra_observer = [this](const llm::PromptBundle& b,
                                   const llm::LlmResult& r) {
        log_exchange(b, r);
      };
      auto evaluate_fn = [this](const std::string& code, NodeId id) {
        return ctx_.evaluate_code(code, id);
      };
      std::optional<Node> node = igr::advance_chain(
          chains_[i], ctx_.spec, ctx_.config.igr_chain_length, evaluate_fn,
          ctx_.client, ctx_.lib, ctx_.alloc, ctx_.config.max_nodes,
          ctx_.observer());
      ctx_.extra_observer = {};
      rr_ = (i + 1) % chains_.size();
      if (node.has_value()) {
        json event;
        event["type"] = "node";
        event["chain"] = chains_[i].idea.index;
        event["node_id"] = node->id;
        event["step"] = static_cast<int>(chains_[i].nodes.size());
        event["score"] = node->score;
        ctx_.persist.append_chain_event(event);
      }
      return node;
    }
    return std::nullopt;  // every chain is solved or exhausted
  }

  void replay(const Node& node) override {
    replayed_.push_back(node);
  }

  void persist_state() override {}

  // Resume: ideas reloaded from the transcript, then nodes re-attached to
  // their chains by lineage (a parentless node opens the next chain).
  void preload_ideas(const std::vector<igr::Idea>& ideas) {
    for (const auto& idea : ideas) {
      igr::Chain chain;
      chain.idea = idea;
      chains_.push_back(std::move(chain));
    }
    ideas_ready_ = !chains_.empty();
  }

  void finish_replay() {
    if (replayed_.empty()) return;
    std::size_t next_root = 0;
    std::size_t last_chain = 0;
    for (const Node& node : replayed_) {
      if (!node.parent_id.has_value()) {
        if (next_root >= chains_.size()) {
          throw ConfigError(
              "nodes.jsonl holds more root nodes than recorded ideas");
        }
        chains_[next_root].nodes.push_back(node);
        last_chain = next_root;
        ++next_root;
      } else {
        bool attached = false;
        for (std::size_t i = 0; i < chains_.size(); ++i) {
          if (!chains_[i].nodes.empty() &&
              chains_[i].nodes.back().id == *node.parent_id) {
            chains_[i].nodes.push_back(node);
            last_chain = i;
            attached = true;
            break;
          }
        }
        if (!attached) {
          throw ConfigError("nodes.jsonl node " + std::to_string(node.id) +
                            " does not extend any chain");
        }
      }
    }
    for (auto& chain : chains_) {
      if (chain.nodes.empty()) continue;
      if (ctx_.spec.task.kind == TaskType::Gen &&
          chain.nodes.back().score >= 1.0) {
        chain.status = igr::ChainStatus::Solved;
      } else if (static_cast<int>(chain.nodes.size()) >=
                 ctx_.config.igr_chain_length) {
        chain.status = igr::ChainStatus::Exhausted;
      }
    }
    rr_ = (last_chain + 1) % chains_.size();
    replayed_.clear();
  }

 private:
  void ensure_chains() {
    if (ideas_ready_) return;
    ctx_.extra_observer = [this](const llm::PromptBundle& b,
                                 const llm::LlmResult& r) {
      log_exchange(b, r);
    };
    std::vector<igr::Idea> ideas =
        igr::generate_ideas(ctx_.spec, ctx_.config.igr_ideas, ctx_.client,
                            ctx_.lib, ctx_.observer());
    ctx_.extra_observer = {};
    if (ideas.empty()) {
      throw BackendError("idea generation produced no usable ideas");
    }
    for (const auto& idea : ideas) {
      json event;
      event["type"] = "idea";
      event["index"] = idea.index;
      event["text"] = idea.text;
      ctx_.persist.append_chain_event(event);
      igr::Chain chain;
      chain.idea = idea;
      chains_.push_back(std::move(chain));
    }
    ideas_ready_ = true;
  }

  void log_exchange(const llm::PromptBundle& b, const llm::LlmResult& r) {
    json event;
    event["type"] = "exchange";
    event["chain"] = current_chain_ >= 0
                         ? json(chains_[current_chain_].idea.index)
                         : json(nullptr);
    event["purpose"] = llm::to_string(b.purpose);
    event["template"] = b.template_id;
    event["system"] = b.system;
    event["user"] = b.user;
    event["response"] = r.text;
    event["prompt_tokens"] = r.usage.prompt_tokens;
    event["completion_tokens"] = r.usage.completion_tokens;
    ctx_.persist.append_chain_event(event);
  }

  LoopCtx& ctx_;
  std::vector<igr::Chain> chains_;
  std::vector<Node> replayed_;
  std::size_t rr_ = 0;
  int current_chain_ = -1;
  bool ideas_ready_ = false;
};

// ---------------------------------------------------------------------------
// Run loop
// ---------------------------------------------------------------------------

void validate_config(const RunConfig& config) {
  if (config.max_nodes < 1) {
    throw ConfigError("max-nodes must be >= 1");
  }
  if (config.strategy == StrategyKind::Igr) {
    if (config.igr_ideas < 1 || config.igr_chain_length < 1) {
      throw ConfigError("igr requires k >= 1 and m >= 1");
    }
  } else {
    if (config.expansion_rate < 1) {
      throw ConfigError("mcts requires expansion-rate >= 1");
    }
  }
  if (config.backend_kind != "open-source" &&
      config.backend_kind != "synthetic") {
    throw ConfigError("backend must be open-source or synthetic");
  }
  if (config.llm_kind != "remote" && config.llm_kind != "mock") {
    throw ConfigError("llm must be remote or mock");
  }
}

json report_doc(const ProblemSpec& spec, const RunConfig& config,
                const Archive& archive, const llm::TokenUsage& tokens) {
  json doc;
  if (archive.best()) {
    doc["best_node_id"] = archive.best()->id;
    doc["best_score"] = archive.best()->score;
  } else {
    doc["best_node_id"] = nullptr;
    doc["best_score"] = nullptr;
  }
  doc["node_count"] = archive.node_count();
  std::optional<int> solve_index;
  if (spec.task.kind == TaskType::Gen) {
    for (const auto& node : archive.all_nodes()) {
      if (node.score >= 1.0) {
        solve_index = node.created_at_node_index;
        break;
      }
    }
  }
  if (solve_index) {
    doc["nodes_to_solve"] = *solve_index;
  } else {
    doc["nodes_to_solve"] = nullptr;
  }
  doc["solved"] = solve_index.has_value();
  doc["strategy"] = to_string(config.strategy);
  doc["seed"] = config.seed;
  doc["tokens"] = {{"prompt", tokens.prompt_tokens},
                   {"completion", tokens.completion_tokens},
                   {"total", tokens.total()}};
  return doc;
}

RunResult run_loop(const ProblemSpec& spec, const RunConfig& config,
                   llm::LlmClient& client, EvalBackend& backend,
                   const stg::TestbenchBundle& bundle, Persister& persist,
                   std::vector<Node> replay_nodes,
                   std::vector<igr::Idea> replay_ideas) {
  LoopCtx ctx{spec,    config, client, backend,
              bundle,  llm::PromptLibrary::load(config.prompts_dir.string()),
              persist, {},     {},     {}};

  std::unique_ptr<Driver> driver;
  if (config.strategy == StrategyKind::Mcts) {
    driver = std::make_unique<MctsDriver>(ctx);
  } else {
    driver = std::make_unique<IgrDriver>(ctx);
  }

  RunResult result;
  if (!replay_nodes.empty() || !replay_ideas.empty()) {
    if (auto* igr_driver = dynamic_cast<IgrDriver*>(driver.get())) {
      igr_driver->preload_ideas(replay_ideas);
    }
    for (const Node& node : replay_nodes) {
      driver->replay(node);
      result.archive.append(node);
      ctx.alloc.next_id = std::max(ctx.alloc.next_id, node.id + 1);
      ctx.alloc.next_index =
          std::max(ctx.alloc.next_index, node.created_at_node_index + 1);
    }
    if (auto* igr_driver = dynamic_cast<IgrDriver*>(driver.get())) {
      igr_driver->finish_replay();
    }
  }

  auto solved = [&]() {
    return spec.task.kind == TaskType::Gen && result.archive.best() &&
           result.archive.best()->score >= 1.0;
  };

  try {
    while (!solved() && result.archive.node_count() < config.max_nodes) {
      std::optional<Node> node = driver->step();
      if (!node.has_value()) break;  // strategy exhausted its chains
      result.archive.append(*node);
      persist.append_node(node_to_json(*node));
    }
  } catch (const BackendError& e) {
    result.exit_code = kExitBackendFailure;
    result.failure = e.what();
  } catch (const llm::LlmAuthError& e) {
    result.exit_code = kExitBackendFailure;
    result.failure = e.what();
  } catch (const llm::LlmError& e) {
    result.exit_code = kExitBackendFailure;
    result.failure = e.what();
  }

  driver->persist_state();
  result.tokens = ctx.tokens;
  result.solved = solved();
  if (spec.task.kind == TaskType::Gen) {
    for (const auto& node : result.archive.all_nodes()) {
      if (node.score >= 1.0) {
        result.nodes_to_solve = node.created_at_node_index;
        break;
      }
    }
  }
  if (result.exit_code == kExitComplete && spec.task.kind == TaskType::Gen &&
      !result.solved) {
    result.exit_code = kExitBudgetExhausted;
  }

  persist.write_scaling_csv(result.archive);
  persist.write_json("report.json",
                     report_doc(spec, config, result.archive, result.tokens));
  json run_doc;
  run_doc["config"] = config_to_json(config);
  run_doc["problem"] = problem_to_json(spec);
  run_doc["tokens"] = {{"prompt", ctx.tokens.prompt_tokens},
                       {"completion", ctx.tokens.completion_tokens},
                       {"total", ctx.tokens.total()}};
  run_doc["completed"] = result.exit_code != kExitBackendFailure;
  if (!result.failure.empty()) run_doc["failure"] = result.failure;
  persist.write_json("run.json", run_doc);
  return result;
}

}  // namespace

RunResult run(const ProblemSpec& spec, const RunConfig& config,
              llm::LlmClient& client, EvalBackend& backend) {
  validate_config(config);
  stg::TestbenchBundle bundle = make_bundle(spec, config);
  Persister persist(config.out_dir, /*fresh=*/true);
  if (persist.enabled()) {
    json run_doc;
    run_doc["config"] = config_to_json(config);
    run_doc["problem"] = problem_to_json(spec);
    run_doc["completed"] = false;
    persist.write_json("run.json", run_doc);
    if (!bundle.source.empty()) {
      std::ofstream tb(config.out_dir / "testbench.v", std::ios::binary);
      tb << bundle.source;
    }
  }
  return run_loop(spec, config, client, backend, bundle, persist, {}, {});
}

RunResult resume(const fs::path& run_dir, llm::LlmClient& client,
                 EvalBackend& backend) {
  std::ifstream run_file(run_dir / "run.json");
  if (!run_file) {
    throw ConfigError("cannot open " + (run_dir / "run.json").string());
  }
  json run_doc = json::parse(run_file);
  RunConfig config = config_from_json(run_doc.at("config"));
  config.out_dir = run_dir;
  ProblemSpec spec = problem_from_json(run_doc.at("problem"));
  stg::TestbenchBundle bundle = make_bundle(spec, config);

  std::vector<Node> nodes;
  std::ifstream nodes_file(run_dir / "nodes.jsonl");
  std::string line;
  while (std::getline(nodes_file, line)) {
    if (line.empty()) continue;
    nodes.push_back(node_from_json(json::parse(line)));
  }

  std::vector<igr::Idea> ideas;
  if (config.strategy == StrategyKind::Igr) {
    std::ifstream chains_file(run_dir / "chains.jsonl");
    while (std::getline(chains_file, line)) {
      if (line.empty()) continue;
      json event = json::parse(line);
      if (event.value("type", "") == "idea") {
        igr::Idea idea;
        idea.index = event.at("index").get<int>();
        idea.text = event.at("text").get<std::string>();
        ideas.push_back(std::move(idea));
      }
    }
  }

  Persister persist(run_dir, /*fresh=*/false);
  return run_loop(spec, config, client, backend, bundle, persist,
                  std::move(nodes), std::move(ideas));
}

json report(const fs::path& run_dir) {
  std::ifstream run_file(run_dir / "run.json");
  if (!run_file) {
    throw ConfigError("cannot open " + (run_dir / "run.json").string());
  }
  json run_doc = json::parse(run_file);
  RunConfig config = config_from_json(run_doc.at("config"));
  ProblemSpec spec = problem_from_json(run_doc.at("problem"));

  Archive archive;
  std::ifstream nodes_file(run_dir / "nodes.jsonl");
  std::string line;
  while (std::getline(nodes_file, line)) {
    if (line.empty()) continue;
    archive.append(node_from_json(json::parse(line)));
  }

  llm::TokenUsage tokens;
  if (run_doc.contains("tokens")) {
    tokens.prompt_tokens = run_doc["tokens"].value("prompt", 0L);
    tokens.completion_tokens = run_doc["tokens"].value("completion", 0L);
  }

  json doc = report_doc(spec, config, archive, tokens);
  Persister persist(run_dir, /*fresh=*/false);
  persist.write_json("report.json", doc);
  persist.write_scaling_csv(archive);
  return doc;
}

}  // namespace evolve::orch
