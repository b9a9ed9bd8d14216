#include <cstdlib>
#include <sstream>

#include "evolve/llm.hpp"
#include "httplib.h"
#include "json.hpp"

namespace evolve::llm {

using nlohmann::json;

namespace {

struct SplitUrl {
  std::string base;  // scheme://host[:port]
  std::string path;  // /v1/chat/completions
};

SplitUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw LlmError("endpoint URL lacks a scheme: " + url);
  }
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    return {url, "/chat/completions"};
  }
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

HttpLlm::HttpLlm(LlmConfig config) : config_(std::move(config)) {}

LlmResult HttpLlm::complete_once(const PromptBundle& bundle) {
  SplitUrl url = split_url(config_.endpoint);
  httplib::Client client(url.base);
  client.set_connection_timeout(30);
  client.set_read_timeout(600);

  httplib::Headers headers;
  if (!config_.api_key_env.empty()) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key != nullptr && key[0] != '\0') {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }

  json request = {
      {"model", config_.model_name},
      {"messages",
       json::array({
           json{{"role", "system"}, {"content", bundle.system}},
           json{{"role", "user"}, {"content", bundle.user}},
       })},
      {"temperature", config_.temperature},
      {"max_tokens", config_.max_tokens},
  };

  auto res = client.Post(url.path, headers, request.dump(), "application/json");
  if (!res) {
    std::ostringstream os;
    os << "request to " << config_.endpoint
       << " failed: " << httplib::to_string(res.error());
    throw LlmTransportError(os.str());
  }
  if (res->status == 401 || res->status == 403) {
    throw LlmAuthError("authentication rejected by " + config_.endpoint +
                       " (status " + std::to_string(res->status) + ")");
  }
  if (res->status != 200) {
    throw LlmTransportError("endpoint returned status " +
                            std::to_string(res->status) + ": " +
                            res->body.substr(0, 500));
  }

  json doc;
  try {
    doc = json::parse(res->body);
  } catch (const json::exception& e) {
    throw LlmTransportError(std::string("unparsable response body: ") +
                            e.what());
  }
  if (!doc.contains("choices") || doc["choices"].empty()) {
    throw LlmTransportError("response carries no choices");
  }
  LlmResult out;
  out.text = doc["choices"][0].at("message").at("content").get<std::string>();
  if (doc.contains("usage")) {
    out.usage.prompt_tokens = doc["usage"].value("prompt_tokens", 0L);
    out.usage.completion_tokens = doc["usage"].value("completion_tokens", 0L);
  }
  return out;
}

LlmResult HttpLlm::complete(const PromptBundle& bundle) {
  int attempts = config_.transport_retries + 1;
  for (int i = 0; i < attempts; ++i) {
    try {
      return complete_once(bundle);
    } catch (const LlmAuthError&) {
      throw;
    } catch (const LlmTransportError&) {
      if (i + 1 == attempts) throw;
    }
  }
  throw LlmTransportError("unreachable");
}

}  // namespace evolve::llm
