#pragma once

// Client for an OpenAI-compatible chat-completions endpoint.

#include <cstdlib>
#include <memory>
#include <string>

#include <httplib.h>

#include "misinfo/interventions.hpp"

namespace misinfo {

struct LlmEndpointConfig {
  std::string base_url = "https://api.openai.com";
  std::string path = "/v1/chat/completions";
  std::string model_id = "gpt-4-0613";
  std::string api_key_env = "MISINFO_LLM_API_KEY";
  json extra_params = json::object();  // forwarded verbatim (temperature etc.)
  int timeout_seconds = 60;
};

class HttpLlmClient : public LlmClient {
 public:
  explicit HttpLlmClient(LlmEndpointConfig config) : config_(std::move(config)) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr || *key == '\0')
      throw ProviderFailure("credential variable " + config_.api_key_env + " is not set");
    api_key_ = key;
  }

  std::string complete(const PromptRequest& request) override {
    httplib::Client client(config_.base_url);
    client.set_read_timeout(config_.timeout_seconds, 0);
    client.set_connection_timeout(config_.timeout_seconds, 0);
    client.set_bearer_token_auth(api_key_);

    json body = config_.extra_params;
    body["model"] = request.model_id.empty() ? config_.model_id : request.model_id;
    body["messages"] = json::array({json{{"role", "user"}, {"content", request.filled_prompt}}});

    auto res = client.Post(config_.path, body.dump(), "application/json");
    if (!res)
      throw ProviderFailure("request to " + config_.base_url + " failed: " +
                            httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500) {
      std::optional<int> retry_after;
      if (res->has_header("Retry-After")) {
        try {
          retry_after = std::stoi(res->get_header_value("Retry-After"));
        } catch (const std::exception&) {
        }
      }
      throw ProviderFailure("service unavailable (HTTP " + std::to_string(res->status) + ")",
                            retry_after);
    }
    if (res->status != 200)
      throw ProviderFailure("completion request rejected (HTTP " + std::to_string(res->status) +
                            "): " + res->body);
    try {
      auto reply = json::parse(res->body);
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
      throw ProviderFailure(std::string("malformed completion response: ") + e.what());
    }
  }

 private:
  LlmEndpointConfig config_;
  std::string api_key_;
};

}  // namespace misinfo
