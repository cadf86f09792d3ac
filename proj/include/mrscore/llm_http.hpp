#pragma once

#include <chrono>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

#ifdef MRSCORE_HAS_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include "mrscore/jsonl.hpp"
#include "mrscore/llmgen.hpp"

namespace mrscore {

// Remote chat-completions backend. Speaks the widely used messages schema:
// POST {base}/chat/completions with {"model", "messages", "temperature",
// "max_tokens"}, reply text at choices[0].message.content. Transport
// failures, 429 and 5xx are retried with exponential backoff; anything
// else fails immediately.

struct HttpBackendConfig {
    std::string base_url;        // e.g. http://localhost:8089/v1
    std::string model = "gpt-4";
    std::string api_key;         // usually from MRSCORE_API_KEY
    int timeout_sec = 30;
    int max_retries = 3;         // attempts beyond the first
    int backoff_ms = 250;        // doubled per retry
};

class HttpBackend : public ChatBackend {
  public:
    explicit HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
        if (config_.base_url.empty()) throw BackendError("remote backend needs a base URL");
        split_url(config_.base_url, host_, path_prefix_);
#ifndef MRSCORE_HAS_OPENSSL
        if (host_.rfind("https://", 0) == 0)
            throw BackendError("this build lacks TLS support; use an http:// endpoint");
#endif
    }

    Source source_tag() const override { return Source::llm; }

    std::string complete(const std::vector<ChatMessage>& messages,
                         const ChatParams& params) override {
        Json body;
        body["model"] = config_.model;
        Json msgs = Json::array();
        for (const auto& m : messages) {
            Json jm;
            jm["role"] = m.role;
            jm["content"] = m.content;
            msgs.push_back(jm);
        }
        body["messages"] = msgs;
        body["temperature"] = params.temperature;
        body["max_tokens"] = params.max_tokens;
        const std::string payload = body.dump();

        std::string last_error;
        for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
            if (attempt > 0)
                std::this_thread::sleep_for(
                    std::chrono::milliseconds(config_.backoff_ms << (attempt - 1)));

            httplib::Client client(host_);
            client.set_connection_timeout(config_.timeout_sec);
            client.set_read_timeout(config_.timeout_sec);
            httplib::Headers headers;
            if (!config_.api_key.empty())
                headers.emplace("Authorization", "Bearer " + config_.api_key);

            auto res = client.Post(path_prefix_ + "/chat/completions", headers, payload,
                                   "application/json");
            if (!res) {
                last_error = "transport failure: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status == 429 || res->status >= 500) {
                last_error = "HTTP " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200)
                throw BackendError("chat endpoint returned HTTP " +
                                   std::to_string(res->status) + ": " + res->body);
            return extract_reply(res->body);
        }
        throw BackendError("chat endpoint unreachable after " +
                           std::to_string(config_.max_retries + 1) + " attempts (" +
                           last_error + ")");
    }

    static std::string extract_reply(const std::string& body) {
        Json j;
        try {
            j = Json::parse(body);
        } catch (const nlohmann::json::parse_error& e) {
            throw BackendError(std::string("malformed completion body: ") + e.what());
        }
        try {
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw BackendError(std::string("completion body lacks choices[0].message.content: ") +
                               e.what());
        }
    }

    // scheme://host[:port][/prefix] -> (scheme://host:port, /prefix)
    static void split_url(const std::string& url, std::string& host, std::string& prefix) {
        std::size_t scheme = url.find("://");
        std::size_t path_start =
            scheme == std::string::npos ? url.find('/') : url.find('/', scheme + 3);
        if (path_start == std::string::npos) {
            host = url;
            prefix.clear();
        } else {
            host = url.substr(0, path_start);
            prefix = url.substr(path_start);
            while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
        }
    }

  private:
    HttpBackendConfig config_;
    std::string host_;
    std::string path_prefix_;
};

inline const char* kApiKeyEnvVar = "MRSCORE_API_KEY";

inline std::string api_key_from_env() {
    const char* v = std::getenv(kApiKeyEnvVar);
    return v ? std::string(v) : std::string();
}

}  // namespace mrscore
