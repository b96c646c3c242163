#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "coref/common.hpp"
#include "coref/inference.hpp"

// Completion client for a remote predictor. Protocol, bit-exact:
//   POST <endpoint>
//   {"prompt": <context>, "max_tokens": <n>, "stop": ["<", "\n"]}
//   Authorization: Bearer <token>        (when configured)
// Response body: {"text": <string>}.

namespace coref {

struct RemoteConfig {
  std::string url;          // e.g. http://localhost:8080/complete
  std::string auth_token;   // empty = no Authorization header
  double timeout_sec = 30;
  int max_retries = 2;      // transport-level, with backoff
  int backoff_ms = 250;
};

class RemoteBackend : public PredictorBackend {
 public:
  explicit RemoteBackend(RemoteConfig config) : config_(std::move(config)) {
    size_t scheme = config_.url.find("://");
    if (scheme == std::string::npos)
      throw Error(cat("remote endpoint \"", config_.url, "\" has no scheme"));
    size_t path = config_.url.find('/', scheme + 3);
    base_ = path == std::string::npos ? config_.url : config_.url.substr(0, path);
    path_ = path == std::string::npos ? "/" : config_.url.substr(path);
  }

  std::string complete(const std::string& context, int max_new_length,
                       const std::vector<std::string>& stop) override {
    nlohmann::json body{{"prompt", context}, {"max_tokens", max_new_length}, {"stop", stop}};
    std::string payload = body.dump();

    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
      if (attempt > 0)
        std::this_thread::sleep_for(std::chrono::milliseconds(config_.backoff_ms << (attempt - 1)));

      httplib::Client client(base_);
      auto seconds = static_cast<time_t>(config_.timeout_sec);
      auto micros = static_cast<long>((config_.timeout_sec - static_cast<double>(seconds)) * 1e6);
      client.set_connection_timeout(seconds, micros);
      client.set_read_timeout(seconds, micros);
      client.set_write_timeout(seconds, micros);
      httplib::Headers headers;
      if (!config_.auth_token.empty())
        headers.emplace("Authorization", "Bearer " + config_.auth_token);

      auto res = client.Post(path_, headers, payload, "application/json");
      if (!res) {
        last_error = cat("request failed: ", httplib::to_string(res.error()));
        continue;
      }
      if (res->status < 200 || res->status >= 300) {
        last_error = cat("HTTP ", res->status);
        continue;
      }
      nlohmann::json parsed = nlohmann::json::parse(res->body, nullptr, false);
      if (parsed.is_discarded() || !parsed.contains("text") || !parsed["text"].is_string()) {
        last_error = "malformed response body (expected {\"text\": <string>})";
        continue;
      }
      std::string text = parsed["text"].get<std::string>();
      // enforce the stop condition even if the server ignored it
      size_t cut = text.find_first_of("<\n");
      if (cut != std::string::npos) text.resize(cut);
      return text;
    }
    throw TransportError(cat("remote backend gave up after ", config_.max_retries + 1,
                             " attempts: ", last_error));
  }

 private:
  RemoteConfig config_;
  std::string base_;
  std::string path_;
};

inline std::unique_ptr<PredictorBackend> make_remote_backend(RemoteConfig config) {
  return std::make_unique<RemoteBackend>(std::move(config));
}

}  // namespace coref
