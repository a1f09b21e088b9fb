#pragma once

#include <chrono>
#include <string>
#include <string_view>
#include <utility>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "receipt_ner/backend.hpp"

namespace receipt_ner {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

inline Endpoint split_endpoint(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) throw Error("endpoint '" + std::string(url) + "' lacks a scheme");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string_view::npos) return {std::string(url), "/"};
  return {std::string(url.substr(0, path_start)), std::string(url.substr(path_start))};
}

// Wire body: {"prompt", "max_new_tokens", "temperature", "top_k", "do_sample"}.
inline nlohmann::ordered_json completion_request_body(const std::string& prompt, const GenerationParams& p) {
  nlohmann::ordered_json j;
  j["prompt"] = prompt;
  j["max_new_tokens"] = p.max_new_tokens;
  j["temperature"] = p.temperature;
  j["top_k"] = p.top_k;
  j["do_sample"] = p.do_sample;
  return j;
}

// POSTs one JSON request per completion and expects {"text": continuation}.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(BackendConfig cfg) : cfg_(std::move(cfg)), endpoint_(split_endpoint(cfg_.endpoint)) {
    cfg_.validate();
  }

  std::string complete(const CompletionRequest& request, const GenerationParams& params) override {
    if (request.prompt.empty()) throw BackendError(request, "empty prompt");
    const std::string body = completion_request_body(request.prompt, params).dump();
    std::string last_error;
    for (std::uint32_t attempt = 0; attempt <= cfg_.retries; ++attempt) {
      httplib::Client client(endpoint_.origin);
      const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
      const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout - secs);
      client.set_connection_timeout(secs.count(), usecs.count());
      client.set_read_timeout(secs.count(), usecs.count());
      client.set_write_timeout(secs.count(), usecs.count());
      auto res = client.Post(endpoint_.path, body, "application/json; charset=utf-8");
      if (!res) {
        last_error = "request failed: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status < 200 || res->status >= 300) {
        last_error = "HTTP status " + std::to_string(res->status);
        continue;
      }
      try {
        const auto j = nlohmann::json::parse(res->body);
        return j.at("text").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        last_error = std::string("malformed response body: ") + e.what();
      }
    }
    throw BackendError(request, last_error + " (after " + std::to_string(cfg_.retries + 1) + " attempt(s))");
  }

 private:
  BackendConfig cfg_;
  Endpoint endpoint_;
};

}  // namespace receipt_ner
