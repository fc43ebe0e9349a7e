// Copyright 2026 The promptcomp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdlib>

#include "absl/strings/match.h"
#include "absl/strings/str_cat.h"
#include "httplib.h"
#include "json.hpp"
#include "promptcomp/llm_gateway.h"

namespace promptcomp {

HttpBackend::HttpBackend(const GatewayConfig& config, std::string origin,
                         std::string path, std::string api_key)
    : config_(config),
      origin_(std::move(origin)),
      path_(std::move(path)),
      api_key_(std::move(api_key)) {}

absl::StatusOr<std::unique_ptr<HttpBackend>> HttpBackend::Create(
    const GatewayConfig& config) {
  const std::string& url = config.endpoint;
  const size_t scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    return absl::InvalidArgumentError(absl::StrCat("bad endpoint '", url, "'"));
  }
  const size_t path_start = url.find('/', scheme_end + 3);
  std::string origin = url.substr(0, path_start);
  std::string path =
      path_start == std::string::npos ? "/v1/completions" : url.substr(path_start);
  std::string api_key;
  if (const char* key = std::getenv(config.api_key_env.c_str())) api_key = key;
  return std::unique_ptr<HttpBackend>(
      new HttpBackend(config, std::move(origin), std::move(path), std::move(api_key)));
}

absl::StatusOr<std::string> HttpBackend::Complete(const CompletionRequest& request) {
  ++calls_;
  const bool chat = absl::StrContains(path_, "chat/completions");
  nlohmann::json body = {{"model", config_.model_id},
                         {"max_tokens", request.max_tokens},
                         {"temperature", 0}};
  if (chat) {
    body["messages"] = {{{"role", "user"}, {"content", request.prompt}}};
  } else {
    body["prompt"] = request.prompt;
  }

  httplib::Client client(origin_);
  const auto timeout = std::chrono::milliseconds(config_.timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers headers;
  if (!api_key_.empty()) {
    headers.emplace("Authorization", absl::StrCat("Bearer ", api_key_));
  }
  httplib::Result response =
      client.Post(path_, headers, body.dump(), "application/json");
  if (!response) {
    return absl::UnavailableError(
        absl::StrCat("transport error: ", httplib::to_string(response.error())));
  }
  if (response->status < 200 || response->status >= 300) {
    return absl::UnavailableError(absl::StrCat("HTTP ", response->status));
  }
  const nlohmann::json reply =
      nlohmann::json::parse(response->body, nullptr, /*allow_exceptions=*/false);
  if (!reply.is_object() || !reply.contains("choices") ||
      !reply["choices"].is_array() || reply["choices"].empty()) {
    return absl::DataLossError("response has no choices");
  }
  const nlohmann::json& choice = reply["choices"][0];
  if (choice.contains("message") && choice["message"].is_object() &&
      choice["message"].contains("content") &&
      choice["message"]["content"].is_string()) {
    return choice["message"]["content"].get<std::string>();
  }
  if (choice.contains("text") && choice["text"].is_string()) {
    return choice["text"].get<std::string>();
  }
  return absl::DataLossError("choice has neither text nor message content");
}

}  // namespace promptcomp
