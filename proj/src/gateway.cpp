#include "chaintrust/gateway.hpp"

#include <cstdlib>
#include <fstream>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>

namespace chaintrust {

using nlohmann::json;

std::string_view to_string(TransportErrorKind kind) {
  switch (kind) {
    case TransportErrorKind::network: return "network";
    case TransportErrorKind::timeout: return "timeout";
    case TransportErrorKind::rate_limited: return "rate_limited";
    case TransportErrorKind::server: return "server";
    case TransportErrorKind::auth: return "auth";
    case TransportErrorKind::bad_request: return "bad_request";
    case TransportErrorKind::empty_completion: return "empty_completion";
    case TransportErrorKind::malformed_response: return "malformed_response";
    case TransportErrorKind::unknown_prompt: return "unknown_prompt";
  }
  return "?";
}

bool is_retryable(TransportErrorKind kind) {
  switch (kind) {
    case TransportErrorKind::network:
    case TransportErrorKind::timeout:
    case TransportErrorKind::rate_limited:
    case TransportErrorKind::server:
      return true;
    default:
      return false;
  }
}

TransportError::TransportError(TransportErrorKind kind, const std::string& message)
    : std::runtime_error(fmt::format("{}: {}", to_string(kind), message)), kind_(kind) {}

std::chrono::milliseconds RetryPolicy::delay_after(int attempt) const {
  auto delay = backoff_base;
  for (int i = 1; i < attempt && delay < backoff_cap; ++i) delay *= 2;
  return std::min(delay, backoff_cap);
}

void ModelConfig::validate() const {
  if (endpoint.empty()) throw std::invalid_argument("model endpoint is empty");
  if (!(temperature >= 0.0)) throw std::invalid_argument("temperature must be >= 0");
  if (max_tokens < 1) throw std::invalid_argument("max_tokens must be >= 1");
  if (retry.max_attempts < 1) throw std::invalid_argument("retry max_attempts must be >= 1");
}

RetryingTransport::RetryingTransport(std::shared_ptr<Transport> inner, RetryPolicy policy,
                                     Sleeper sleeper)
    : inner_(std::move(inner)), policy_(policy), sleeper_(std::move(sleeper)) {
  if (!inner_) throw std::invalid_argument("RetryingTransport needs an inner transport");
  if (policy_.max_attempts < 1) throw std::invalid_argument("retry max_attempts must be >= 1");
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::string RetryingTransport::complete(const std::string& prompt) {
  if (prompt.empty()) throw std::invalid_argument("prompt is empty");
  for (int attempt = 1;; ++attempt) {
    try {
      auto text = inner_->complete(prompt);
      std::lock_guard lock(mutex_);
      last_attempts_ = attempt;
      return text;
    } catch (const TransportError& e) {
      if (!is_retryable(e.kind()) || attempt >= policy_.max_attempts) {
        std::lock_guard lock(mutex_);
        last_attempts_ = attempt;
        throw;
      }
    }
    sleeper_(policy_.delay_after(attempt));
  }
}

int RetryingTransport::last_attempts() const {
  std::lock_guard lock(mutex_);
  return last_attempts_;
}

ChatCompletionsTransport::ChatCompletionsTransport(ModelConfig config, std::string api_key,
                                                   HttpPoster poster)
    : config_(std::move(config)), api_key_(std::move(api_key)), poster_(std::move(poster)) {
  config_.validate();
  if (!poster_) poster_ = default_http_poster();
}

std::string ChatCompletionsTransport::request_body(const std::string& prompt) const {
  json messages = json::array();
  if (config_.system_message) {
    messages.push_back({{"role", "system"}, {"content", *config_.system_message}});
  }
  messages.push_back({{"role", "user"}, {"content", prompt}});
  json body = {{"model", config_.model},
               {"messages", messages},
               {"temperature", config_.temperature},
               {"max_tokens", config_.max_tokens}};
  return body.dump();
}

std::string ChatCompletionsTransport::extract_content(const std::string& response_body) {
  json doc = json::parse(response_body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw TransportError(TransportErrorKind::malformed_response, "response is not a JSON object");
  }
  const auto choices = doc.find("choices");
  if (choices == doc.end() || !choices->is_array() || choices->empty()) {
    throw TransportError(TransportErrorKind::malformed_response, "response has no choices");
  }
  const auto& first = (*choices)[0];
  if (!first.contains("message") || !first["message"].is_object()) {
    throw TransportError(TransportErrorKind::malformed_response, "first choice has no message");
  }
  const auto& content = first["message"].value("content", json());
  if (content.is_null() || (content.is_string() && content.get<std::string>().empty())) {
    throw TransportError(TransportErrorKind::empty_completion, "model returned no content");
  }
  if (!content.is_string()) {
    throw TransportError(TransportErrorKind::malformed_response, "message content is not text");
  }
  return content.get<std::string>();
}

std::string ChatCompletionsTransport::complete(const std::string& prompt) {
  if (prompt.empty()) throw std::invalid_argument("prompt is empty");
  std::map<std::string, std::string> headers{{"Content-Type", "application/json"}};
  if (!api_key_.empty()) headers["Authorization"] = "Bearer " + api_key_;

  const auto response = poster_(config_.endpoint, request_body(prompt), headers, config_.timeout);
  if (response.timed_out) throw TransportError(TransportErrorKind::timeout, response.transport_error);
  if (!response.transport_error.empty()) {
    throw TransportError(TransportErrorKind::network, response.transport_error);
  }
  const auto status = response.status;
  if (status == 401 || status == 403) {
    throw TransportError(TransportErrorKind::auth, fmt::format("HTTP {}", status));
  }
  if (status == 429) throw TransportError(TransportErrorKind::rate_limited, "HTTP 429");
  if (status == 408) throw TransportError(TransportErrorKind::timeout, "HTTP 408");
  if (status >= 500) {
    throw TransportError(TransportErrorKind::server, fmt::format("HTTP {}", status));
  }
  if (status < 200 || status >= 300) {
    throw TransportError(TransportErrorKind::bad_request,
                         fmt::format("HTTP {}: {}", status, response.body.substr(0, 200)));
  }
  return extract_content(response.body);
}

std::shared_ptr<Transport> make_model_transport(const ModelConfig& config) {
  config.validate();
  const char* key = std::getenv(config.api_key_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw std::invalid_argument(
        fmt::format("environment variable {} is not set", config.api_key_env));
  }
  auto live = std::make_shared<ChatCompletionsTransport>(config, key);
  return std::make_shared<RetryingTransport>(live, config.retry);
}

ScriptedTransport::ScriptedTransport(std::vector<std::string> ordered) {
  for (auto& r : ordered) push(std::move(r));
}

void ScriptedTransport::push(std::string response) {
  push_step([r = std::move(response)](const std::string&) { return r; });
}

void ScriptedTransport::push_error(TransportErrorKind kind, std::string message) {
  push_step([kind, m = std::move(message)](const std::string&) -> std::string {
    throw TransportError(kind, m);
  });
}

void ScriptedTransport::push_step(Step step) {
  std::lock_guard lock(mutex_);
  queue_.push_back(std::move(step));
}

void ScriptedTransport::on_substring(std::string key, std::string response) {
  std::lock_guard lock(mutex_);
  keyed_.emplace_back(std::move(key), std::move(response));
}

std::string ScriptedTransport::complete(const std::string& prompt) {
  if (prompt.empty()) throw std::invalid_argument("prompt is empty");
  Step step;
  {
    std::lock_guard lock(mutex_);
    calls_.push_back(prompt);
    for (const auto& [key, response] : keyed_) {
      if (prompt.find(key) != std::string::npos) return response;
    }
    if (next_ >= queue_.size()) {
      throw TransportError(TransportErrorKind::unknown_prompt, "scripted transport exhausted");
    }
    step = queue_[next_++];
  }
  return step(prompt);
}

std::vector<std::string> ScriptedTransport::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

std::size_t ScriptedTransport::call_count() const {
  std::lock_guard lock(mutex_);
  return calls_.size();
}

std::string prompt_hash(const std::string& prompt) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(prompt.data(), prompt.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::string hex;
  hex.reserve(length * 2);
  for (unsigned int i = 0; i < length; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

namespace {

json to_json(const TranscriptRecord& r) {
  return {{"hash", r.hash}, {"prompt", r.prompt}, {"response", r.response}};
}

}  // namespace

std::vector<TranscriptRecord> read_transcript(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open transcript {}", path.string()));
  std::vector<TranscriptRecord> out;
  std::string line;
  for (int line_no = 1; std::getline(in, line); ++line_no) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json doc = json::parse(line, nullptr, false);
    auto corrupt = [&](std::string_view why) {
      return std::runtime_error(
          fmt::format("transcript {} line {}: {}", path.string(), line_no, why));
    };
    if (doc.is_discarded() || !doc.is_object()) throw corrupt("not a JSON object");
    for (const char* field : {"hash", "prompt", "response"}) {
      if (!doc.contains(field) || !doc[field].is_string()) {
        throw corrupt(fmt::format("missing string field '{}'", field));
      }
    }
    TranscriptRecord r{doc["hash"], doc["prompt"], doc["response"]};
    if (prompt_hash(r.prompt) != r.hash) throw corrupt("hash does not match prompt");
    out.push_back(std::move(r));
  }
  return out;
}

void write_transcript(const std::filesystem::path& path,
                      const std::vector<TranscriptRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot write transcript {}", path.string()));
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

RecordingTransport::RecordingTransport(std::shared_ptr<Transport> inner, std::filesystem::path path)
    : inner_(std::move(inner)), path_(std::move(path)) {
  if (!inner_) throw std::invalid_argument("record mode needs a live transport");
  std::ofstream truncate(path_, std::ios::trunc);
  if (!truncate) throw std::runtime_error(fmt::format("cannot write transcript {}", path_.string()));
}

std::string RecordingTransport::complete(const std::string& prompt) {
  auto response = inner_->complete(prompt);
  TranscriptRecord record{prompt_hash(prompt), prompt, response};
  std::lock_guard lock(mutex_);
  std::ofstream out(path_, std::ios::app);
  out << to_json(record).dump() << '\n';
  records_.push_back(std::move(record));
  return response;
}

std::vector<TranscriptRecord> RecordingTransport::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

ReplayTransport::ReplayTransport(const std::vector<TranscriptRecord>& records) {
  for (const auto& r : records) by_hash_.emplace(r.hash, r.response);
}

ReplayTransport::ReplayTransport(const std::filesystem::path& path)
    : ReplayTransport(read_transcript(path)) {}

std::string ReplayTransport::complete(const std::string& prompt) {
  if (prompt.empty()) throw std::invalid_argument("prompt is empty");
  const auto hash = prompt_hash(prompt);
  auto it = by_hash_.find(hash);
  if (it == by_hash_.end()) {
    throw TransportError(TransportErrorKind::unknown_prompt,
                         fmt::format("no recorded response for prompt hash {}", hash));
  }
  return it->second;
}

std::shared_ptr<Transport> record_replay(TranscriptMode mode, const std::filesystem::path& store,
                                         std::shared_ptr<Transport> live) {
  if (mode == TranscriptMode::record) return std::make_shared<RecordingTransport>(live, store);
  if (!std::filesystem::exists(store)) {
    throw std::invalid_argument(fmt::format("transcript {} does not exist", store.string()));
  }
  return std::make_shared<ReplayTransport>(store);
}

}  // namespace chaintrust
