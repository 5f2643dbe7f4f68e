#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace chaintrust {

enum class TransportErrorKind {
  network,
  timeout,
  rate_limited,
  server,
  auth,
  bad_request,
  empty_completion,
  malformed_response,
  unknown_prompt,
};

std::string_view to_string(TransportErrorKind kind);

/// Network, timeout, rate-limit and 5xx failures are worth another attempt.
bool is_retryable(TransportErrorKind kind);

class TransportError : public std::runtime_error {
 public:
  TransportError(TransportErrorKind kind, const std::string& message);
  TransportErrorKind kind() const { return kind_; }

 private:
  TransportErrorKind kind_;
};

/// A single prompt in, completion text out. Implementations must tolerate
/// concurrent calls.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::string complete(const std::string& prompt) = 0;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds backoff_base{500};
  std::chrono::milliseconds backoff_cap{8000};

  /// Delay before attempt `attempt + 1`, doubling from the base.
  std::chrono::milliseconds delay_after(int attempt) const;
};

struct ModelConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-4o";
  double temperature = 0.0;
  int max_tokens = 1024;
  std::chrono::seconds timeout{60};
  RetryPolicy retry;
  /// Name of the environment variable holding the API key.
  std::string api_key_env = "OPENAI_API_KEY";
  std::optional<std::string> system_message;

  /// Throws std::invalid_argument when temperature < 0, max_attempts < 1,
  /// max_tokens < 1 or the endpoint is empty.
  void validate() const;
};

/// Wraps another transport and retries retryable failures.
class RetryingTransport : public Transport {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  RetryingTransport(std::shared_ptr<Transport> inner, RetryPolicy policy, Sleeper sleeper = {});

  std::string complete(const std::string& prompt) override;

  /// Attempts made by the most recent complete() on any thread.
  int last_attempts() const;

 private:
  std::shared_ptr<Transport> inner_;
  RetryPolicy policy_;
  Sleeper sleeper_;
  mutable std::mutex mutex_;
  int last_attempts_ = 0;
};

/// Request/response pair for the HTTP seam, so tests can stub the network.
struct HttpResponse {
  int status = 0;
  std::string body;
  std::string transport_error;  // non-empty when no response was received
  bool timed_out = false;
};

using HttpPoster = std::function<HttpResponse(const std::string& url, const std::string& body,
                                              const std::map<std::string, std::string>& headers,
                                              std::chrono::seconds timeout)>;

/// Default poster backed by cpp-httplib.
HttpPoster default_http_poster();

/// One attempt against a chat-completions endpoint.
class ChatCompletionsTransport : public Transport {
 public:
  ChatCompletionsTransport(ModelConfig config, std::string api_key, HttpPoster poster = {});

  std::string complete(const std::string& prompt) override;

  /// JSON request body for `prompt`.
  std::string request_body(const std::string& prompt) const;
  /// First choice's message content; throws TransportError on bad shapes.
  static std::string extract_content(const std::string& response_body);

 private:
  ModelConfig config_;
  std::string api_key_;
  HttpPoster poster_;
};

/// ChatCompletionsTransport wrapped in RetryingTransport, key read from the
/// environment. Throws std::invalid_argument if the key variable is unset.
std::shared_ptr<Transport> make_model_transport(const ModelConfig& config);

/// Canned responses for hermetic runs. Keyed entries (substring match on the
/// prompt, first registered key wins) take priority over the ordered queue.
class ScriptedTransport : public Transport {
 public:
  using Step = std::function<std::string(const std::string& prompt)>;

  ScriptedTransport() = default;
  explicit ScriptedTransport(std::vector<std::string> ordered);

  void push(std::string response);
  void push_error(TransportErrorKind kind, std::string message = "scripted failure");
  void push_step(Step step);
  void on_substring(std::string key, std::string response);

  std::string complete(const std::string& prompt) override;

  std::vector<std::string> calls() const;
  std::size_t call_count() const;

 private:
  mutable std::mutex mutex_;
  std::vector<Step> queue_;
  std::size_t next_ = 0;
  std::vector<std::pair<std::string, std::string>> keyed_;
  std::vector<std::string> calls_;
};

/// Hex SHA-256 of the prompt bytes.
std::string prompt_hash(const std::string& prompt);

struct TranscriptRecord {
  std::string hash;
  std::string prompt;
  std::string response;
};

/// Line-delimited JSON: one {"hash", "prompt", "response"} object per line.
std::vector<TranscriptRecord> read_transcript(const std::filesystem::path& path);
void write_transcript(const std::filesystem::path& path, const std::vector<TranscriptRecord>& records);

/// Forwards to a live transport and appends every exchange to a transcript.
class RecordingTransport : public Transport {
 public:
  RecordingTransport(std::shared_ptr<Transport> inner, std::filesystem::path path);

  std::string complete(const std::string& prompt) override;
  std::vector<TranscriptRecord> records() const;

 private:
  std::shared_ptr<Transport> inner_;
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::vector<TranscriptRecord> records_;
};

/// Serves responses by prompt hash; unknown hashes fail with unknown_prompt.
class ReplayTransport : public Transport {
 public:
  explicit ReplayTransport(const std::vector<TranscriptRecord>& records);
  explicit ReplayTransport(const std::filesystem::path& path);

  std::string complete(const std::string& prompt) override;
  std::size_t size() const { return by_hash_.size(); }

 private:
  std::map<std::string, std::string> by_hash_;
};

enum class TranscriptMode { record, replay };

/// Record mode wraps `live`; replay mode ignores it and requires the file.
std::shared_ptr<Transport> record_replay(TranscriptMode mode, const std::filesystem::path& store,
                                         std::shared_ptr<Transport> live = nullptr);

}  // namespace chaintrust
