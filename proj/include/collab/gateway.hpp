#pragma once

#include <Eigen/Dense>

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "collab/errors.hpp"

namespace collab {

enum class ReasoningEffort { kLow, kMedium, kHigh };

std::string to_string(ReasoningEffort effort);
ReasoningEffort parse_reasoning_effort(std::string_view text);

// Identifies who is asking; scripted backends derive their randomness from it
// and failure injection keys off `attempt`.
struct RequestTag {
  std::string run_id;
  int agent = 0;
  int period = 0;
  int attempt = 0;
};

struct ChatRequest {
  std::optional<std::string> system_text;
  std::string user_text;
  std::string model_id;
  double temperature = 1.0;
  int max_output = 2048;
  std::optional<ReasoningEffort> reasoning_effort;
  RequestTag tag;

  void validate() const;
  // System text (if any), a blank line, then the user text.
  std::string full_text() const;
};

struct TokenUsage {
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

struct ChatResponse {
  std::string text;
  TokenUsage usage;
  std::chrono::milliseconds latency{0};
};

using EmbeddingVector = Eigen::VectorXd;

struct EmbeddingBatch {
  std::vector<std::string> texts;
  std::string model_id;
  std::vector<EmbeddingVector> vectors;

  Eigen::Index dimension() const { return vectors.empty() ? 0 : vectors.front().size(); }
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatResponse chat(const ChatRequest& request) = 0;
  virtual bool is_live() const { return false; }
};

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  // One vector per input text, uniform dimension.
  virtual EmbeddingBatch embed(const std::vector<std::string>& texts) = 0;
  virtual std::string model_id() const = 0;
  virtual bool is_live() const { return false; }
};

enum class LogLevel { kError = 0, kInfo = 1, kDebug = 2, kTrace = 3 };

struct LogSink {
  LogLevel level = LogLevel::kInfo;
  std::function<void(LogLevel, std::string_view)> write;

  bool enabled(LogLevel l) const { return write && static_cast<int>(l) <= static_cast<int>(level); }
};

inline constexpr std::string_view kDefaultApiKeyEnv = "COLLAB_LLM_API_KEY";

// Shared entry point for chat and embedding calls. Caps the number of requests
// in flight across all callers; prompt text is only logged at trace level and
// never while a credential is present in the environment.
class Gateway {
 public:
  explicit Gateway(std::shared_ptr<ChatBackend> chat,
                   std::shared_ptr<EmbeddingBackend> embedder = nullptr,
                   int max_concurrent = 8);

  ChatResponse chat(const ChatRequest& request);
  EmbeddingBatch embed(const std::vector<std::string>& texts);

  void set_log_sink(LogSink sink, std::string api_key_env = std::string(kDefaultApiKeyEnv));

  int max_concurrent() const noexcept { return max_concurrent_; }
  bool has_chat() const noexcept { return chat_ != nullptr; }
  bool has_embedder() const noexcept { return embedder_ != nullptr; }
  bool is_live() const;
  EmbeddingBackend* embedder() const noexcept { return embedder_.get(); }

 private:
  void log(LogLevel level, std::string_view message) const;
  bool credential_present() const;

  std::shared_ptr<ChatBackend> chat_;
  std::shared_ptr<EmbeddingBackend> embedder_;
  int max_concurrent_;
  std::counting_semaphore<4096> slots_;
  LogSink sink_;
  std::string api_key_env_{kDefaultApiKeyEnv};
  mutable std::mutex log_mutex_;
};

// ---------------------------------------------------------------------------
// HTTP service backend

struct HttpResponse {
  int status = 0;  // 0 when no response arrived (timeout, refused, ...)
  std::string body;
  std::string error;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post_json(const std::string& path, const std::string& body,
                                 const std::vector<std::pair<std::string, std::string>>& headers) = 0;
};

std::shared_ptr<HttpTransport> make_http_transport(const std::string& base_url,
                                                   std::chrono::seconds timeout);

// Transport-level retries for timeouts, 429 and 5xx. Distinct from the agent's
// retries on malformed completions.
struct RetryPolicy {
  int max_retries = 5;
  std::chrono::milliseconds initial_delay{1000};
  std::chrono::milliseconds max_delay{32000};
  double multiplier = 2.0;

  std::chrono::milliseconds delay_for(int retry) const;
  static bool retryable(int status) { return status == 0 || status == 429 || status >= 500; }
};

struct LiveConfig {
  std::string base_url = "https://api.openai.com";
  std::string api_key_env{kDefaultApiKeyEnv};
  std::string chat_model = "gpt-4-0613";
  std::string embedding_model = "text-embedding-3-large";
  RetryPolicy retry;
  std::chrono::seconds timeout{120};
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

// OpenAI-compatible chat-completions and embeddings client.
class LiveBackend : public ChatBackend, public EmbeddingBackend {
 public:
  // Throws ConfigError when the credential variable is unset.
  LiveBackend(LiveConfig config, std::shared_ptr<HttpTransport> transport,
              Sleeper sleeper = nullptr);

  ChatResponse chat(const ChatRequest& request) override;
  EmbeddingBatch embed(const std::vector<std::string>& texts) override;
  std::string model_id() const override { return config_.embedding_model; }
  bool is_live() const override { return true; }

  const LiveConfig& config() const noexcept { return config_; }

 private:
  HttpResponse post_with_retry(const std::string& path, const std::string& body);

  LiveConfig config_;
  std::shared_ptr<HttpTransport> transport_;
  Sleeper sleeper_;
  std::string credential_;
};

// Request body helpers, exposed for wire-format tests.
std::string chat_request_body(const ChatRequest& request, const std::string& default_model);
ChatResponse parse_chat_response(const std::string& body);
std::string embedding_request_body(const std::vector<std::string>& texts, const std::string& model);
std::vector<EmbeddingVector> parse_embedding_response(const std::string& body, std::size_t expected);

}  // namespace collab
