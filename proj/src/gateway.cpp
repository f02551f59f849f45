#include "collab/gateway.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace collab {

using nlohmann::json;

std::string to_string(ReasoningEffort effort) {
  switch (effort) {
    case ReasoningEffort::kLow: return "low";
    case ReasoningEffort::kMedium: return "medium";
    case ReasoningEffort::kHigh: return "high";
  }
  return "medium";
}

ReasoningEffort parse_reasoning_effort(std::string_view text) {
  if (text == "low") return ReasoningEffort::kLow;
  if (text == "medium") return ReasoningEffort::kMedium;
  if (text == "high") return ReasoningEffort::kHigh;
  throw ConfigError("unknown reasoning effort: " + std::string(text));
}

void ChatRequest::validate() const {
  if (user_text.empty()) throw ContractViolation("chat request: empty user text");
  if (!(temperature >= 0.0)) throw ContractViolation("chat request: temperature must be >= 0");
  if (max_output < 1) throw ContractViolation("chat request: max_output must be >= 1");
}

std::string ChatRequest::full_text() const {
  if (!system_text) return user_text;
  return *system_text + "\n\n" + user_text;
}

namespace {

class SlotGuard {
 public:
  explicit SlotGuard(std::counting_semaphore<4096>& s) : s_(s) { s_.acquire(); }
  ~SlotGuard() { s_.release(); }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;

 private:
  std::counting_semaphore<4096>& s_;
};

}  // namespace

Gateway::Gateway(std::shared_ptr<ChatBackend> chat, std::shared_ptr<EmbeddingBackend> embedder,
                 int max_concurrent)
    : chat_(std::move(chat)),
      embedder_(std::move(embedder)),
      max_concurrent_(max_concurrent),
      slots_(std::clamp(max_concurrent, 1, 4096)) {
  if (max_concurrent < 1 || max_concurrent > 4096)
    throw ConfigError("gateway: concurrency cap must be in [1, 4096]");
}

void Gateway::set_log_sink(LogSink sink, std::string api_key_env) {
  std::lock_guard lock(log_mutex_);
  sink_ = std::move(sink);
  api_key_env_ = std::move(api_key_env);
}

bool Gateway::is_live() const {
  return (chat_ && chat_->is_live()) || (embedder_ && embedder_->is_live());
}

bool Gateway::credential_present() const {
  const char* v = std::getenv(api_key_env_.c_str());
  return v != nullptr && *v != '\0';
}

void Gateway::log(LogLevel level, std::string_view message) const {
  std::lock_guard lock(log_mutex_);
  if (sink_.enabled(level)) sink_.write(level, message);
}

ChatResponse Gateway::chat(const ChatRequest& request) {
  if (!chat_) throw ConfigError("gateway: no chat backend configured");
  request.validate();
  log(LogLevel::kDebug, "chat run=" + request.tag.run_id + " agent=" +
                            std::to_string(request.tag.agent) + " period=" +
                            std::to_string(request.tag.period) + " attempt=" +
                            std::to_string(request.tag.attempt) + " chars=" +
                            std::to_string(request.full_text().size()));
  if (!credential_present()) log(LogLevel::kTrace, request.full_text());

  const auto start = std::chrono::steady_clock::now();
  ChatResponse response;
  {
    SlotGuard guard(slots_);
    response = chat_->chat(request);
  }
  if (response.latency.count() == 0) {
    response.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - start);
  }
  return response;
}

EmbeddingBatch Gateway::embed(const std::vector<std::string>& texts) {
  if (!embedder_) throw ConfigError("gateway: no embedding backend configured");
  if (texts.empty()) throw ContractViolation("embed: empty batch");
  log(LogLevel::kDebug, "embed texts=" + std::to_string(texts.size()));
  SlotGuard guard(slots_);
  EmbeddingBatch batch = embedder_->embed(texts);
  if (batch.vectors.size() != texts.size())
    throw TransportError("embed: backend returned wrong number of vectors");
  for (const auto& v : batch.vectors) {
    if (v.size() != batch.dimension()) throw TransportError("embed: ragged embedding dimensions");
  }
  return batch;
}

std::chrono::milliseconds RetryPolicy::delay_for(int retry) const {
  const double ms = static_cast<double>(initial_delay.count()) * std::pow(multiplier, retry);
  return std::chrono::milliseconds(
      static_cast<long long>(std::min(ms, static_cast<double>(max_delay.count()))));
}

std::string chat_request_body(const ChatRequest& request, const std::string& default_model) {
  json messages = json::array();
  if (request.system_text) messages.push_back({{"role", "system"}, {"content", *request.system_text}});
  messages.push_back({{"role", "user"}, {"content", request.user_text}});
  json body = {
      {"model", request.model_id.empty() ? default_model : request.model_id},
      {"messages", messages},
      {"temperature", request.temperature},
  };
  if (request.reasoning_effort) {
    // Reasoning models take a completion budget and an effort level instead.
    body["reasoning_effort"] = to_string(*request.reasoning_effort);
    body["max_completion_tokens"] = request.max_output;
  } else {
    body["max_tokens"] = request.max_output;
  }
  return body.dump();
}

ChatResponse parse_chat_response(const std::string& body) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::exception& e) {
    throw TransportError(std::string("chat: unparseable response: ") + e.what());
  }
  const auto& choices = doc.value("choices", json::array());
  if (choices.empty() || !choices[0].contains("message"))
    throw TransportError("chat: response has no choices");
  const auto& content = choices[0]["message"].value("content", json());
  if (!content.is_string()) throw TransportError("chat: response has no text");
  ChatResponse out;
  out.text = content.get<std::string>();
  if (doc.contains("usage")) {
    out.usage.prompt_tokens = doc["usage"].value("prompt_tokens", 0);
    out.usage.completion_tokens = doc["usage"].value("completion_tokens", 0);
  }
  return out;
}

std::string embedding_request_body(const std::vector<std::string>& texts, const std::string& model) {
  return json{{"model", model}, {"input", texts}}.dump();
}

std::vector<EmbeddingVector> parse_embedding_response(const std::string& body, std::size_t expected) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::exception& e) {
    throw TransportError(std::string("embed: unparseable response: ") + e.what());
  }
  const auto& data = doc.value("data", json::array());
  if (data.size() != expected) throw TransportError("embed: wrong number of embeddings");
  std::vector<EmbeddingVector> out(expected);
  for (const auto& item : data) {
    const std::size_t index = item.value("index", std::size_t{0});
    if (index >= expected) throw TransportError("embed: embedding index out of range");
    const auto values = item.at("embedding").get<std::vector<double>>();
    out[index] = Eigen::Map<const Eigen::VectorXd>(values.data(),
                                                   static_cast<Eigen::Index>(values.size()));
  }
  return out;
}

LiveBackend::LiveBackend(LiveConfig config, std::shared_ptr<HttpTransport> transport,
                         Sleeper sleeper)
    : config_(std::move(config)), transport_(std::move(transport)), sleeper_(std::move(sleeper)) {
  const char* key = std::getenv(config_.api_key_env.c_str());
  if (key == nullptr || *key == '\0')
    throw ConfigError("live backend: credential variable " + config_.api_key_env + " is not set");
  credential_ = key;
  if (!transport_) transport_ = make_http_transport(config_.base_url, config_.timeout);
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

HttpResponse LiveBackend::post_with_retry(const std::string& path, const std::string& body) {
  const std::vector<std::pair<std::string, std::string>> headers{
      {"Authorization", "Bearer " + credential_}};
  for (int retry = 0;; ++retry) {
    HttpResponse r = transport_->post_json(path, body, headers);
    if (r.status >= 200 && r.status < 300) return r;
    if (!RetryPolicy::retryable(r.status)) {
      throw TransportError("HTTP " + std::to_string(r.status) + " from " + path, r.status);
    }
    if (retry >= config_.retry.max_retries) {
      throw TransportError("transport retries exhausted for " + path +
                               (r.error.empty() ? "" : ": " + r.error),
                           r.status);
    }
    sleeper_(config_.retry.delay_for(retry));
  }
}

ChatResponse LiveBackend::chat(const ChatRequest& request) {
  request.validate();
  const auto start = std::chrono::steady_clock::now();
  HttpResponse r = post_with_retry("/v1/chat/completions",
                                   chat_request_body(request, config_.chat_model));
  ChatResponse out = parse_chat_response(r.body);
  out.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - start);
  return out;
}

EmbeddingBatch LiveBackend::embed(const std::vector<std::string>& texts) {
  if (texts.empty()) throw ContractViolation("embed: empty batch");
  HttpResponse r =
      post_with_retry("/v1/embeddings", embedding_request_body(texts, config_.embedding_model));
  EmbeddingBatch batch;
  batch.texts = texts;
  batch.model_id = config_.embedding_model;
  batch.vectors = parse_embedding_response(r.body, texts.size());
  return batch;
}

}  // namespace collab
