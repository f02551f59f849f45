#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "collab/gateway.hpp"

namespace collab {

enum class MarketKind { kDuopoly, kMonopoly, kAuction };
enum class MemoryMode { kFull, kNoPlans, kNoInsights, kNoMemory };
enum class PromptPlacement { kUserConcatenated, kSystem };
enum class DecisionKind { kPricing, kAuction };

// kTrimmed renders whole numbers without a decimal part ("1"), kDecimal keeps
// one ("1.0"). Both round to cents and drop trailing zeros otherwise.
enum class NumberStyle { kTrimmed, kDecimal };

std::string to_string(MarketKind kind);
std::string to_string(MemoryMode mode);
std::string to_string(PromptPlacement placement);
std::string to_string(NumberStyle style);
MarketKind parse_market_kind(std::string_view text);
MemoryMode parse_memory_mode(std::string_view text);
PromptPlacement parse_placement(std::string_view text);
NumberStyle parse_number_style(std::string_view text);

inline DecisionKind decision_kind(MarketKind kind) {
  return kind == MarketKind::kAuction ? DecisionKind::kAuction : DecisionKind::kPricing;
}

std::string format_number(double value, NumberStyle style = NumberStyle::kDecimal);

struct PromptPrefix {
  std::string id;
  std::string text;

  friend bool operator==(const PromptPrefix&, const PromptPrefix&) = default;
};

// Resource directory holding prefixes/<version>/<id>.txt and fixtures. The
// COLLAB_RESOURCES environment variable overrides the compiled-in default.
std::filesystem::path default_resource_dir();

// Reads a UTF-8 resource file, dropping one trailing newline if present.
std::string read_resource_text(const std::filesystem::path& path);

// Built-in prefix ids are P0, P1, P2, P3, P1C, P2C, A0, A1, A2. Ids of the form
// "custom:<name>" load prefixes/<version>/custom/<name>.txt.
class PrefixLibrary {
 public:
  explicit PrefixLibrary(std::filesystem::path resource_dir = default_resource_dir(),
                         std::string version = "v1");

  PromptPrefix get(const std::string& id) const;
  static const std::vector<std::string>& builtin_ids();

  const std::string& version() const noexcept { return version_; }
  const std::filesystem::path& resource_dir() const noexcept { return dir_; }

 private:
  std::filesystem::path dir_;
  std::string version_;
};

struct QueryOptions {
  std::string model_id;
  double temperature = 1.0;
  int max_output = 2048;
  std::optional<ReasoningEffort> reasoning_effort;

  friend bool operator==(const QueryOptions&, const QueryOptions&) = default;
};

struct AgentState {
  PromptPrefix prefix;
  std::string plans;
  std::string insights;
  MarketKind kind = MarketKind::kDuopoly;
  double marginal_cost = 1.0;  // alpha * c, as displayed
  double ceiling = 0.0;        // pricing only
  double item_value = 1.0;     // auction only
  NumberStyle cost_style = NumberStyle::kTrimmed;
  NumberStyle value_style = NumberStyle::kDecimal;
  MemoryMode memory_mode = MemoryMode::kFull;
  PromptPlacement placement = PromptPlacement::kUserConcatenated;
  QueryOptions query;

  friend bool operator==(const AgentState&, const AgentState&) = default;
};

// One past round from the agent's point of view.
struct HistoryEntry {
  int round = 0;
  double value = 0.0;  // own price or bid
  std::optional<double> competitor_price;
  double quantity = 0.0;
  double profit = 0.0;
  // Auction feedback.
  bool won = false;
  double reference_bid = 0.0;  // winning bid if lost, sufficient bid if won
  double payment = 0.0;
};

inline constexpr int kHistoryCap = 100;

// Chronological records (oldest first); rendering is most recent first.
struct HistoryWindow {
  std::vector<HistoryEntry> records;
  bool include_competitor = true;
  bool auction_mode = false;

  // Keeps only the last `cap` records.
  void truncate(int cap = kHistoryCap);
};

std::string render_history(const HistoryWindow& window);

ChatRequest assemble_prompt(const AgentState& state, const HistoryWindow& window);

struct ParsedDecision {
  std::string observations;
  std::string new_plans;
  std::string new_insights;
  double value = 0.0;  // rounded to cents
  std::string raw;
};

// Throws FormatError when a template header is missing or no number follows
// the chosen-value header.
ParsedDecision parse_decision(std::string_view raw, DecisionKind kind);

inline constexpr int kFormatRetryLimit = 10;

struct DecisionResult {
  ParsedDecision decision;
  int retries = 0;  // failed attempts before the accepted one
  bool ceiling_exceeded = false;
  ChatRequest request;
  std::vector<std::string> rejected;  // raw completions that failed to parse
};

// assemble -> chat -> parse, re-querying on FormatError. Throws RunAbort after
// `retry_limit` consecutive failures.
DecisionResult decide(const AgentState& state, const HistoryWindow& window, Gateway& gateway,
                      const RequestTag& tag, int retry_limit = kFormatRetryLimit);

// Memory carried into the next period, with erasures for the memory mode.
AgentState next_state(AgentState state, const ParsedDecision& decision);

// Fresh-agent probe: the response-template instructions are replaced by the
// question. Returns the raw answers.
std::vector<std::string> ask_one_shot(const AgentState& state, std::string_view question,
                                      Gateway& gateway, int samples, const RequestTag& tag = {});

// Template header strings, shared with the scripted backend.
namespace headers {
inline constexpr std::string_view kObservations = "My observations and thoughts:";
inline constexpr std::string_view kPlans = "New content for PLANS.txt:";
inline constexpr std::string_view kInsights = "New content for INSIGHTS.txt:";
inline constexpr std::string_view kChosenPrice = "My chosen price:";
inline constexpr std::string_view kChosenBid = "My chosen bid:";
inline constexpr std::string_view kFence = "+++++++++++++++++++++";
}  // namespace headers

// Pulls the content of a fenced file block ("Filename: PLANS.txt" etc.) out of
// an assembled prompt. Returns nullopt when the block is absent.
std::optional<std::string> extract_prompt_block(std::string_view prompt, std::string_view filename);

}  // namespace collab
