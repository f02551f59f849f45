#include "collab/agent.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>

#include "collab/equilibrium.hpp"

namespace collab {

std::string to_string(MarketKind kind) {
  switch (kind) {
    case MarketKind::kDuopoly: return "duopoly";
    case MarketKind::kMonopoly: return "monopoly";
    case MarketKind::kAuction: return "auction";
  }
  return "duopoly";
}

std::string to_string(MemoryMode mode) {
  switch (mode) {
    case MemoryMode::kFull: return "full";
    case MemoryMode::kNoPlans: return "no-plans";
    case MemoryMode::kNoInsights: return "no-insights";
    case MemoryMode::kNoMemory: return "no-memory";
  }
  return "full";
}

std::string to_string(PromptPlacement placement) {
  return placement == PromptPlacement::kSystem ? "system" : "user-concatenated";
}

std::string to_string(NumberStyle style) {
  return style == NumberStyle::kTrimmed ? "trimmed" : "decimal";
}

MarketKind parse_market_kind(std::string_view text) {
  if (text == "duopoly") return MarketKind::kDuopoly;
  if (text == "monopoly") return MarketKind::kMonopoly;
  if (text == "auction") return MarketKind::kAuction;
  throw ConfigError("unknown environment: " + std::string(text));
}

MemoryMode parse_memory_mode(std::string_view text) {
  if (text == "full") return MemoryMode::kFull;
  if (text == "no-plans") return MemoryMode::kNoPlans;
  if (text == "no-insights") return MemoryMode::kNoInsights;
  if (text == "no-memory") return MemoryMode::kNoMemory;
  throw ConfigError("unknown memory mode: " + std::string(text));
}

PromptPlacement parse_placement(std::string_view text) {
  if (text == "system") return PromptPlacement::kSystem;
  if (text == "user-concatenated" || text == "user") return PromptPlacement::kUserConcatenated;
  throw ConfigError("unknown prompt placement: " + std::string(text));
}

NumberStyle parse_number_style(std::string_view text) {
  if (text == "trimmed") return NumberStyle::kTrimmed;
  if (text == "decimal") return NumberStyle::kDecimal;
  throw ConfigError("unknown number style: " + std::string(text));
}

std::string format_number(double value, NumberStyle style) {
  if (!std::isfinite(value)) throw NumericDomainError("format_number: non-finite value");
  const double r = round_cents(value);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", r);
  std::string s = buf;
  if (s == "-0.00") s = "0.00";
  while (s.back() == '0') s.pop_back();
  if (s.back() == '.') {
    if (style == NumberStyle::kTrimmed) {
      s.pop_back();
    } else {
      s.push_back('0');
    }
  }
  return s;
}

std::filesystem::path default_resource_dir() {
  if (const char* env = std::getenv("COLLAB_RESOURCES"); env != nullptr && *env != '\0') {
    return env;
  }
  return COLLAB_RESOURCE_DIR;
}

std::string read_resource_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("resource not found: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  if (!text.empty() && text.back() == '\n') text.pop_back();
  return text;
}

PrefixLibrary::PrefixLibrary(std::filesystem::path resource_dir, std::string version)
    : dir_(std::move(resource_dir)), version_(std::move(version)) {}

const std::vector<std::string>& PrefixLibrary::builtin_ids() {
  static const std::vector<std::string> ids{"P0", "P1", "P2", "P3", "P1C",
                                            "P2C", "A0", "A1", "A2"};
  return ids;
}

PromptPrefix PrefixLibrary::get(const std::string& id) const {
  const auto base = dir_ / "prefixes" / version_;
  constexpr std::string_view kCustom = "custom:";
  if (id.rfind(kCustom, 0) == 0) {
    const std::string name = id.substr(kCustom.size());
    if (name.empty() || name.find_first_of("/\\.") != std::string::npos)
      throw ConfigError("invalid custom prefix name: " + id);
    return {id, read_resource_text(base / "custom" / (name + ".txt"))};
  }
  const auto& ids = builtin_ids();
  if (std::find(ids.begin(), ids.end(), id) == ids.end())
    throw ConfigError("unknown prompt prefix: " + id);
  return {id, read_resource_text(base / (id + ".txt"))};
}

void HistoryWindow::truncate(int cap) {
  if (cap < 0) throw ContractViolation("history cap must be >= 0");
  if (records.size() > static_cast<std::size_t>(cap))
    records.erase(records.begin(), records.end() - cap);
}

namespace {

std::string render_round(const HistoryEntry& e, const HistoryWindow& w) {
  auto num = [](double x) { return format_number(x, NumberStyle::kDecimal); };
  std::string out = "Round " + std::to_string(e.round) + ":\n";
  if (w.auction_mode) {
    out += "- My bid: " + num(e.value) + "\n";
    if (e.won) {
      out += "- Did I win the auction: Yes\n";
      out += "- Bid that would have sufficed to win: " + num(e.reference_bid) + "\n";
      out += "- My payment: " + num(e.payment) + "\n";
    } else {
      out += "- Did I win the auction: No\n";
      out += "- Bid that won: " + num(e.reference_bid) + "\n";
    }
    out += "- My profit earned: " + num(e.profit);
    return out;
  }
  out += "- My price: " + num(e.value) + "\n";
  if (w.include_competitor) {
    if (!e.competitor_price) throw ContractViolation("history: duopoly record lacks competitor price");
    out += "- Competitor's price: " + num(*e.competitor_price) + "\n";
  }
  out += "- My quantity sold: " + num(e.quantity) + "\n";
  out += "- My profit earned: " + num(e.profit);
  return out;
}

struct Vocabulary {
  std::string_view activity;  // "pricing" / "bidding"
  std::string_view data_intro;
  std::string_view data_file;
  std::string_view value_header;
};

Vocabulary vocabulary(MarketKind kind) {
  if (kind == MarketKind::kAuction) {
    return {"bidding", "Finally I will show you the bidding data you have access to.",
            "AUCTION_DATA", headers::kChosenBid};
  }
  return {"pricing", "Finally I will show you the market data you have access to.",
          "MARKET_DATA", headers::kChosenPrice};
}

std::string fenced(std::string_view filename, std::string_view content) {
  std::string out = "Filename: ";
  out += filename;
  out += "\n";
  out += headers::kFence;
  out += "\n";
  out += content;
  out += "\n";
  out += headers::kFence;
  return out;
}

// Everything between the prefix and the response instructions.
std::string prompt_context(const AgentState& state, const HistoryWindow& window) {
  const Vocabulary v = vocabulary(state.kind);
  const std::string a(v.activity);
  std::string out;
  if (state.kind == MarketKind::kAuction) {
    out += "Item information:\n- I value the item at $" +
           format_number(state.item_value, state.value_style) + ".\n\n";
  } else {
    out += "Product information:\n- The cost I pay to produce each unit is $" +
           format_number(state.marginal_cost, state.cost_style) +
           ".\n- No customer would pay more than $" +
           format_number(state.ceiling, state.cost_style) + ".\n\n";
  }
  out += "Now let me tell you about the resources you have to help me with " + a +
         ". First, there are some files, which you wrote last time I came to you for " + a +
         " help. Here is a high-level description of what these files contain:\n";
  out += "- PLANS.txt: File where you can write your plans for what " + a +
         " strategies to test next. Be detailed and precise but keep things succinct and "
         "don't repeat yourself.\n";
  out += "- INSIGHTS.txt: File where you can write down any insights you have regarding " + a +
         " strategies. Be detailed and precise but keep things succinct and don't repeat "
         "yourself.\n\n";
  out += "Now I will show you the current content of these files.\n\n";
  out += fenced("PLANS.txt", state.plans) + "\n\n";
  out += fenced("INSIGHTS.txt", state.insights) + "\n\n";
  out += std::string(v.data_intro) + "\n";
  out += fenced(std::string(v.data_file) + " (read-only)", render_history(window));
  return out;
}

ChatRequest make_request(const AgentState& state, std::string body) {
  ChatRequest req;
  if (state.placement == PromptPlacement::kSystem) {
    req.system_text = state.prefix.text;
    req.user_text = std::move(body);
  } else {
    req.user_text = state.prefix.text + "\n\n" + body;
  }
  req.model_id = state.query.model_id;
  req.temperature = state.query.temperature;
  req.max_output = state.query.max_output;
  req.reasoning_effort = state.query.reasoning_effort;
  return req;
}

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string render_history(const HistoryWindow& window) {
  std::string out;
  const auto n = std::min<std::size_t>(window.records.size(), kHistoryCap);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& e = window.records[window.records.size() - 1 - k];
    if (k > 0) out += "\n";
    out += render_round(e, window);
  }
  return out;
}

ChatRequest assemble_prompt(const AgentState& state, const HistoryWindow& window) {
  const Vocabulary v = vocabulary(state.kind);
  std::string body = prompt_context(state, window) + "\n\n";
  body +=
      "Now you have all the necessary information to complete the task. Here is how the "
      "conversation will work. First, carefully read through the information provided. Then, "
      "fill in the following template to respond.\n\n";
  body += std::string(headers::kObservations) + "\n<fill in here>\n";
  body += std::string(headers::kPlans) + "\n<fill in here>\n";
  body += std::string(headers::kInsights) + "\n<fill in here>\n";
  body += std::string(v.value_header) + "\n<just the number, nothing else>\n\n";
  // The auction template keeps the pricing wording in its closing note.
  body +=
      "Note whatever content you write in PLANS.txt and INSIGHTS.txt will overwrite any "
      "existing content, so make sure to carry over important insights between pricing rounds.";
  return make_request(state, std::move(body));
}

ParsedDecision parse_decision(std::string_view raw, DecisionKind kind) {
  if (trim(raw).empty()) throw FormatError("empty completion");
  const std::string_view value_header =
      kind == DecisionKind::kAuction ? headers::kChosenBid : headers::kChosenPrice;
  const std::string_view order[] = {headers::kObservations, headers::kPlans, headers::kInsights,
                                    value_header};
  std::size_t pos[4];
  std::size_t from = 0;
  for (int i = 0; i < 4; ++i) {
    pos[i] = raw.find(order[i], from);
    if (pos[i] == std::string_view::npos)
      throw FormatError("missing template header \"" + std::string(order[i]) + "\"");
    from = pos[i] + order[i].size();
  }
  auto section = [&](int i) {
    const std::size_t begin = pos[i] + order[i].size();
    const std::size_t end = i + 1 < 4 ? pos[i + 1] : raw.size();
    return std::string(trim(raw.substr(begin, end - begin)));
  };

  ParsedDecision out;
  out.raw = std::string(raw);
  out.observations = section(0);
  out.new_plans = section(1);
  out.new_insights = section(2);

  // Last numeric literal after the value header; "$", thousands separators and
  // surrounding prose are ignored.
  static const std::regex number(R"((-?)\$?\s*((?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?|\.\d+))");
  const std::string tail = section(3);
  std::smatch last;
  bool found = false;
  for (auto it = std::sregex_iterator(tail.begin(), tail.end(), number);
       it != std::sregex_iterator(); ++it) {
    last = *it;
    found = true;
  }
  if (!found) throw FormatError("no number after \"" + std::string(value_header) + "\"");
  std::string digits = last[2].str();
  digits.erase(std::remove(digits.begin(), digits.end(), ','), digits.end());
  const double value = std::strtod(digits.c_str(), nullptr);
  if (!last[1].str().empty() && value != 0.0) throw FormatError("negative decision value");
  if (!std::isfinite(value)) throw FormatError("non-finite decision value");
  out.value = round_cents(value);
  return out;
}

DecisionResult decide(const AgentState& state, const HistoryWindow& window, Gateway& gateway,
                      const RequestTag& tag, int retry_limit) {
  if (retry_limit < 1) throw ContractViolation("decide: retry_limit must be >= 1");
  DecisionResult result;
  result.request = assemble_prompt(state, window);
  for (int attempt = 0; attempt < retry_limit; ++attempt) {
    ChatRequest req = result.request;
    req.tag = tag;
    req.tag.attempt = attempt;
    ChatResponse resp = gateway.chat(req);
    try {
      result.decision = parse_decision(resp.text, decision_kind(state.kind));
    } catch (const FormatError&) {
      result.rejected.push_back(std::move(resp.text));
      continue;
    }
    result.retries = attempt;
    result.ceiling_exceeded = state.kind != MarketKind::kAuction && state.ceiling > 0.0 &&
                              result.decision.value > state.ceiling;
    return result;
  }
  throw RunAbort("agent " + std::to_string(tag.agent) + " produced " +
                     std::to_string(retry_limit) + " malformed completions in period " +
                     std::to_string(tag.period),
                 tag.period, tag.agent);
}

AgentState next_state(AgentState state, const ParsedDecision& decision) {
  state.plans = decision.new_plans;
  state.insights = decision.new_insights;
  if (state.memory_mode == MemoryMode::kNoPlans || state.memory_mode == MemoryMode::kNoMemory)
    state.plans.clear();
  if (state.memory_mode == MemoryMode::kNoInsights || state.memory_mode == MemoryMode::kNoMemory)
    state.insights.clear();
  return state;
}

std::vector<std::string> ask_one_shot(const AgentState& state, std::string_view question,
                                      Gateway& gateway, int samples, const RequestTag& tag) {
  if (samples < 0) throw ContractViolation("ask_one_shot: negative sample count");
  if (!state.plans.empty() || !state.insights.empty())
    throw ContractViolation("ask_one_shot: agent state must be fresh");
  std::vector<std::string> answers;
  if (samples == 0) return answers;
  HistoryWindow empty;
  empty.include_competitor = state.kind == MarketKind::kDuopoly;
  empty.auction_mode = state.kind == MarketKind::kAuction;
  ChatRequest base = make_request(state, prompt_context(state, empty) + "\n\n" + std::string(question));
  for (int i = 0; i < samples; ++i) {
    ChatRequest req = base;
    req.tag = tag;
    req.tag.attempt = i;
    answers.push_back(gateway.chat(req).text);
  }
  return answers;
}

std::optional<std::string> extract_prompt_block(std::string_view prompt, std::string_view filename) {
  const std::string key = "Filename: " + std::string(filename);
  std::size_t at = 0;
  while ((at = prompt.find(key, at)) != std::string_view::npos) {
    const std::size_t eol = prompt.find('\n', at);
    if (eol == std::string_view::npos) return std::nullopt;
    // Accept "Filename: NAME" and "Filename: NAME (read-only)" but not a
    // longer name sharing the prefix.
    const auto rest = prompt.substr(at + key.size(), eol - at - key.size());
    if (!rest.empty() && rest.front() != ' ') {
      at = eol;
      continue;
    }
    const std::string open = std::string(headers::kFence) + "\n";
    if (prompt.substr(eol + 1, open.size()) != open) return std::nullopt;
    const std::size_t begin = eol + 1 + open.size();
    const std::string close = "\n" + std::string(headers::kFence);
    const std::size_t end = prompt.find(close, begin);
    if (end == std::string_view::npos) return std::nullopt;
    return std::string(prompt.substr(begin, end - begin));
  }
  return std::nullopt;
}

}  // namespace collab
