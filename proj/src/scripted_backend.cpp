#include "collab/scripted.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <regex>

#include "collab/agent.hpp"
#include "collab/equilibrium.hpp"
#include "collab/rng.hpp"

namespace collab {

std::string to_string(ScriptedStrategy strategy) {
  switch (strategy) {
    case ScriptedStrategy::kFixedPrice: return "fixed-price";
    case ScriptedStrategy::kMyopicBestResponse: return "myopic-best-response";
    case ScriptedStrategy::kTitForTatBand: return "tit-for-tat-band";
    case ScriptedStrategy::kPlanEcho: return "plan-echo";
  }
  return "fixed-price";
}

namespace {

std::vector<std::string> split_colon(std::string_view s) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto at = s.find(':', start);
    parts.emplace_back(s.substr(start, at - start));
    if (at == std::string_view::npos) break;
    start = at + 1;
  }
  return parts;
}

double parse_param(const std::string& text, std::string_view spec) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size() || !std::isfinite(v)) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad scripted parameter \"" + text + "\" in " + std::string(spec));
  }
}

std::optional<double> number_after(const std::string& text, const std::string& label) {
  const auto at = text.find(label);
  if (at == std::string::npos) return std::nullopt;
  return std::strtod(text.c_str() + at + label.size(), nullptr);
}

std::string fmt2(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", round_cents(x));
  return buf;
}

}  // namespace

ScriptedConfig parse_scripted_spec(std::string_view spec) {
  const auto parts = split_colon(spec);
  ScriptedConfig cfg;
  const std::string& name = parts[0];
  auto expect = [&](std::size_t lo, std::size_t hi) {
    if (parts.size() < lo || parts.size() > hi)
      throw ConfigError("wrong number of parameters for scripted strategy: " + std::string(spec));
  };
  if (name == "fixed-price") {
    expect(1, 2);
    cfg.strategy = ScriptedStrategy::kFixedPrice;
    if (parts.size() == 2) cfg.price = parse_param(parts[1], spec);
  } else if (name == "myopic" || name == "myopic-best-response") {
    expect(1, 2);
    cfg.strategy = ScriptedStrategy::kMyopicBestResponse;
    if (parts.size() == 2) cfg.price = parse_param(parts[1], spec);
  } else if (name == "tit-for-tat-band") {
    expect(1, 3);
    cfg.strategy = ScriptedStrategy::kTitForTatBand;
    if (parts.size() >= 2) cfg.band_low = parse_param(parts[1], spec);
    if (parts.size() == 3) cfg.band_high = parse_param(parts[2], spec);
    if (cfg.band_low > cfg.band_high) throw ConfigError("tit-for-tat-band: low > high");
  } else if (name == "plan-echo") {
    expect(1, 2);
    cfg.strategy = ScriptedStrategy::kPlanEcho;
    if (parts.size() == 2) cfg.price = parse_param(parts[1], spec);
  } else {
    throw ConfigError("unknown scripted strategy: " + std::string(spec));
  }
  return cfg;
}

ScriptedBackend::ScriptedBackend(ScriptedConfig config) : config_(std::move(config)) {
  config_.market.validate();
  if (config_.fail_attempts < 0) throw ConfigError("scripted: fail_attempts must be >= 0");
  if (config_.jitter < 0.0) throw ConfigError("scripted: jitter must be >= 0");
}

ChatResponse ScriptedBackend::chat(const ChatRequest& request) {
  request.validate();
  ChatResponse out;
  const std::string text = request.full_text();

  if (request.system_text && request.system_text->rfind("Below is a list of sentences", 0) == 0) {
    int k = 0;
    std::size_t at = 0;
    const std::string& u = request.user_text;
    while (at < u.size()) {
      if (u.compare(at, 2, "- ") == 0) ++k;
      at = u.find('\n', at);
      if (at == std::string::npos) break;
      ++at;
    }
    out.text = "[summary of " + std::to_string(k) + " sentences]";
    return out;
  }
  if (text.find(headers::kObservations) == std::string::npos) {
    out.text = config_.one_shot_answer;
    return out;
  }
  if (request.tag.attempt < config_.fail_attempts) {
    out.text = "I am not able to follow the template this time.";
    return out;
  }

  const bool auction = text.find("Filename: AUCTION_DATA") != std::string::npos;
  const auto data = extract_prompt_block(text, auction ? "AUCTION_DATA" : "MARKET_DATA");
  const std::string history = data.value_or("");
  const auto plans = extract_prompt_block(text, "PLANS.txt").value_or("");

  const Eigen::Index firm =
      std::clamp<Eigen::Index>(request.tag.agent, 0, config_.market.firms() - 1);
  double scale = 1.0;
  if (auction) {
    if (auto v = number_after(text, "I value the item at $")) scale = *v;
  } else if (auto c = number_after(text, "The cost I pay to produce each unit is $")) {
    scale = *c / config_.market.cost(firm);
  }
  if (!(scale > 0.0)) throw ContractViolation("scripted: cannot infer currency scale from prompt");

  const auto own_prev = number_after(history, auction ? "- My bid: " : "- My price: ");
  const auto rival_prev = auction ? std::optional<double>{}
                                  : number_after(history, "- Competitor's price: ");
  double choice = config_.price * scale;
  std::string plan = "Continue with the " + to_string(config_.strategy) + " rule.";

  switch (config_.strategy) {
    case ScriptedStrategy::kFixedPrice:
      break;
    case ScriptedStrategy::kMyopicBestResponse:
      if (auction) {
        // Outbid the last observed competing bid by a cent, never above value.
        choice = std::min(scale, choice);
        if (auto ref = number_after(history, "- Bid that won: ")) {
          choice = std::min(scale, *ref + 0.01);
        } else if (auto suff = number_after(history, "- Bid that would have sufficed to win: ")) {
          choice = std::min(scale, *suff + 0.01);
        }
      } else if (rival_prev || (!own_prev && config_.market.firms() == 1)) {
        const MarketParams params = config_.market.with_alpha(scale);
        if (rival_prev) {
          Eigen::VectorXd prices = Eigen::VectorXd::Constant(params.firms(), *rival_prev);
          choice = best_response(prices, firm, params).price;
        } else {
          choice = single_monopoly_price(params, firm).price;
        }
      } else if (own_prev) {
        choice = single_monopoly_price(config_.market.with_alpha(scale), firm).price;
      }
      break;
    case ScriptedStrategy::kTitForTatBand:
      if (rival_prev) {
        choice = std::clamp(*rival_prev, config_.band_low * scale, config_.band_high * scale);
      }
      break;
    case ScriptedStrategy::kPlanEcho: {
      if (own_prev) choice = *own_prev;
      static const std::regex raise(R"(RAISE([+-]\d+(?:\.\d+)?))");
      std::smatch m;
      if (std::regex_search(plans, m, raise)) choice += std::stod(m[1].str());
      plan = "Hold the current price.";
      break;
    }
  }

  if (config_.jitter > 0.0) {
    std::uint64_t h = fnv1a(request.tag.run_id);
    h = derive_seed(config_.seed ^ h, (static_cast<std::uint64_t>(request.tag.agent) << 32) ^
                                          static_cast<std::uint64_t>(request.tag.period));
    Rng rng(h);
    choice += rng.uniform(-config_.jitter, config_.jitter) * scale;
  }
  choice = std::max(0.0, choice);

  out.text = std::string(headers::kObservations) + "\nScripted " + to_string(config_.strategy) +
             " agent; " + (history.empty() ? "no data yet." : "reading the latest round.") +
             "\n" + std::string(headers::kPlans) + "\n" + plan + "\n" +
             std::string(headers::kInsights) + "\nNo new insights.\n" +
             std::string(auction ? headers::kChosenBid : headers::kChosenPrice) + "\n" +
             fmt2(choice);
  return out;
}

}  // namespace collab
