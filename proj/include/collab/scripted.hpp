#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "collab/gateway.hpp"
#include "collab/market.hpp"

namespace collab {

enum class ScriptedStrategy { kFixedPrice, kMyopicBestResponse, kTitForTatBand, kPlanEcho };

std::string to_string(ScriptedStrategy strategy);

// Prices are in alpha = 1 units; the backend reads the displayed marginal cost
// from the prompt and scales by alpha = cost / market.cost[agent]. In auction
// prompts the scale is the displayed item value.
struct ScriptedConfig {
  ScriptedStrategy strategy = ScriptedStrategy::kFixedPrice;
  double price = 2.0;          // fixed-price level; opening price for the others
  double band_low = 1.0;       // tit-for-tat-band clamp
  double band_high = 2.5;
  double jitter = 0.0;         // uniform noise half-width added to the choice
  std::uint64_t seed = 0;
  int fail_attempts = 0;       // attempts 0..n-1 of every query return garbage
  std::string one_shot_answer = "Yes";
  MarketParams market = MarketParams::benchmark();
};

// "fixed-price:2.00", "myopic", "myopic-best-response", "tit-for-tat-band:1.5:2.0",
// "plan-echo". Throws ConfigError otherwise.
ScriptedConfig parse_scripted_spec(std::string_view spec);

// Deterministic stand-in for a chat model. The reply depends only on the
// request text, its tag and the configuration, so it is safe to share.
class ScriptedBackend : public ChatBackend {
 public:
  explicit ScriptedBackend(ScriptedConfig config);

  ChatResponse chat(const ChatRequest& request) override;
  const ScriptedConfig& config() const noexcept { return config_; }

 private:
  ScriptedConfig config_;
};

// Token recognized by plan-echo in the PLANS block: "RAISE+0.10" or "RAISE-0.05".
inline constexpr std::string_view kRaiseToken = "RAISE";

}  // namespace collab
