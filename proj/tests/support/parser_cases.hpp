#pragma once

#include <optional>
#include <string>
#include <vector>

// Completions paired with the value the parser must extract; nullopt means
// the completion must be rejected.
struct ParserCase {
  std::string name;
  std::string raw;
  std::optional<double> value;
  bool auction = false;
};

inline std::string completion(const std::string& tail, const std::string& header = "My chosen price:") {
  return "My observations and thoughts:\nProfits rose.\nNew content for PLANS.txt:\nHold at 1.8.\n"
         "New content for INSIGHTS.txt:\nDemand is elastic.\n" +
         header + "\n" + tail;
}

inline std::vector<ParserCase> parser_cases() {
  return {
      {"bare number", completion("1.85"), 1.85},
      {"integer", completion("2"), 2.0},
      {"dollar sign", completion("$1.75"), 1.75},
      {"dollar with space", completion("$ 1.75"), 1.75},
      {"prose wrapped", completion("I will set the price at 1.9 this round."), 1.9},
      {"prose then dollar", completion("Set it to $2.05 for now"), 2.05},
      {"trailing period", completion("1.60."), 1.6},
      {"thousands separator", completion("$1,250.50"), 1250.5},
      {"leading dot", completion(".95"), 0.95},
      {"rounded to cents", completion("1.8349"), 1.83},
      {"last number wins", completion("Between 1.5 and 1.7, I choose 1.65"), 1.65},
      {"crlf line endings",
       "My observations and thoughts:\r\nx\r\nNew content for PLANS.txt:\r\ny\r\n"
       "New content for INSIGHTS.txt:\r\nz\r\nMy chosen price:\r\n1.72\r\n",
       1.72},
      {"markdown bold", completion("**1.99**"), 1.99},
      {"bid header", completion("0.45", "My chosen bid:"), 0.45, true},
      {"zero bid", completion("0", "My chosen bid:"), 0.0, true},
      {"missing plans header",
       "My observations and thoughts:\nx\nNew content for INSIGHTS.txt:\nz\nMy chosen price:\n1.5", std::nullopt},
      {"missing price header", "My observations and thoughts:\nx\nNew content for PLANS.txt:\ny\n"
                               "New content for INSIGHTS.txt:\nz\n1.5",
       std::nullopt},
      {"no number", completion("I am not sure."), std::nullopt},
      {"negative price", completion("-1.5"), std::nullopt},
      {"price header in auction", completion("0.45"), std::nullopt, true},
  };
}
