#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "collab/agent.hpp"
#include "collab/gateway.hpp"
#include "collab/market.hpp"

namespace collab {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitAbort = 3,
  kExitFixture = 4,
};

// Entry point behind the `collab` executable.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Replays chat completions keyed by the exact request text. Sources are JSONL
// files of {"prompt", "text"} objects or run directories whose records carry
// prompts.
class FixtureChatBackend : public ChatBackend {
 public:
  FixtureChatBackend() = default;
  static FixtureChatBackend load(const std::filesystem::path& path);

  void add(std::string prompt, std::string text);
  ChatResponse chat(const ChatRequest& request) override;
  std::size_t size() const { return replies_.size(); }

 private:
  std::map<std::string, std::string> replies_;
};

struct BackendOptions {
  std::string spec = "scripted:myopic";  // live | scripted:<strategy>[:params] | fixture
  std::string api_key_env{kDefaultApiKeyEnv};
  std::string model;
  std::string base_url;
  std::string transcripts;  // fixture chat source
  MarketParams market = MarketParams::benchmark();
};

std::shared_ptr<ChatBackend> make_chat_backend(const BackendOptions& options);

// Golden prompt fixtures: <name>.json (state and history) and <name>.txt
// (expected text) under fixtures/prompts.
struct PromptFixture {
  std::string name;
  AgentState state;
  HistoryWindow window;
  PromptPlacement required_placement = PromptPlacement::kUserConcatenated;
  std::string expected;
};

std::vector<std::string> prompt_fixture_names(const std::filesystem::path& resource_dir);
PromptFixture load_prompt_fixture(const std::filesystem::path& resource_dir, const std::string& name);

struct PromptCheck {
  std::string name;
  bool ok = false;
  std::string message;
};

// Assembles the fixture prompt and compares it byte for byte. A forced
// placement replaces the fixture's own one (used to probe the placement rule).
PromptCheck check_prompt_fixture(const PromptFixture& fixture,
                                 std::optional<PromptPlacement> force_placement = {});

std::vector<PromptCheck> validate_prompts(const std::filesystem::path& resource_dir);

}  // namespace collab
