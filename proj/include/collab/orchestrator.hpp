#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "collab/agent.hpp"
#include "collab/equilibrium.hpp"
#include "collab/gateway.hpp"
#include "collab/market.hpp"

namespace collab {

inline constexpr int kConfigSchemaVersion = 1;

// One grid of experiments. `scales` is the alpha grid for pricing markets and
// the item-value grid for auctions; `market` is given in alpha = 1 units.
struct ExperimentConfig {
  MarketKind environment = MarketKind::kDuopoly;
  int periods = 300;
  MarketParams market = MarketParams::benchmark();
  AuctionParams auction;
  // Each entry assigns one prefix id per agent; every entry is a grid cell.
  std::vector<std::vector<std::string>> prefix_sets{{"P1", "P1"}};
  std::vector<MemoryMode> memory_modes{MemoryMode::kFull};  // one, or one per agent
  std::optional<PromptPlacement> placement;                 // default by environment
  ShockConfig shock;
  double ceiling_multiplier = kDefaultCeilingMultiplier;
  bool resample_ceiling = false;
  std::uint64_t seed = 0;
  int runs_per_cell = 1;
  std::vector<double> scales{1.0, 3.2, 10.0};
  QueryOptions query;
  int history_cap = kHistoryCap;
  std::string prefix_version = "v1";
  bool record_prompts = false;

  int agents() const;
  void validate() const;
};

// A single run, fully specified.
struct RunConfig {
  std::string run_id;
  MarketKind environment = MarketKind::kDuopoly;
  int periods = 300;
  MarketParams market;  // alpha applied
  AuctionParams auction;
  std::vector<std::string> prefixes;
  std::vector<MemoryMode> memory_modes;  // one per agent
  PromptPlacement placement = PromptPlacement::kUserConcatenated;
  ShockConfig shock;
  double ceiling_multiplier = kDefaultCeilingMultiplier;
  bool resample_ceiling = false;
  std::uint64_t seed = 0;
  QueryOptions query;
  int history_cap = kHistoryCap;
  std::string prefix_version = "v1";
  bool record_prompts = false;
  double scale = 1.0;  // alpha, or item value for auctions
  int rep = 0;

  int agents() const { return static_cast<int>(prefixes.size()); }
  void validate() const;
};

// scale grid x prefix sets x repetitions, each with an independent derived seed.
std::vector<RunConfig> expand_grid(const ExperimentConfig& config);

struct AgentRecord {
  double value = 0.0;  // price or bid, rounded to cents
  double quantity = 0.0;
  double profit = 0.0;
  std::string observations;
  std::string plans;
  std::string insights;
  std::string raw;
  int retries = 0;
  bool ceiling_exceeded = false;
  // Auction feedback.
  bool won = false;
  double reference_bid = 0.0;
  double payment = 0.0;
  std::optional<std::string> prompt;  // full request text, when recorded

  friend bool operator==(const AgentRecord&, const AgentRecord&) = default;
};

struct PeriodRecord {
  int period = 0;
  std::vector<AgentRecord> agents;
  double realized_a0 = 0.0;
  std::string timestamp;  // informational; excluded from equality

  friend bool operator==(const PeriodRecord& a, const PeriodRecord& b) {
    return a.period == b.period && a.agents == b.agents && a.realized_a0 == b.realized_a0;
  }
};

// Agent memories and randomness at the start of `period`. The record history
// is kept once per run and referenced by count and digest.
struct SnapshotCore {
  int period = 1;
  std::vector<AgentState> agents;
  std::string rng_state;
  double ceiling = 0.0;
  std::size_t record_count = 0;
  std::uint64_t records_digest = 0;
  std::uint64_t digest = 0;  // over every field above
};

struct RunSnapshot {
  RunConfig config;
  SnapshotCore core;
  std::vector<PeriodRecord> history;  // records of periods < core.period
};

struct AbortInfo {
  int period = 0;
  int agent = 0;
  std::string message;
};

struct RunLog {
  RunConfig config;
  double ceiling = 0.0;
  std::vector<PeriodRecord> records;
  std::vector<SnapshotCore> snapshots;  // snapshots[t - 1] is the start of period t
  std::optional<AbortInfo> aborted;

  bool has_snapshot(int period) const;
  RunSnapshot snapshot_at(int period) const;
};

std::uint64_t digest_records(const std::vector<PeriodRecord>& records, std::size_t count);
std::uint64_t digest_core(const SnapshotCore& core);

struct StateOverride {
  std::optional<std::string> plans;
  std::optional<std::string> insights;
  std::optional<PromptPrefix> prefix;
};

using Overrides = std::map<int, StateOverride>;  // keyed by agent index

class RunStore;

class Orchestrator {
 public:
  explicit Orchestrator(Gateway& gateway, PrefixLibrary prefixes = PrefixLibrary());

  // Initial agent memories, ceiling and randomness for period 1.
  RunSnapshot initial_snapshot(const RunConfig& config) const;

  // Full run. Aborts are recorded in the log rather than thrown. When `store`
  // is given, the header, every record and every snapshot are persisted as the
  // run progresses.
  RunLog run(const RunConfig& config, RunStore* store = nullptr);

  // Executes exactly the snapshot's period. Throws IntegrityError when the
  // snapshot does not match its digest.
  PeriodRecord restore_and_step(const RunSnapshot& snapshot, const Overrides& overrides = {});

  // Runs every config, at most `parallel` at a time. Failures are captured in
  // the corresponding log's abort marker.
  std::vector<RunLog> grid(const std::vector<RunConfig>& configs, int parallel = 1,
                           const std::filesystem::path* out_dir = nullptr);

  Gateway& gateway() noexcept { return gateway_; }
  const PrefixLibrary& prefixes() const noexcept { return prefixes_; }

 private:
  struct StepResult {
    PeriodRecord record;
    std::vector<AgentState> next_agents;
    std::string next_rng_state;
  };
  StepResult step(const RunConfig& config, const SnapshotCore& core,
                  const std::vector<PeriodRecord>& history);

  Gateway& gateway_;
  PrefixLibrary prefixes_;
};

// Agent i's view of the records: own value, competitor price (duopoly), etc.
HistoryWindow history_for(const RunConfig& config, const std::vector<PeriodRecord>& records,
                          std::size_t count, int agent);

struct CounterfactualRecord {
  std::string run_id;
  std::string prefix_id;
  int period = 0;
  int agent = 0;
  int sentence_index = 0;
  std::string sentence;
  double original = 0.0;
  double counterfactual = 0.0;
  double scale = 1.0;
  double delta = 0.0;  // (counterfactual - original) / scale
};

struct ImplantError {
  std::string run_id;
  int period = 0;
  int agent = 0;
  int sentence_index = 0;
  std::string message;
};

struct ImplantResult {
  std::vector<CounterfactualRecord> records;
  std::vector<ImplantError> errors;
};

// For every (sentence, run, agent, period): restore the start of the period,
// replace the agent's plans with the sentence, erase its insights, and query
// that agent once.
ImplantResult implant(Orchestrator& orchestrator, const std::vector<RunLog>& logs,
                      const std::vector<int>& periods, const std::vector<int>& agents,
                      const std::vector<std::string>& sentences);

// Built-in sentence sets: "price-war", "undercut", "avoid-reference",
// "start-reference", "classifier-avoid", "classifier-start".
std::vector<std::string> load_sentence_set(const std::string& name,
                                           const std::filesystem::path& resource_dir =
                                               default_resource_dir());

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PeriodRecord& record);
PeriodRecord period_record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AgentState& state);
AgentState agent_state_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SnapshotCore& core);
SnapshotCore snapshot_core_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& config);
// Rejects unknown keys and schema versions other than kConfigSchemaVersion.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

// On-disk layout below a root directory:
//   runs/<run_id>/log.jsonl          header, period records, optional abort marker
//   runs/<run_id>/snapshots/tNNNN.json
//   manifest.json
class RunStore {
 public:
  RunStore(std::filesystem::path root, std::string run_id);

  void write_header(const RunConfig& config, double ceiling, const nlohmann::json& fixtures);
  void append(const PeriodRecord& record);
  void write_snapshot(const SnapshotCore& core);
  void write_abort(const AbortInfo& abort);

  const std::filesystem::path& run_dir() const noexcept { return dir_; }

 private:
  std::filesystem::path dir_;
};

RunLog load_run(const std::filesystem::path& run_dir);
std::vector<RunLog> load_runs(const std::filesystem::path& root);

void write_manifest(const std::filesystem::path& root, const std::vector<RunLog>& logs);

}  // namespace collab
