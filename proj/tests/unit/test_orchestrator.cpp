#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <set>

#include "collab/equilibrium.hpp"
#include "collab/orchestrator.hpp"
#include "scripted_runs.hpp"

using namespace collab;
using nlohmann::json;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("collab_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("grid expansion") {
  ExperimentConfig c = duopoly_grid(10, {1, 3.2, 10}, 7, {{"P1", "P1"}, {"P2", "P2"}});
  const auto runs = expand_grid(c);
  CHECK(runs.size() == 42);
  std::set<std::string> ids;
  std::set<std::uint64_t> seeds;
  for (const auto& r : runs) {
    ids.insert(r.run_id);
    seeds.insert(r.seed);
  }
  CHECK(ids.size() == 42);
  CHECK(seeds.size() == 42);
  CHECK(ids.count("duopoly-a3p2-P1-P1-r00") == 1);
  CHECK(runs.front().market.alpha == 1.0);
  CHECK(expand_grid(c)[5].seed == runs[5].seed);
}

TEST_CASE("config validation") {
  ExperimentConfig c = duopoly_grid(10, {1}, 1, {{"P1"}});
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = duopoly_grid(0, {1}, 1);
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = duopoly_grid(5, {-1}, 1);
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = duopoly_grid(5, {1}, 1);
  c.ceiling_multiplier = 3.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("config JSON is strict") {
  json j = to_json(duopoly_grid(5, {1}, 1));
  CHECK(experiment_config_from_json(j).periods == 5);
  j["surprise"] = 1;
  CHECK_THROWS_AS(experiment_config_from_json(j), ConfigError);
  j.erase("surprise");
  j["schema_version"] = 2;
  CHECK_THROWS_AS(experiment_config_from_json(j), ConfigError);
  const json m = {{"schema_version", 1}, {"environment", "monopoly"}};
  const ExperimentConfig mono = experiment_config_from_json(m);
  CHECK(mono.prefix_sets == std::vector<std::vector<std::string>>{{"P1"}});
}

TEST_CASE("myopic best responders reach Nash") {
  ScriptedHarness h(scripted(ScriptedStrategy::kMyopicBestResponse));
  for (double alpha : {1.0, 3.2, 10.0}) {
    const auto cfg = expand_grid(duopoly_grid(50, {alpha}, 1)).front();
    const RunLog log = h.orchestrator.run(cfg);
    const double nash = nash_prices(cfg.market)(0);
    CHECK(log.records.size() == 50);
    for (int i = 0; i < 2; ++i) CHECK(std::abs(log.records.back().agents[i].value - nash) <= 0.01 * nash);
  }
}

TEST_CASE("fixed monopoly price earns the monopoly profit") {
  const double pm = joint_monopoly_prices(MarketParams::benchmark())(0);
  ScriptedHarness h(scripted(ScriptedStrategy::kFixedPrice, pm));
  for (double alpha : {1.0, 3.2, 10.0}) {
    const RunLog log = h.orchestrator.run(expand_grid(duopoly_grid(5, {alpha}, 1)).front());
    for (const auto& r : log.records) {
      for (const auto& a : r.agents) CHECK(std::abs(a.profit - 33.75 * alpha) <= 0.01 * alpha + 0.005);
    }
  }
}

TEST_CASE("ceiling is scaled and recorded") {
  ScriptedHarness h(scripted(ScriptedStrategy::kFixedPrice, 5.0));
  const RunLog log = h.orchestrator.run(expand_grid(duopoly_grid(3, {1}, 1)).front());
  CHECK(log.ceiling == doctest::Approx(4.50));
  CHECK(log.records[0].agents[0].ceiling_exceeded);
  const RunLog log10 = h.orchestrator.run(expand_grid(duopoly_grid(3, {10}, 1)).front());
  CHECK(log10.ceiling == doctest::Approx(45.04));
}

TEST_CASE("restoring without overrides reproduces every period") {
  ScriptedConfig sc = scripted(ScriptedStrategy::kMyopicBestResponse);
  sc.jitter = 0.05;
  ScriptedHarness h(sc);
  ExperimentConfig ec = duopoly_grid(30, {3.2}, 1);
  ec.shock.enabled = true;
  const RunLog log = h.orchestrator.run(expand_grid(ec).front());
  for (int t = 1; t <= 30; ++t) {
    const PeriodRecord again = h.orchestrator.restore_and_step(log.snapshot_at(t));
    CHECK(again == log.records[t - 1]);
  }
}

TEST_CASE("tampered snapshots are rejected") {
  ScriptedHarness h(scripted(ScriptedStrategy::kFixedPrice));
  const RunLog log = h.orchestrator.run(expand_grid(duopoly_grid(5, {1}, 1)).front());
  RunSnapshot s = log.snapshot_at(3);
  s.core.agents[0].plans = "edited";
  CHECK_THROWS_AS(h.orchestrator.restore_and_step(s), IntegrityError);
  RunSnapshot s2 = log.snapshot_at(3);
  s2.history[0].agents[0].value += 0.01;
  CHECK_THROWS_AS(h.orchestrator.restore_and_step(s2), IntegrityError);
  CHECK_THROWS_AS(log.snapshot_at(9), IntegrityError);
  Overrides bad{{5, StateOverride{}}};
  CHECK_THROWS_AS(h.orchestrator.restore_and_step(log.snapshot_at(2), bad), ContractViolation);
}

TEST_CASE("plan overrides change the next decision") {
  ScriptedHarness h(scripted(ScriptedStrategy::kPlanEcho, 1.8));
  const RunLog log = h.orchestrator.run(expand_grid(duopoly_grid(4, {1}, 1)).front());
  Overrides o{{1, StateOverride{std::string("RAISE+0.30"), std::string(), std::nullopt}}};
  const PeriodRecord r = h.orchestrator.restore_and_step(log.snapshot_at(3), o);
  CHECK(r.agents[1].value == doctest::Approx(log.records[2].agents[1].value + 0.30));
  CHECK(r.agents[0].value == log.records[2].agents[0].value);
}

TEST_CASE("implantation record count and scripted delta") {
  ScriptedHarness h(scripted(ScriptedStrategy::kPlanEcho, 1.8));
  const auto logs = h.orchestrator.grid(expand_grid(duopoly_grid(14, {1, 3.2}, 2)), 1);
  const std::vector<std::string> sentences{"Avoid a price war. RAISE+0.20", "Undercut. RAISE-0.10"};
  const ImplantResult r = implant(h.orchestrator, logs, {2, 3, 4, 13}, {0, 1}, sentences);
  CHECK(r.errors.empty());
  CHECK(r.records.size() == sentences.size() * logs.size() * 2 * 4);
  for (const auto& rec : r.records) {
    const double expect = (rec.sentence_index == 0 ? 0.20 : -0.10) / rec.scale;
    CHECK(rec.delta == doctest::Approx(expect).epsilon(1e-9));
  }
  const ImplantResult missing = implant(h.orchestrator, logs, {40}, {0}, {"x"});
  CHECK(missing.records.empty());
  CHECK(missing.errors.size() == logs.size());
}

TEST_CASE("ten malformed completions abort the run") {
  ScriptedConfig sc = scripted(ScriptedStrategy::kFixedPrice);
  sc.fail_attempts = 10;
  ScriptedHarness h(sc);
  const RunLog log = h.orchestrator.run(expand_grid(duopoly_grid(5, {1}, 1)).front());
  REQUIRE(log.aborted.has_value());
  CHECK(log.aborted->period == 1);
  CHECK(log.records.empty());

  sc.fail_attempts = 3;
  ScriptedHarness ok(sc);
  const RunLog fine = ok.orchestrator.run(expand_grid(duopoly_grid(2, {1}, 1)).front());
  CHECK_FALSE(fine.aborted.has_value());
  CHECK(fine.records[0].agents[0].retries == 3);
}

TEST_CASE("run store round trip") {
  const auto dir = temp_dir("store");
  ScriptedHarness h(scripted(ScriptedStrategy::kMyopicBestResponse));
  auto cfgs = expand_grid(duopoly_grid(6, {1, 10}, 1));
  for (auto& c : cfgs) c.record_prompts = true;
  const auto logs = h.orchestrator.grid(cfgs, 2, &dir);
  const auto loaded = load_runs(dir);
  REQUIRE(loaded.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(loaded[i].records == logs[i].records);
    CHECK(loaded[i].ceiling == logs[i].ceiling);
    CHECK(loaded[i].snapshots.size() == logs[i].snapshots.size());
    CHECK(loaded[i].records[0].agents[0].prompt.has_value());
    const PeriodRecord again = h.orchestrator.restore_and_step(loaded[i].snapshot_at(4));
    CHECK(again == logs[i].records[3]);
  }
  CHECK(std::filesystem::exists(dir / "manifest.json"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("monopoly and auction environments") {
  ScriptedHarness h(scripted(ScriptedStrategy::kMyopicBestResponse));
  ExperimentConfig m;
  m.environment = MarketKind::kMonopoly;
  m.periods = 4;
  m.prefix_sets = {{"P1"}};
  m.scales = {1};
  const RunLog mono = h.orchestrator.run(expand_grid(m).front());
  CHECK(mono.records[0].agents.size() == 1);
  CHECK(mono.records[1].agents[0].value == doctest::Approx(1.80));

  ExperimentConfig a;
  a.environment = MarketKind::kAuction;
  a.periods = 6;
  a.prefix_sets = {{"A1", "A2"}};
  a.scales = {1};
  const RunLog auc = h.orchestrator.run(expand_grid(a).front());
  CHECK(auc.config.placement == PromptPlacement::kSystem);
  for (const auto& r : auc.records) {
    CHECK(r.agents[0].won != r.agents[1].won);
    for (const auto& ag : r.agents) CHECK(ag.value <= 1.0);
  }
}

TEST_CASE("history window follows the run") {
  ScriptedHarness h(scripted(ScriptedStrategy::kFixedPrice));
  RunConfig cfg = expand_grid(duopoly_grid(8, {1}, 1)).front();
  cfg.history_cap = 3;
  const RunLog log = h.orchestrator.run(cfg);
  const HistoryWindow w = history_for(cfg, log.records, 7, 1);
  CHECK(w.records.size() == 3);
  CHECK(w.records.back().round == 7);
  CHECK(*w.records.back().competitor_price == log.records[6].agents[0].value);
}
