#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <set>

#include "collab/orchestrator.hpp"

namespace collab {

using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items()) {
    if (!ok.count(key)) throw ConfigError(where + ": unknown key \"" + key + "\"");
  }
}

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json market_json(const MarketParams& m) {
  return {{"alpha", m.alpha}, {"beta", m.beta},  {"mu", m.mu},
          {"a0", m.a0},       {"quality", vec_json(m.quality)}, {"cost", vec_json(m.cost)}};
}

MarketParams market_from(const json& j, bool allow_alpha, const std::string& where) {
  if (allow_alpha) {
    check_keys(j, {"alpha", "beta", "mu", "a0", "quality", "cost"}, where);
  } else {
    check_keys(j, {"beta", "mu", "a0", "quality", "cost"}, where);
  }
  MarketParams m = MarketParams::benchmark();
  m.alpha = j.value("alpha", m.alpha);
  m.beta = j.value("beta", m.beta);
  m.mu = j.value("mu", m.mu);
  m.a0 = j.value("a0", m.a0);
  if (j.contains("quality")) m.quality = vec_from(j["quality"]);
  if (j.contains("cost")) m.cost = vec_from(j["cost"]);
  return m;
}

json auction_json(const AuctionParams& a) { return {{"value", a.value}, {"bidders", a.bidders}}; }

AuctionParams auction_from(const json& j, const std::string& where) {
  check_keys(j, {"value", "bidders"}, where);
  AuctionParams a;
  a.value = j.value("value", a.value);
  a.bidders = j.value("bidders", a.bidders);
  return a;
}

json shock_json(const ShockConfig& s) { return {{"enabled", s.enabled}, {"offsets", s.offsets}}; }

ShockConfig shock_from(const json& j, const std::string& where) {
  check_keys(j, {"enabled", "offsets"}, where);
  ShockConfig s;
  s.enabled = j.value("enabled", s.enabled);
  if (j.contains("offsets")) s.offsets = j["offsets"].get<std::vector<double>>();
  return s;
}

json query_json(const QueryOptions& q) {
  json j = {{"model_id", q.model_id}, {"temperature", q.temperature}, {"max_output", q.max_output}};
  j["reasoning_effort"] = q.reasoning_effort ? json(to_string(*q.reasoning_effort)) : json(nullptr);
  return j;
}

QueryOptions query_from(const json& j, const std::string& where) {
  check_keys(j, {"model_id", "temperature", "max_output", "reasoning_effort"}, where);
  QueryOptions q;
  q.model_id = j.value("model_id", q.model_id);
  q.temperature = j.value("temperature", q.temperature);
  q.max_output = j.value("max_output", q.max_output);
  if (j.contains("reasoning_effort") && !j["reasoning_effort"].is_null())
    q.reasoning_effort = parse_reasoning_effort(j["reasoning_effort"].get<std::string>());
  return q;
}

json modes_json(const std::vector<MemoryMode>& modes) {
  json j = json::array();
  for (auto m : modes) j.push_back(to_string(m));
  return j;
}

std::vector<MemoryMode> modes_from(const json& j) {
  std::vector<MemoryMode> out;
  for (const auto& m : j) out.push_back(parse_memory_mode(m.get<std::string>()));
  return out;
}

std::string hex64(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

std::uint64_t from_hex64(const std::string& s) { return std::stoull(s, nullptr, 16); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
    if (!out) throw ConfigError("write failed: " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

json to_json(const RunConfig& c) {
  return {{"run_id", c.run_id},
          {"environment", to_string(c.environment)},
          {"periods", c.periods},
          {"market", market_json(c.market)},
          {"auction", auction_json(c.auction)},
          {"prefixes", c.prefixes},
          {"memory_modes", modes_json(c.memory_modes)},
          {"placement", to_string(c.placement)},
          {"shock", shock_json(c.shock)},
          {"ceiling_multiplier", c.ceiling_multiplier},
          {"resample_ceiling", c.resample_ceiling},
          {"seed", c.seed},
          {"query", query_json(c.query)},
          {"history_cap", c.history_cap},
          {"prefix_version", c.prefix_version},
          {"record_prompts", c.record_prompts},
          {"scale", c.scale},
          {"rep", c.rep}};
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  c.run_id = j.at("run_id").get<std::string>();
  c.environment = parse_market_kind(j.at("environment").get<std::string>());
  c.periods = j.at("periods").get<int>();
  c.market = market_from(j.at("market"), true, "market");
  c.auction = auction_from(j.at("auction"), "auction");
  c.prefixes = j.at("prefixes").get<std::vector<std::string>>();
  c.memory_modes = modes_from(j.at("memory_modes"));
  c.placement = parse_placement(j.at("placement").get<std::string>());
  c.shock = shock_from(j.at("shock"), "shock");
  c.ceiling_multiplier = j.at("ceiling_multiplier").get<double>();
  c.resample_ceiling = j.at("resample_ceiling").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.query = query_from(j.at("query"), "query");
  c.history_cap = j.at("history_cap").get<int>();
  c.prefix_version = j.at("prefix_version").get<std::string>();
  c.record_prompts = j.at("record_prompts").get<bool>();
  c.scale = j.at("scale").get<double>();
  c.rep = j.at("rep").get<int>();
  return c;
}

json to_json(const PeriodRecord& r) {
  json agents = json::array();
  for (const auto& a : r.agents) {
    json ja = {{"value", a.value},
               {"quantity", a.quantity},
               {"profit", a.profit},
               {"observations", a.observations},
               {"plans", a.plans},
               {"insights", a.insights},
               {"raw", a.raw},
               {"retries", a.retries},
               {"ceiling_exceeded", a.ceiling_exceeded},
               {"won", a.won},
               {"reference_bid", a.reference_bid},
               {"payment", a.payment}};
    if (a.prompt) ja["prompt"] = *a.prompt;
    agents.push_back(std::move(ja));
  }
  return {{"type", "period"},
          {"period", r.period},
          {"agents", agents},
          {"realized_a0", r.realized_a0},
          {"timestamp", r.timestamp}};
}

PeriodRecord period_record_from_json(const json& j) {
  PeriodRecord r;
  r.period = j.at("period").get<int>();
  r.realized_a0 = j.at("realized_a0").get<double>();
  r.timestamp = j.value("timestamp", "");
  for (const auto& ja : j.at("agents")) {
    AgentRecord a;
    a.value = ja.at("value").get<double>();
    a.quantity = ja.at("quantity").get<double>();
    a.profit = ja.at("profit").get<double>();
    a.observations = ja.at("observations").get<std::string>();
    a.plans = ja.at("plans").get<std::string>();
    a.insights = ja.at("insights").get<std::string>();
    a.raw = ja.at("raw").get<std::string>();
    a.retries = ja.at("retries").get<int>();
    a.ceiling_exceeded = ja.at("ceiling_exceeded").get<bool>();
    a.won = ja.at("won").get<bool>();
    a.reference_bid = ja.at("reference_bid").get<double>();
    a.payment = ja.at("payment").get<double>();
    if (ja.contains("prompt")) a.prompt = ja["prompt"].get<std::string>();
    r.agents.push_back(std::move(a));
  }
  return r;
}

json to_json(const AgentState& s) {
  return {{"prefix_id", s.prefix.id},
          {"prefix_text", s.prefix.text},
          {"plans", s.plans},
          {"insights", s.insights},
          {"kind", to_string(s.kind)},
          {"marginal_cost", s.marginal_cost},
          {"ceiling", s.ceiling},
          {"item_value", s.item_value},
          {"cost_style", to_string(s.cost_style)},
          {"value_style", to_string(s.value_style)},
          {"memory_mode", to_string(s.memory_mode)},
          {"placement", to_string(s.placement)},
          {"query", query_json(s.query)}};
}

AgentState agent_state_from_json(const json& j) {
  check_keys(j,
             {"prefix_id", "prefix_text", "plans", "insights", "kind", "marginal_cost", "ceiling",
              "item_value", "cost_style", "value_style", "memory_mode", "placement", "query"},
             "agent state");
  AgentState s;
  s.prefix.id = j.at("prefix_id").get<std::string>();
  s.prefix.text = j.at("prefix_text").get<std::string>();
  s.plans = j.value("plans", "");
  s.insights = j.value("insights", "");
  s.kind = parse_market_kind(j.value("kind", "duopoly"));
  s.marginal_cost = j.value("marginal_cost", s.marginal_cost);
  s.ceiling = j.value("ceiling", s.ceiling);
  s.item_value = j.value("item_value", s.item_value);
  s.cost_style = parse_number_style(j.value("cost_style", "trimmed"));
  s.value_style = parse_number_style(j.value("value_style", "decimal"));
  s.memory_mode = parse_memory_mode(j.value("memory_mode", "full"));
  s.placement = parse_placement(j.value("placement", "user-concatenated"));
  if (j.contains("query")) s.query = query_from(j["query"], "agent state query");
  return s;
}

json to_json(const SnapshotCore& c) {
  json agents = json::array();
  for (const auto& a : c.agents) agents.push_back(to_json(a));
  return {{"period", c.period},
          {"agents", agents},
          {"rng_state", c.rng_state},
          {"ceiling", c.ceiling},
          {"record_count", c.record_count},
          {"records_digest", hex64(c.records_digest)},
          {"digest", hex64(c.digest)}};
}

SnapshotCore snapshot_core_from_json(const json& j) {
  try {
    SnapshotCore c;
    c.period = j.at("period").get<int>();
    for (const auto& a : j.at("agents")) c.agents.push_back(agent_state_from_json(a));
    c.rng_state = j.at("rng_state").get<std::string>();
    c.ceiling = j.at("ceiling").get<double>();
    c.record_count = j.at("record_count").get<std::size_t>();
    c.records_digest = from_hex64(j.at("records_digest").get<std::string>());
    c.digest = from_hex64(j.at("digest").get<std::string>());
    return c;
  } catch (const IntegrityError&) {
    throw;
  } catch (const std::exception& e) {
    throw IntegrityError(std::string("corrupt snapshot: ") + e.what());
  }
}

json to_json(const ExperimentConfig& c) {
  json market = market_json(c.market);
  market.erase("alpha");
  json sets = json::array();
  for (const auto& s : c.prefix_sets) sets.push_back(s);
  json j = {{"schema_version", kConfigSchemaVersion},
            {"environment", to_string(c.environment)},
            {"periods", c.periods},
            {"market", market},
            {"auction", auction_json(c.auction)},
            {"prefix_sets", sets},
            {"memory_modes", modes_json(c.memory_modes)},
            {"shock", shock_json(c.shock)},
            {"ceiling_multiplier", c.ceiling_multiplier},
            {"resample_ceiling", c.resample_ceiling},
            {"seed", c.seed},
            {"runs_per_cell", c.runs_per_cell},
            {"scales", c.scales},
            {"query", query_json(c.query)},
            {"history_cap", c.history_cap},
            {"prefix_version", c.prefix_version},
            {"record_prompts", c.record_prompts}};
  if (c.placement) j["placement"] = to_string(*c.placement);
  return j;
}

ExperimentConfig experiment_config_from_json(const json& j) {
  check_keys(j,
             {"schema_version", "environment", "periods", "market", "auction", "prefix_sets",
              "memory_modes", "placement", "shock", "ceiling_multiplier", "resample_ceiling", "seed",
              "runs_per_cell", "scales", "query", "history_cap", "prefix_version",
              "record_prompts"},
             "config");
  if (!j.contains("schema_version") || !j["schema_version"].is_number_integer() ||
      j["schema_version"].get<int>() != kConfigSchemaVersion)
    throw ConfigError("config: schema_version must be " + std::to_string(kConfigSchemaVersion));
  ExperimentConfig c;
  try {
    if (j.contains("environment")) c.environment = parse_market_kind(j["environment"].get<std::string>());
    if (c.environment == MarketKind::kMonopoly) {
      c.market = MarketParams::benchmark().only_firm(0);
      c.prefix_sets = {{"P1"}};
    } else if (c.environment == MarketKind::kAuction) {
      c.prefix_sets = {{"A0", "A0"}};
      c.scales = {1.0};
    }
    c.periods = j.value("periods", c.periods);
    if (j.contains("market")) {
      const MarketParams m = market_from(j["market"], false, "config.market");
      c.market.beta = m.beta;
      c.market.mu = m.mu;
      c.market.a0 = m.a0;
      if (j["market"].contains("quality")) c.market.quality = m.quality;
      if (j["market"].contains("cost")) c.market.cost = m.cost;
    }
    if (j.contains("auction")) c.auction = auction_from(j["auction"], "config.auction");
    if (j.contains("prefix_sets"))
      c.prefix_sets = j["prefix_sets"].get<std::vector<std::vector<std::string>>>();
    if (j.contains("memory_modes")) c.memory_modes = modes_from(j["memory_modes"]);
    if (j.contains("placement")) c.placement = parse_placement(j["placement"].get<std::string>());
    if (j.contains("shock")) c.shock = shock_from(j["shock"], "config.shock");
    c.ceiling_multiplier = j.value("ceiling_multiplier", c.ceiling_multiplier);
    c.resample_ceiling = j.value("resample_ceiling", c.resample_ceiling);
    c.seed = j.value("seed", c.seed);
    c.runs_per_cell = j.value("runs_per_cell", c.runs_per_cell);
    if (j.contains("scales")) c.scales = j["scales"].get<std::vector<double>>();
    if (j.contains("query")) c.query = query_from(j["query"], "config.query");
    c.history_cap = j.value("history_cap", c.history_cap);
    c.prefix_version = j.value("prefix_version", c.prefix_version);
    c.record_prompts = j.value("record_prompts", c.record_prompts);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

RunStore::RunStore(std::filesystem::path root, std::string run_id)
    : dir_(std::move(root) / "runs" / std::move(run_id)) {
  std::filesystem::create_directories(dir_ / "snapshots");
}

void RunStore::write_header(const RunConfig& config, double ceiling, const json& fixtures) {
  json h = {{"type", "header"},
            {"schema_version", kConfigSchemaVersion},
            {"config", to_json(config)},
            {"seed", config.seed},
            {"ceiling", ceiling},
            {"fixtures", fixtures}};
  write_text(dir_ / "log.jsonl", h.dump() + "\n");
}

void RunStore::append(const PeriodRecord& record) {
  std::ofstream out(dir_ / "log.jsonl", std::ios::binary | std::ios::app);
  if (!out) throw ConfigError("cannot append to " + (dir_ / "log.jsonl").string());
  out << to_json(record).dump() << '\n';
}

void RunStore::write_snapshot(const SnapshotCore& core) {
  char name[32];
  std::snprintf(name, sizeof name, "t%04d.json", core.period);
  write_text(dir_ / "snapshots" / name, to_json(core).dump());
}

void RunStore::write_abort(const AbortInfo& abort) {
  std::ofstream out(dir_ / "log.jsonl", std::ios::binary | std::ios::app);
  if (!out) throw ConfigError("cannot append to " + (dir_ / "log.jsonl").string());
  out << json{{"type", "abort"},
              {"period", abort.period},
              {"agent", abort.agent},
              {"message", abort.message}}
             .dump()
      << '\n';
}

RunLog load_run(const std::filesystem::path& run_dir) {
  std::ifstream in(run_dir / "log.jsonl");
  if (!in) throw ConfigError("run log not found: " + (run_dir / "log.jsonl").string());
  RunLog log;
  std::string line;
  bool header = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw IntegrityError((run_dir / "log.jsonl").string() + ":" + std::to_string(lineno) + ": " +
                           e.what());
    }
    const std::string type = j.value("type", "");
    if (type == "header") {
      log.config = run_config_from_json(j.at("config"));
      log.ceiling = j.value("ceiling", 0.0);
      header = true;
    } else if (type == "period") {
      log.records.push_back(period_record_from_json(j));
    } else if (type == "abort") {
      log.aborted = AbortInfo{j.value("period", 0), j.value("agent", -1), j.value("message", "")};
    } else {
      throw IntegrityError("unknown log entry type \"" + type + "\"");
    }
  }
  if (!header) throw IntegrityError("run log without header: " + run_dir.string());
  for (int t = 1;; ++t) {
    char name[32];
    std::snprintf(name, sizeof name, "t%04d.json", t);
    const auto path = run_dir / "snapshots" / name;
    if (!std::filesystem::exists(path)) break;
    std::ifstream sin(path);
    json j;
    try {
      j = json::parse(sin);
    } catch (const json::exception& e) {
      throw IntegrityError("corrupt snapshot " + path.string() + ": " + e.what());
    }
    log.snapshots.push_back(snapshot_core_from_json(j));
  }
  return log;
}

std::vector<RunLog> load_runs(const std::filesystem::path& root) {
  const auto runs = root / "runs";
  if (!std::filesystem::is_directory(runs)) throw ConfigError("no runs directory under " + root.string());
  std::vector<std::filesystem::path> dirs;
  for (const auto& e : std::filesystem::directory_iterator(runs)) {
    if (e.is_directory()) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  std::vector<RunLog> out;
  for (const auto& d : dirs) out.push_back(load_run(d));
  return out;
}

void write_manifest(const std::filesystem::path& root, const std::vector<RunLog>& logs) {
  std::filesystem::create_directories(root);
  json runs = json::array();
  for (const auto& l : logs) {
    json r = {{"run_id", l.config.run_id},
              {"scale", l.config.scale},
              {"prefixes", l.config.prefixes},
              {"rep", l.config.rep},
              {"seed", l.config.seed},
              {"periods_completed", l.records.size()},
              {"status", l.aborted ? "aborted" : "complete"}};
    if (l.aborted) r["error"] = l.aborted->message;
    runs.push_back(std::move(r));
  }
  write_text(root / "manifest.json",
             json{{"schema_version", kConfigSchemaVersion}, {"runs", runs}}.dump(2) + "\n");
}

}  // namespace collab
