#include "collab/orchestrator.hpp"

#include <atomic>
#include <chrono>
#include <ctime>
#include <future>
#include <set>
#include <thread>

namespace collab {

namespace {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string scale_label(double scale) {
  std::string s = format_number(scale, NumberStyle::kTrimmed);
  for (char& c : s) {
    if (c == '.') c = 'p';
  }
  return s;
}

}  // namespace

int ExperimentConfig::agents() const {
  if (environment == MarketKind::kMonopoly) return 1;
  if (environment == MarketKind::kAuction) return auction.bidders;
  return static_cast<int>(market.firms());
}

void ExperimentConfig::validate() const {
  if (periods < 1) throw ConfigError("config: periods must be >= 1");
  if (runs_per_cell < 0) throw ConfigError("config: runs_per_cell must be >= 0");
  if (history_cap < 0) throw ConfigError("config: history_cap must be >= 0");
  for (double s : scales) {
    if (!(s > 0.0)) throw ConfigError("config: scale values must be > 0");
  }
  try {
    market.validate();
    if (environment == MarketKind::kAuction) auction.validate();
    shock.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  const int n = agents();
  for (const auto& set : prefix_sets) {
    if (static_cast<int>(set.size()) != n)
      throw ConfigError("config: each prefix set needs one prefix per agent (" +
                        std::to_string(n) + ")");
  }
  if (memory_modes.empty() ||
      (memory_modes.size() != 1 && static_cast<int>(memory_modes.size()) != n))
    throw ConfigError("config: memory_modes needs one entry or one per agent");
  if (!resample_ceiling && (ceiling_multiplier < 1.5 || ceiling_multiplier > 2.5))
    throw ConfigError("config: ceiling multiplier must lie in [1.5, 2.5]");
}

void RunConfig::validate() const {
  if (run_id.empty()) throw ConfigError("run: empty run id");
  if (periods < 1) throw ConfigError("run: periods must be >= 1");
  if (prefixes.empty()) throw ConfigError("run: no agents");
  if (memory_modes.size() != prefixes.size())
    throw ConfigError("run: one memory mode per agent required");
  if (environment == MarketKind::kAuction) {
    auction.validate();
    if (auction.bidders != agents()) throw ConfigError("run: one prefix per bidder required");
  } else {
    market.validate();
    if (market.firms() != agents()) throw ConfigError("run: one prefix per firm required");
    if (environment == MarketKind::kMonopoly && agents() != 1)
      throw ConfigError("run: monopoly runs have exactly one firm");
  }
}

std::vector<RunConfig> expand_grid(const ExperimentConfig& config) {
  config.validate();
  std::vector<RunConfig> out;
  std::uint64_t index = 0;
  for (double scale : config.scales) {
    for (const auto& prefixes : config.prefix_sets) {
      for (int rep = 0; rep < config.runs_per_cell; ++rep, ++index) {
        RunConfig rc;
        rc.environment = config.environment;
        rc.periods = config.periods;
        rc.market = config.environment == MarketKind::kMonopoly && config.market.firms() > 1
                        ? config.market.only_firm(0)
                        : config.market;
        rc.auction = config.auction;
        if (config.environment == MarketKind::kAuction) {
          rc.auction.value = scale;
        } else {
          rc.market.alpha = scale;
        }
        rc.prefixes = prefixes;
        rc.memory_modes = config.memory_modes.size() == 1
                              ? std::vector<MemoryMode>(prefixes.size(), config.memory_modes[0])
                              : config.memory_modes;
        rc.placement = config.placement.value_or(config.environment == MarketKind::kAuction
                                                     ? PromptPlacement::kSystem
                                                     : PromptPlacement::kUserConcatenated);
        rc.shock = config.shock;
        rc.ceiling_multiplier = config.ceiling_multiplier;
        rc.resample_ceiling = config.resample_ceiling;
        rc.seed = derive_seed(config.seed, index);
        rc.query = config.query;
        rc.history_cap = config.history_cap;
        rc.prefix_version = config.prefix_version;
        rc.record_prompts = config.record_prompts;
        rc.scale = scale;
        rc.rep = rep;
        std::string joined;
        for (const auto& p : prefixes) {
          joined += "-";
          for (char c : p) joined += (c == ':' ? '_' : c);
        }
        char rep_buf[16];
        std::snprintf(rep_buf, sizeof rep_buf, "%02d", rep);
        rc.run_id = to_string(config.environment) +
                    (config.environment == MarketKind::kAuction ? "-v" : "-a") +
                    scale_label(scale) + joined + "-r" + rep_buf;
        out.push_back(std::move(rc));
      }
    }
  }
  return out;
}

bool RunLog::has_snapshot(int period) const {
  return period >= 1 && static_cast<std::size_t>(period) <= snapshots.size() &&
         static_cast<std::size_t>(period) <= records.size();
}

RunSnapshot RunLog::snapshot_at(int period) const {
  if (period < 1 || static_cast<std::size_t>(period) > snapshots.size())
    throw IntegrityError("no snapshot for period " + std::to_string(period) + " of " +
                         config.run_id);
  RunSnapshot s;
  s.config = config;
  s.core = snapshots[period - 1];
  if (s.core.record_count > records.size())
    throw IntegrityError("snapshot references records beyond the log");
  s.history.assign(records.begin(), records.begin() + static_cast<long>(s.core.record_count));
  return s;
}

std::uint64_t digest_records(const std::vector<PeriodRecord>& records, std::size_t count) {
  std::uint64_t h = fnv1a("records");
  for (std::size_t i = 0; i < count && i < records.size(); ++i) {
    nlohmann::json j = to_json(records[i]);
    j.erase("timestamp");
    h = fnv1a(j.dump(), h);
  }
  return h;
}

std::uint64_t digest_core(const SnapshotCore& core) {
  nlohmann::json j = to_json(core);
  j.erase("digest");
  return fnv1a(j.dump());
}

HistoryWindow history_for(const RunConfig& config, const std::vector<PeriodRecord>& records,
                          std::size_t count, int agent) {
  HistoryWindow w;
  w.include_competitor = config.environment == MarketKind::kDuopoly;
  w.auction_mode = config.environment == MarketKind::kAuction;
  const std::size_t n = std::min(count, records.size());
  const std::size_t cap = static_cast<std::size_t>(config.history_cap);
  const std::size_t first = n > cap ? n - cap : 0;
  const int rival = agent == 0 ? 1 : 0;
  for (std::size_t k = first; k < n; ++k) {
    const auto& r = records[k];
    const auto& a = r.agents.at(agent);
    HistoryEntry e;
    e.round = r.period;
    e.value = a.value;
    e.quantity = a.quantity;
    e.profit = a.profit;
    e.won = a.won;
    e.reference_bid = a.reference_bid;
    e.payment = a.payment;
    if (w.include_competitor) e.competitor_price = r.agents.at(rival).value;
    w.records.push_back(e);
  }
  return w;
}

Orchestrator::Orchestrator(Gateway& gateway, PrefixLibrary prefixes)
    : gateway_(gateway), prefixes_(std::move(prefixes)) {}

RunSnapshot Orchestrator::initial_snapshot(const RunConfig& config) const {
  config.validate();
  RunSnapshot snap;
  snap.config = config;
  SnapshotCore& core = snap.core;
  core.period = 1;
  if (config.environment != MarketKind::kAuction) {
    const Eigen::VectorXd pm = joint_monopoly_prices(config.market);
    double multiplier = config.ceiling_multiplier;
    if (config.resample_ceiling) {
      Rng draw(derive_seed(config.seed, 2));
      multiplier = draw_ceiling_multiplier(draw);
    }
    core.ceiling = price_ceiling(pm.maxCoeff(), multiplier);
  }
  const PrefixLibrary lib(prefixes_.resource_dir(), config.prefix_version);
  for (int i = 0; i < config.agents(); ++i) {
    AgentState s;
    s.prefix = lib.get(config.prefixes[i]);
    s.kind = config.environment;
    if (config.environment == MarketKind::kAuction) {
      s.item_value = config.auction.value;
    } else {
      s.marginal_cost = config.market.alpha * config.market.cost(i);
      s.ceiling = core.ceiling;
    }
    s.memory_mode = config.memory_modes[i];
    s.placement = config.placement;
    s.query = config.query;
    core.agents.push_back(std::move(s));
  }
  core.rng_state = Rng(derive_seed(config.seed, 1)).state();
  core.record_count = 0;
  core.records_digest = digest_records({}, 0);
  core.digest = digest_core(core);
  return snap;
}

Orchestrator::StepResult Orchestrator::step(const RunConfig& config, const SnapshotCore& core,
                                            const std::vector<PeriodRecord>& history) {
  const int n = config.agents();
  auto decide_one = [&](int i) {
    HistoryWindow window = history_for(config, history, core.record_count, i);
    RequestTag tag{config.run_id, i, core.period, 0};
    return decide(core.agents[i], window, gateway_, tag);
  };

  // Simultaneous move: every agent sees the same pre-period information.
  std::vector<DecisionResult> decisions;
  if (n > 1 && gateway_.max_concurrent() > 1) {
    std::vector<std::future<DecisionResult>> futures;
    for (int i = 0; i < n; ++i) futures.push_back(std::async(std::launch::async, decide_one, i));
    std::exception_ptr first_error;
    for (auto& f : futures) {
      try {
        decisions.push_back(f.get());
      } catch (...) {
        if (!first_error) first_error = std::current_exception();
      }
    }
    if (first_error) std::rethrow_exception(first_error);
  } else {
    for (int i = 0; i < n; ++i) decisions.push_back(decide_one(i));
  }

  StepResult out;
  PeriodRecord& rec = out.record;
  rec.period = core.period;
  rec.timestamp = utc_timestamp();
  rec.agents.resize(n);
  Rng rng = Rng::from_state(core.rng_state);

  if (config.environment == MarketKind::kAuction) {
    std::vector<double> bids;
    for (const auto& d : decisions) bids.push_back(d.decision.value);
    const AuctionOutcome o = auction_step(bids, config.auction, rng);
    for (int i = 0; i < n; ++i) {
      rec.agents[i].won = o.feedback[i].won;
      rec.agents[i].reference_bid = o.feedback[i].reference_bid;
      rec.agents[i].payment = o.feedback[i].payment;
      rec.agents[i].profit = o.feedback[i].profit;
    }
  } else {
    Eigen::VectorXd prices(n);
    for (int i = 0; i < n; ++i) prices(i) = decisions[i].decision.value;
    const MarketOutcome o = step_market(prices, config.market, config.shock, rng);
    rec.realized_a0 = o.realized_a0;
    for (int i = 0; i < n; ++i) {
      rec.agents[i].quantity = o.quantities(i);
      rec.agents[i].profit = o.profits(i);
    }
  }

  for (int i = 0; i < n; ++i) {
    const auto& d = decisions[i];
    AgentRecord& a = rec.agents[i];
    a.value = d.decision.value;
    a.observations = d.decision.observations;
    a.plans = d.decision.new_plans;
    a.insights = d.decision.new_insights;
    a.raw = d.decision.raw;
    a.retries = d.retries;
    a.ceiling_exceeded = d.ceiling_exceeded;
    if (config.record_prompts) a.prompt = d.request.full_text();
    out.next_agents.push_back(next_state(core.agents[i], d.decision));
  }
  out.next_rng_state = rng.state();
  return out;
}

RunLog Orchestrator::run(const RunConfig& config, RunStore* store) {
  RunSnapshot snap = initial_snapshot(config);
  RunLog log;
  log.config = config;
  log.ceiling = snap.core.ceiling;
  if (store) {
    nlohmann::json fixtures = nlohmann::json::object();
    for (const auto& a : snap.core.agents) {
      char hex[17];
      std::snprintf(hex, sizeof hex, "%016llx",
                    static_cast<unsigned long long>(fnv1a(a.prefix.text)));
      fixtures["prefix:" + a.prefix.id] = hex;
    }
    store->write_header(config, log.ceiling, fixtures);
  }

  SnapshotCore core = std::move(snap.core);
  std::uint64_t running = digest_records({}, 0);
  for (int t = 1; t <= config.periods; ++t) {
    core.period = t;
    core.record_count = log.records.size();
    core.records_digest = running;
    core.digest = digest_core(core);
    log.snapshots.push_back(core);
    if (store) store->write_snapshot(core);

    StepResult r;
    try {
      r = step(config, core, log.records);
    } catch (const RunAbort& e) {
      log.aborted = AbortInfo{e.period(), e.agent(), e.what()};
      if (store) store->write_abort(*log.aborted);
      return log;
    }
    nlohmann::json j = to_json(r.record);
    j.erase("timestamp");
    running = fnv1a(j.dump(), running);
    if (store) store->append(r.record);
    log.records.push_back(std::move(r.record));
    core.agents = std::move(r.next_agents);
    core.rng_state = std::move(r.next_rng_state);
  }
  return log;
}

namespace {

void verify_snapshot(const RunSnapshot& s) {
  if (digest_core(s.core) != s.core.digest) throw IntegrityError("snapshot digest mismatch");
  if (s.history.size() != s.core.record_count)
    throw IntegrityError("snapshot history length does not match its record count");
  if (digest_records(s.history, s.history.size()) != s.core.records_digest)
    throw IntegrityError("snapshot history does not match its digest");
  if (static_cast<int>(s.core.agents.size()) != s.config.agents())
    throw IntegrityError("snapshot agent count does not match its config");
}

void apply_overrides(std::vector<AgentState>& agents, const Overrides& overrides) {
  for (const auto& [i, o] : overrides) {
    if (i < 0 || static_cast<std::size_t>(i) >= agents.size())
      throw ContractViolation("override for unknown agent " + std::to_string(i));
    if (o.plans) agents[i].plans = *o.plans;
    if (o.insights) agents[i].insights = *o.insights;
    if (o.prefix) agents[i].prefix = *o.prefix;
  }
}

}  // namespace

PeriodRecord Orchestrator::restore_and_step(const RunSnapshot& snapshot, const Overrides& overrides) {
  verify_snapshot(snapshot);
  SnapshotCore core = snapshot.core;
  apply_overrides(core.agents, overrides);
  return step(snapshot.config, core, snapshot.history).record;
}

std::vector<RunLog> Orchestrator::grid(const std::vector<RunConfig>& configs, int parallel,
                                       const std::filesystem::path* out_dir) {
  if (parallel < 1) throw ConfigError("grid: parallelism must be >= 1");
  std::set<std::string> ids;
  for (const auto& c : configs) {
    if (!ids.insert(c.run_id).second) throw ConfigError("grid: duplicate run id " + c.run_id);
  }
  std::vector<RunLog> logs(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        std::optional<RunStore> store;
        if (out_dir) store.emplace(*out_dir, configs[i].run_id);
        logs[i] = run(configs[i], store ? &*store : nullptr);
      } catch (const std::exception& e) {
        logs[i].config = configs[i];
        logs[i].aborted = AbortInfo{0, -1, e.what()};
        if (out_dir) {
          try {
            RunStore(*out_dir, configs[i].run_id).write_abort(*logs[i].aborted);
          } catch (const std::exception&) {
          }
        }
      }
    }
  };
  const int threads = std::min<int>(parallel, static_cast<int>(configs.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int k = 0; k < threads; ++k) pool.emplace_back(worker);
  }
  if (out_dir) write_manifest(*out_dir, logs);
  return logs;
}

ImplantResult implant(Orchestrator& orchestrator, const std::vector<RunLog>& logs,
                      const std::vector<int>& periods, const std::vector<int>& agents,
                      const std::vector<std::string>& sentences) {
  ImplantResult out;
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    for (const auto& log : logs) {
      for (int agent : agents) {
        for (int period : periods) {
          ImplantError err{log.config.run_id, period, agent, static_cast<int>(s), ""};
          try {
            if (agent < 0 || agent >= log.config.agents())
              throw ContractViolation("no agent " + std::to_string(agent));
            if (!log.has_snapshot(period))
              throw IntegrityError("no snapshot for period " + std::to_string(period));
            const SnapshotCore& core = log.snapshots[period - 1];
            if (digest_core(core) != core.digest) throw IntegrityError("snapshot digest mismatch");
            AgentState state = core.agents[agent];
            state.plans = sentences[s];
            state.insights.clear();
            const HistoryWindow window =
                history_for(log.config, log.records, core.record_count, agent);
            const DecisionResult d = decide(state, window, orchestrator.gateway(),
                                            RequestTag{log.config.run_id, agent, period, 0});
            CounterfactualRecord rec;
            rec.run_id = log.config.run_id;
            rec.prefix_id = log.config.prefixes[agent];
            rec.period = period;
            rec.agent = agent;
            rec.sentence_index = static_cast<int>(s);
            rec.sentence = sentences[s];
            rec.original = log.records[period - 1].agents[agent].value;
            rec.counterfactual = d.decision.value;
            rec.scale = log.config.scale;
            rec.delta = (rec.counterfactual - rec.original) / rec.scale;
            out.records.push_back(std::move(rec));
          } catch (const std::exception& e) {
            err.message = e.what();
            out.errors.push_back(std::move(err));
          }
        }
      }
    }
  }
  return out;
}

std::vector<std::string> load_sentence_set(const std::string& name,
                                           const std::filesystem::path& resource_dir) {
  if (name.empty() || name.find_first_of("/\\.") != std::string::npos)
    throw ConfigError("invalid sentence set name: " + name);
  const std::string text = read_resource_text(resource_dir / "sentences" / (name + ".txt"));
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find('\n', start), text.size());
    std::string line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(std::move(line));
    start = end + 1;
  }
  return out;
}

}  // namespace collab
