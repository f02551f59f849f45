#include "collab/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "collab/analysis.hpp"
#include "collab/embedding.hpp"
#include "collab/equilibrium.hpp"
#include "collab/orchestrator.hpp"
#include "collab/scripted.hpp"
#include "collab/textlab.hpp"

namespace collab {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Fixture chat replay

FixtureChatBackend FixtureChatBackend::load(const std::filesystem::path& path) {
  FixtureChatBackend b;
  if (std::filesystem::is_directory(path)) {
    const auto logs = std::filesystem::exists(path / "runs") ? load_runs(path)
                                                             : std::vector<RunLog>{load_run(path)};
    for (const auto& log : logs) {
      for (const auto& r : log.records) {
        for (const auto& a : r.agents) {
          if (a.prompt) b.add(*a.prompt, a.raw);
        }
      }
    }
    return b;
  }
  std::ifstream in(path);
  if (!in) throw ConfigError("transcript fixture not found: " + path.string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    b.add(j.at("prompt").get<std::string>(), j.at("text").get<std::string>());
  }
  return b;
}

void FixtureChatBackend::add(std::string prompt, std::string text) {
  replies_[std::move(prompt)] = std::move(text);
}

ChatResponse FixtureChatBackend::chat(const ChatRequest& request) {
  const auto it = replies_.find(request.full_text());
  if (it == replies_.end()) throw FixtureMissError("no recorded completion for this prompt");
  ChatResponse r;
  r.text = it->second;
  return r;
}

std::shared_ptr<ChatBackend> make_chat_backend(const BackendOptions& o) {
  if (o.spec == "live") {
    LiveConfig cfg;
    cfg.api_key_env = o.api_key_env;
    if (!o.model.empty()) cfg.chat_model = o.model;
    if (!o.base_url.empty()) cfg.base_url = o.base_url;
    return std::make_shared<LiveBackend>(cfg, nullptr);
  }
  if (o.spec == "fixture") {
    if (o.transcripts.empty()) throw ConfigError("fixture backend needs --transcripts");
    return std::make_shared<FixtureChatBackend>(FixtureChatBackend::load(o.transcripts));
  }
  constexpr std::string_view kScripted = "scripted:";
  if (o.spec.rfind(kScripted, 0) == 0) {
    ScriptedConfig cfg = parse_scripted_spec(std::string_view(o.spec).substr(kScripted.size()));
    cfg.market = o.market;
    cfg.market.alpha = 1.0;
    return std::make_shared<ScriptedBackend>(cfg);
  }
  throw ConfigError("unknown backend: " + o.spec);
}

// ---------------------------------------------------------------------------
// Prompt fixtures

std::vector<std::string> prompt_fixture_names(const std::filesystem::path& resource_dir) {
  std::vector<std::string> names;
  const auto dir = resource_dir / "fixtures" / "prompts";
  if (!std::filesystem::is_directory(dir)) return names;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() == ".json") names.push_back(e.path().stem().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

PromptFixture load_prompt_fixture(const std::filesystem::path& resource_dir, const std::string& name) {
  const auto dir = resource_dir / "fixtures" / "prompts";
  json j;
  try {
    j = json::parse(read_resource_text(dir / (name + ".json")));
  } catch (const json::exception& e) {
    throw ConfigError("prompt fixture " + name + ": " + e.what());
  }
  PromptFixture f;
  f.name = name;
  const PrefixLibrary lib(resource_dir);
  f.state.prefix = lib.get(j.at("prefix_id").get<std::string>());
  f.state.kind = parse_market_kind(j.value("kind", "duopoly"));
  f.state.plans = j.value("plans", "");
  f.state.insights = j.value("insights", "");
  f.state.marginal_cost = j.value("marginal_cost", 1.0);
  f.state.ceiling = j.value("ceiling", 0.0);
  f.state.item_value = j.value("item_value", 1.0);
  f.state.placement = parse_placement(j.value("placement", "user-concatenated"));
  f.required_placement = parse_placement(j.value("required_placement", "user-concatenated"));
  f.window.auction_mode = f.state.kind == MarketKind::kAuction;
  f.window.include_competitor = f.state.kind == MarketKind::kDuopoly;
  for (const auto& h : j.value("history", json::array())) {
    HistoryEntry e;
    e.round = h.at("round").get<int>();
    e.value = h.at("value").get<double>();
    if (h.contains("competitor_price")) e.competitor_price = h["competitor_price"].get<double>();
    e.quantity = h.value("quantity", 0.0);
    e.profit = h.value("profit", 0.0);
    e.won = h.value("won", false);
    e.reference_bid = h.value("reference_bid", 0.0);
    e.payment = h.value("payment", 0.0);
    f.window.records.push_back(e);
  }
  f.expected = read_resource_text(dir / (name + ".txt"));
  return f;
}

PromptCheck check_prompt_fixture(const PromptFixture& fixture,
                                 std::optional<PromptPlacement> force_placement) {
  PromptCheck c;
  c.name = fixture.name;
  AgentState state = fixture.state;
  if (force_placement) state.placement = *force_placement;
  const ChatRequest req = assemble_prompt(state, fixture.window);
  const bool system = req.system_text.has_value();
  if (system != (fixture.required_placement == PromptPlacement::kSystem)) {
    c.message = "prefix placement is " + to_string(state.placement) + ", fixture requires " +
                to_string(fixture.required_placement);
    return c;
  }
  const std::string got = req.full_text();
  if (got == fixture.expected) {
    c.ok = true;
    c.message = "identical (" + std::to_string(got.size()) + " bytes)";
    return c;
  }
  std::size_t at = 0;
  while (at < got.size() && at < fixture.expected.size() && got[at] == fixture.expected[at]) ++at;
  auto context = [](const std::string& s, std::size_t pos) {
    std::string out = s.substr(pos, 24);
    for (char& ch : out) {
      if (ch == '\n') ch = '|';
    }
    return out;
  };
  c.message = "first difference at byte " + std::to_string(at) + ": expected \"" +
              context(fixture.expected, at) + "\", got \"" + context(got, at) + "\"";
  return c;
}

std::vector<PromptCheck> validate_prompts(const std::filesystem::path& resource_dir) {
  std::vector<PromptCheck> out;
  for (const auto& name : prompt_fixture_names(resource_dir)) {
    try {
      out.push_back(check_prompt_fixture(load_prompt_fixture(resource_dir, name)));
    } catch (const std::exception& e) {
      out.push_back({name, false, e.what()});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Subcommands

namespace {

struct Globals {
  std::string config;
  std::string out;
  std::string backend;
  std::optional<std::uint64_t> seed;
  int parallel = 0;
  std::string model;
  std::string api_key_env{kDefaultApiKeyEnv};
  std::string resources;
  std::string base_url;
  std::string transcripts;
};

std::filesystem::path resource_dir(const Globals& g) {
  return g.resources.empty() ? default_resource_dir() : std::filesystem::path(g.resources);
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << text;
}

std::string f2(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

std::string per_firm(const Eigen::VectorXd& v) {
  std::string s;
  bool same = true;
  for (Eigen::Index i = 1; i < v.size(); ++i) same = same && f2(v(i)) == f2(v(0));
  if (same) return f2(v(0));
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? "/" : "") + f2(v(i));
  return s;
}

// Config file plus CLI-level keys that the experiment schema does not own.
struct LoadedConfig {
  ExperimentConfig experiment;
  std::string backend;
  int parallel = 0;
  std::string api_key_env;
  std::string base_url;
};

LoadedConfig load_config(const Globals& g) {
  LoadedConfig lc;
  json j = json{{"schema_version", kConfigSchemaVersion}};
  if (!g.config.empty()) {
    std::ifstream in(g.config);
    if (!in) throw ConfigError("config file not found: " + g.config);
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  if (j.contains("backend")) lc.backend = j["backend"].get<std::string>();
  if (j.contains("parallel")) lc.parallel = j["parallel"].get<int>();
  if (j.contains("api_key_env")) lc.api_key_env = j["api_key_env"].get<std::string>();
  if (j.contains("base_url")) lc.base_url = j["base_url"].get<std::string>();
  for (const char* k : {"backend", "parallel", "api_key_env", "base_url"}) j.erase(k);
  ExperimentConfig& c = lc.experiment;
  c = experiment_config_from_json(j);
  if (g.seed) c.seed = *g.seed;
  if (!g.model.empty()) c.query.model_id = g.model;
  if (!g.backend.empty()) lc.backend = g.backend;
  if (g.parallel > 0) lc.parallel = g.parallel;
  if (g.api_key_env != kDefaultApiKeyEnv || lc.api_key_env.empty()) lc.api_key_env = g.api_key_env;
  if (!g.base_url.empty()) lc.base_url = g.base_url;
  if (lc.backend.empty()) lc.backend = "scripted:myopic";
  if (lc.parallel <= 0) lc.parallel = 1;
  c.validate();
  return lc;
}

BackendOptions backend_options(const Globals& g, const LoadedConfig& lc) {
  BackendOptions o;
  o.spec = lc.backend;
  o.api_key_env = lc.api_key_env;
  o.model = lc.experiment.query.model_id;
  o.base_url = lc.base_url;
  o.transcripts = g.transcripts;
  o.market = lc.experiment.market;
  return o;
}

int cmd_equilibria(const Globals& g, std::ostream& out) {
  const LoadedConfig lc = load_config(g);
  const ExperimentConfig& c = lc.experiment;
  if (c.environment == MarketKind::kAuction) {
    out << "value,nash_bid,cent_grid_equilibria\n";
    for (double v : c.scales) {
      AuctionParams a = c.auction;
      a.value = v;
      const auto eq = auction_cent_grid_equilibria(a);
      out << format_number(v, NumberStyle::kDecimal) << ',' << f2(auction_nash(a)) << ',';
      for (std::size_t i = 0; i < eq.size(); ++i) out << (i ? "/" : "") << f2(eq[i]);
      out << '\n';
    }
    return kExitOk;
  }
  out << "alpha,p_nash,p_monopoly,profit_nash,profit_monopoly,p_single_monopoly,ceiling\n";
  for (double alpha : c.scales) {
    MarketParams m = c.market;
    if (c.environment == MarketKind::kMonopoly && m.firms() > 1) m = m.only_firm(0);
    m.alpha = alpha;
    const Benchmarks b = compute_benchmarks(m, c.ceiling_multiplier);
    Eigen::VectorXd single(m.firms());
    for (Eigen::Index i = 0; i < m.firms(); ++i) single(i) = b.single_monopoly_prices[i];
    out << format_number(alpha, NumberStyle::kTrimmed) << ',' << per_firm(b.nash_prices) << ','
        << per_firm(b.monopoly_prices) << ',' << per_firm(b.nash_profits) << ','
        << per_firm(b.monopoly_profits) << ',' << per_firm(single) << ',' << f2(b.ceiling) << '\n';
  }
  return kExitOk;
}

int cmd_run(const Globals& g, std::ostream& out, std::ostream& err) {
  if (g.out.empty()) throw ConfigError("run: --out is required");
  const LoadedConfig lc = load_config(g);
  const std::vector<RunConfig> runs = expand_grid(lc.experiment);
  BackendOptions bo = backend_options(g, lc);
  auto chat = make_chat_backend(bo);
  Gateway gateway(chat, nullptr, std::max(8, lc.parallel * 2));
  gateway.set_log_sink({LogLevel::kInfo, [&err](LogLevel, std::string_view m) { err << m << '\n'; }},
                       lc.api_key_env);
  std::vector<RunConfig> configs = runs;
  if (chat->is_live()) {
    for (auto& r : configs) r.record_prompts = true;
  }
  Orchestrator orch(gateway, PrefixLibrary(resource_dir(g), lc.experiment.prefix_version));
  const std::filesystem::path root(g.out);
  std::filesystem::create_directories(root);
  write_file(root / "config.json", to_json(lc.experiment).dump(2) + "\n");
  const auto logs = orch.grid(configs, lc.parallel, &root);
  int aborted = 0;
  for (const auto& l : logs) {
    out << l.config.run_id << ": " << l.records.size() << " periods"
        << (l.aborted ? " (aborted: " + l.aborted->message + ")" : "") << '\n';
    aborted += l.aborted ? 1 : 0;
  }
  out << logs.size() << " runs, " << aborted << " aborted\n";
  return aborted > 0 ? kExitAbort : kExitOk;
}

std::vector<int> parse_index_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part.empty()) continue;
    const auto dash = part.find('-');
    try {
      if (dash != std::string::npos && dash > 0) {
        const int lo = std::stoi(part.substr(0, dash));
        const int hi = std::stoi(part.substr(dash + 1));
        if (lo > hi) throw ConfigError("bad range " + part);
        for (int k = lo; k <= hi; ++k) out.push_back(k);
      } else {
        out.push_back(std::stoi(part));
      }
    } catch (const std::logic_error&) {
      throw ConfigError("bad index list: " + text);
    }
  }
  return out;
}

struct ImplantOptions {
  std::string runs;
  std::string set;
  std::string sentences_file;
  std::string periods = "2-13";
  std::string agents = "0,1";
};

int cmd_implant(const Globals& g, const ImplantOptions& o, std::ostream& out) {
  if (o.runs.empty()) throw ConfigError("implant: --runs is required");
  if (g.out.empty()) throw ConfigError("implant: --out is required");
  std::vector<std::string> sentences;
  if (!o.sentences_file.empty()) {
    std::ifstream in(o.sentences_file);
    if (!in) throw ConfigError("sentence file not found: " + o.sentences_file);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) sentences.push_back(line);
    }
  } else {
    sentences = load_sentence_set(o.set.empty() ? "price-war" : o.set, resource_dir(g));
  }
  const auto periods = parse_index_list(o.periods);
  const auto agents = parse_index_list(o.agents);
  const auto logs = load_runs(o.runs);

  Globals gg = g;
  LoadedConfig lc;
  lc.backend = g.backend.empty() ? "scripted:plan-echo" : g.backend;
  lc.api_key_env = g.api_key_env;
  lc.base_url = g.base_url;
  lc.experiment.query.model_id = g.model;
  if (!logs.empty()) lc.experiment.market = logs.front().config.market;
  auto chat = make_chat_backend(backend_options(gg, lc));
  Gateway gateway(chat, nullptr, 8);
  Orchestrator orch(gateway, PrefixLibrary(resource_dir(g)));

  const ImplantResult result = implant(orch, logs, periods, agents, sentences);
  const std::filesystem::path root(g.out);
  std::filesystem::create_directories(root);
  write_file(root / "counterfactuals.csv", counterfactual_csv(result.records));
  std::string jsonl;
  for (const auto& r : result.records) {
    jsonl += json{{"run_id", r.run_id},   {"prefix_id", r.prefix_id},
                  {"period", r.period},   {"agent", r.agent},
                  {"sentence", r.sentence}, {"original", r.original},
                  {"counterfactual", r.counterfactual}, {"scale", r.scale},
                  {"delta", r.delta}}
                 .dump() +
             "\n";
  }
  write_file(root / "counterfactuals.jsonl", jsonl);
  json report = {{"records", result.records.size()}, {"errors", json::array()}};
  for (const auto& e : result.errors) {
    report["errors"].push_back({{"run_id", e.run_id}, {"period", e.period}, {"agent", e.agent},
                                {"sentence_index", e.sentence_index}, {"message", e.message}});
  }
  if (result.records.size() >= 2) report["effect"] = to_json(implantation_effect(result.records));
  write_file(root / "effect.json", report.dump(2) + "\n");
  out << result.records.size() << " counterfactual records, " << result.errors.size()
      << " errors\n";
  return kExitOk;
}

int cmd_analyze(const Globals& g, const std::string& runs_dir, const std::string& prefix,
                std::ostream& out) {
  if (runs_dir.empty()) throw ConfigError("analyze: --runs is required");
  if (g.out.empty()) throw ConfigError("analyze: --out is required");
  const auto logs = load_runs(runs_dir);
  if (logs.empty()) throw ConfigError("analyze: no run logs under " + runs_dir);
  const std::filesystem::path root(g.out);
  std::filesystem::create_directories(root);
  json report = {{"runs", logs.size()}};

  std::vector<RunSummary> summaries;
  for (const auto& l : logs) {
    if (static_cast<int>(l.records.size()) >= kSummaryWindow) summaries.push_back(summarize_run(l));
  }
  write_file(root / "summary.csv", summary_csv(summaries));
  report["summarized_runs"] = summaries.size();

  std::string conv = "run_id,agent,target_kind,target,converged\n";
  json capture = json::array();
  for (const auto& l : logs) {
    if (l.records.size() < 300 || l.config.environment == MarketKind::kAuction) continue;
    const RunSummary s = summarize_run(l);
    std::vector<std::pair<std::string, Eigen::VectorXd>> targets;
    MarketParams unit = l.config.market.with_alpha(1.0);
    if (l.config.environment == MarketKind::kMonopoly) {
      Eigen::VectorXd t(1);
      t(0) = single_monopoly_price(unit, 0).price;
      targets.emplace_back("monopoly", t);
      const double optimum = single_monopoly_price(l.config.market, 0).value;
      capture.push_back({{"run_id", l.config.run_id},
                         {"fraction_at_99pct", profit_capture(l, optimum).fraction}});
    } else {
      targets.emplace_back("nash", nash_prices(unit));
      targets.emplace_back("joint_monopoly", joint_monopoly_prices(unit));
    }
    for (const auto& [kind, t] : targets) {
      for (int i = 0; i < l.config.agents(); ++i) {
        conv += l.config.run_id + "," + std::to_string(i) + "," + kind + "," + f2(t(i)) + "," +
                (convergence_check(s.price_series[i], t(i)) ? "true" : "false") + "\n";
      }
    }
  }
  write_file(root / "convergence.csv", conv);
  report["profit_capture"] = capture;

  std::vector<RunLog> eligible;
  for (const auto& l : logs) {
    if (l.config.environment == MarketKind::kDuopoly && l.config.agents() == 2 &&
        l.records.size() >= 300)
      eligible.push_back(l);
  }
  if (!eligible.empty()) {
    const std::optional<std::string> filter =
        prefix.empty() ? std::nullopt : std::optional<std::string>(prefix);
    try {
      const RegressionResult r = responsiveness_regression(eligible, filter);
      write_file(root / "regression.csv", regression_table(r));
      report["regression"] = to_json(r);
    } catch (const std::exception& e) {
      report["regression"] = {{"error", e.what()}};
    }
  } else {
    report["regression"] = {{"error", "no two-firm runs with 300 periods"}};
  }
  write_file(root / "report.json", report.dump(2) + "\n");
  out << "analyzed " << logs.size() << " runs\n";
  return kExitOk;
}

struct TextlabOptions {
  std::string runs;
  std::string embedder = "fixture";
  std::string embedding_fixture;
  int k = 20;
  std::uint64_t seed = 0;
  double variance = 0.5;
  int components = 20;
};

std::shared_ptr<EmbeddingBackend> make_embedder(const Globals& g, const std::string& kind,
                                                const std::string& fixture) {
  if (kind == "hashing") return std::make_shared<HashingEmbedder>();
  if (kind == "live") {
    LiveConfig cfg;
    cfg.api_key_env = g.api_key_env;
    if (!g.base_url.empty()) cfg.base_url = g.base_url;
    return std::make_shared<LiveBackend>(cfg, nullptr);
  }
  if (kind == "fixture") {
    const std::filesystem::path path =
        fixture.empty() ? resource_dir(g) / "fixtures" / "embeddings" / "text-embedding-3-large.jsonl"
                        : std::filesystem::path(fixture);
    return std::make_shared<FixtureEmbedder>(FixtureEmbedder::load(path));
  }
  throw ConfigError("unknown embedder: " + kind);
}

std::vector<Eigen::VectorXd> embed_all(Gateway& gw, const std::vector<std::string>& texts) {
  std::map<std::string, Eigen::VectorXd> cache;
  std::vector<std::string> unique;
  for (const auto& t : texts) {
    if (cache.emplace(t, Eigen::VectorXd()).second) unique.push_back(t);
  }
  constexpr std::size_t kBatch = 256;
  for (std::size_t i = 0; i < unique.size(); i += kBatch) {
    std::vector<std::string> batch(unique.begin() + static_cast<long>(i),
                                   unique.begin() + static_cast<long>(std::min(unique.size(), i + kBatch)));
    const EmbeddingBatch b = gw.embed(batch);
    for (std::size_t k = 0; k < batch.size(); ++k) cache[batch[k]] = b.vectors[k];
  }
  std::vector<Eigen::VectorXd> out;
  for (const auto& t : texts) out.push_back(cache.at(t));
  return out;
}

int cmd_textlab(const Globals& g, const TextlabOptions& o, std::ostream& out) {
  if (o.runs.empty()) throw ConfigError("textlab: --runs is required");
  if (g.out.empty()) throw ConfigError("textlab: --out is required");
  const auto logs = load_runs(o.runs);
  if (logs.empty()) throw ConfigError("textlab: no run logs under " + o.runs);
  const auto sentences = extract_sentences(logs);

  BackendOptions bo;
  bo.spec = g.backend.empty() ? "scripted:fixed-price" : g.backend;
  bo.api_key_env = g.api_key_env;
  bo.model = g.model;
  bo.base_url = g.base_url;
  bo.transcripts = g.transcripts;
  Gateway gw(make_chat_backend(bo), make_embedder(g, o.embedder, o.embedding_fixture), 8);

  const std::filesystem::path root(g.out);
  std::filesystem::create_directories(root);
  std::string corpus;
  for (const auto& s : sentences) corpus += to_json(s).dump() + "\n";
  write_file(root / "corpus.jsonl", corpus);
  json report = {{"sentences", sentences.size()}, {"embedder", gw.embedder()->model_id()}};

  const auto war = filter_phrase(sentences);
  std::string cls = "run_id,prefix,period,agent,label,score,text\n";
  long avoid_count = 0;
  if (!war.empty()) {
    const auto avoid = build_reference("AvoidPriceWar", load_sentence_set("avoid-reference", resource_dir(g)), gw);
    const auto start = build_reference("StartPriceWar", load_sentence_set("start-reference", resource_dir(g)), gw);
    std::vector<std::string> texts;
    for (const auto& s : war) texts.push_back(s.text);
    const auto vecs = embed_all(gw, texts);
    for (std::size_t i = 0; i < war.size(); ++i) {
      const Classification c = classify_price_war(vecs[i], avoid, start);
      avoid_count += c.label == WarLabel::kAvoid ? 1 : 0;
      std::string text = war[i].text;
      std::replace(text.begin(), text.end(), '"', '\'');
      char score[32];
      std::snprintf(score, sizeof score, "%.6f", c.score);
      cls += war[i].run_id + "," + war[i].prefix_id + "," + std::to_string(war[i].period) + "," +
             std::to_string(war[i].agent) + "," + to_string(c.label) + "," + score + ",\"" + text +
             "\"\n";
    }
  }
  write_file(root / "classification.csv", cls);
  report["price_war_sentences"] = war.size();
  report["avoid"] = avoid_count;

  if (static_cast<int>(sentences.size()) >= std::max(o.k, 2)) {
    std::vector<std::string> texts;
    std::vector<std::string> prefixes;
    for (const auto& s : sentences) {
      texts.push_back(s.text);
      prefixes.push_back(s.prefix_id);
    }
    const Eigen::MatrixXd data = stack_rows(embed_all(gw, texts));
    const PcaModel pca = pca_fit(data, o.variance, o.components);
    const Eigen::MatrixXd reduced = pca.project(data);
    const KMeansResult km = kmeans(reduced, o.k, o.seed);
    json clusters = json::array();
    for (int c = 0; c < o.k; ++c) {
      const long size = std::count(km.assignments.begin(), km.assignments.end(), c);
      clusters.push_back({{"cluster", c},
                          {"size", size},
                          {"summary", size > 0 ? summarize_cluster(texts, reduced, km, c, gw) : ""}});
    }
    json doc = {{"k", o.k},
                {"seed", o.seed},
                {"components", pca.components.rows()},
                {"explained_variance", pca.retained_ratio},
                {"inertia", km.inertia},
                {"iterations", km.iterations},
                {"clusters", clusters},
                {"assignments", km.assignments}};
    write_file(root / "clusters.json", doc.dump(2) + "\n");
    const auto rows = relative_prevalence(km.assignments, prefixes, o.k);
    std::set<std::string> names(prefixes.begin(), prefixes.end());
    std::string csv = "cluster,size";
    for (const auto& p : names) csv += ",share_" + p + ",relative_" + p;
    csv += "\n";
    for (const auto& r : rows) {
      csv += std::to_string(r.cluster) + "," + std::to_string(r.size);
      for (const auto& p : names) {
        char buf[64];
        std::snprintf(buf, sizeof buf, ",%.6f,%.6f", r.share.at(p), r.relative.at(p));
        csv += buf;
      }
      csv += "\n";
    }
    write_file(root / "prevalence.csv", csv);
    report["clusters"] = o.k;
  } else {
    report["clusters"] = 0;
  }
  write_file(root / "textlab.json", report.dump(2) + "\n");
  out << sentences.size() << " sentences, " << war.size() << " mention a price war\n";
  return kExitOk;
}

int cmd_validate_prompts(const Globals& g, std::ostream& out) {
  const auto checks = validate_prompts(resource_dir(g));
  bool ok = !checks.empty();
  for (const auto& c : checks) {
    out << (c.ok ? "PASS " : "FAIL ") << c.name << ": " << c.message << '\n';
    ok = ok && c.ok;
  }
  if (checks.empty()) out << "FAIL no prompt fixtures found\n";
  return ok ? kExitOk : kExitFixture;
}

int cmd_record_embeddings(const Globals& g, const std::string& sets, const std::string& embedder,
                          std::ostream& out) {
  if (g.out.empty()) throw ConfigError("record-embeddings: --out is required");
  auto inner = make_embedder(g, embedder, "");
  auto recorder = std::make_shared<RecordingEmbedder>(inner);
  Gateway gw(nullptr, recorder, 8);
  std::stringstream ss(sets);
  std::string name;
  while (std::getline(ss, name, ',')) {
    if (name.empty()) continue;
    gw.embed(load_sentence_set(name, resource_dir(g)));
  }
  recorder->recorded().save(g.out);
  out << "recorded " << recorder->recorded().size() << " vectors from " << recorder->model_id() << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Experiment harness for LLM pricing and bidding agents"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config, "Experiment config (JSON)");
  app.add_option("--out", g.out, "Output directory (or file for record-embeddings)");
  app.add_option("--backend", g.backend, "live | scripted:<strategy>[:params] | fixture");
  auto* seed_opt = app.add_option("--seed", seed, "Base seed");
  app.add_option("--parallel", g.parallel, "Concurrent runs");
  app.add_option("--model", g.model, "Chat model identifier");
  app.add_option("--api-key-env", g.api_key_env, "Environment variable holding the credential");
  app.add_option("--resources", g.resources, "Resource directory");
  app.add_option("--base-url", g.base_url, "Service base URL");
  app.add_option("--transcripts", g.transcripts, "Recorded completions for the fixture backend");

  auto* eq = app.add_subcommand("equilibria", "Benchmark prices and profits per scale");
  auto* run = app.add_subcommand("run", "Run an experiment grid");

  ImplantOptions io;
  auto* imp = app.add_subcommand("implant", "Counterfactual plan implantation");
  imp->add_option("--runs", io.runs, "Directory holding runs/")->required();
  imp->add_option("--set", io.set, "Built-in sentence set (price-war, undercut)");
  imp->add_option("--sentences", io.sentences_file, "File with one sentence per line");
  imp->add_option("--periods", io.periods, "Periods, e.g. 2-13");
  imp->add_option("--agents", io.agents, "Agent indices, e.g. 0,1");

  std::string analyze_runs, analyze_prefix;
  auto* ana = app.add_subcommand("analyze", "Summaries, convergence and regression");
  ana->add_option("--runs", analyze_runs, "Directory holding runs/")->required();
  ana->add_option("--prefix", analyze_prefix, "Only runs where every agent uses this prefix");

  TextlabOptions to;
  auto* tl = app.add_subcommand("textlab", "Sentence classification and clustering");
  tl->add_option("--runs", to.runs, "Directory holding runs/")->required();
  tl->add_option("--embedder", to.embedder, "fixture | hashing | live");
  tl->add_option("--embedding-fixture", to.embedding_fixture, "Embedding fixture JSONL");
  tl->add_option("--k", to.k, "Number of clusters");
  tl->add_option("--variance", to.variance, "PCA variance target");
  tl->add_option("--components", to.components, "PCA component cap");

  auto* vp = app.add_subcommand("validate-prompts", "Byte-compare assembled prompts with fixtures");

  std::string sets = "avoid-reference,start-reference,classifier-avoid,classifier-start";
  std::string rec_embedder = "live";
  auto* rec = app.add_subcommand("record-embeddings", "Record embedding fixtures for sentence sets");
  rec->add_option("--sets", sets, "Comma-separated sentence sets");
  rec->add_option("--embedder", rec_embedder, "live | hashing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  if (*seed_opt) g.seed = seed;
  to.seed = g.seed.value_or(0);

  try {
    if (*eq) return cmd_equilibria(g, out);
    if (*run) return cmd_run(g, out, err);
    if (*imp) return cmd_implant(g, io, out);
    if (*ana) return cmd_analyze(g, analyze_runs, analyze_prefix, out);
    if (*tl) return cmd_textlab(g, to, out);
    if (*vp) return cmd_validate_prompts(g, out);
    if (*rec) return cmd_record_embeddings(g, sets, rec_embedder, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const FixtureMissError& e) {
    err << "fixture mismatch: " << e.what() << '\n';
    return kExitFixture;
  } catch (const RunAbort& e) {
    err << "run aborted: " << e.what() << '\n';
    return kExitAbort;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace collab
