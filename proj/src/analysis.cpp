#include "collab/analysis.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace collab {

using nlohmann::json;

RunSummary summarize_run(const RunLog& log) {
  const auto n = static_cast<int>(log.records.size());
  if (n < kSummaryWindow)
    throw ContractViolation("summarize_run: need at least " + std::to_string(kSummaryWindow) +
                            " periods, got " + std::to_string(n));
  const int agents = log.config.agents();
  const double s = log.config.scale;
  RunSummary out;
  out.run_id = log.config.run_id;
  out.scale = s;
  out.mean_price.assign(agents, 0.0);
  out.mean_profit.assign(agents, 0.0);
  out.price_series.assign(agents, {});
  for (int t = 0; t < n; ++t) {
    for (int i = 0; i < agents; ++i) out.price_series[i].push_back(log.records[t].agents[i].value / s);
  }
  for (int t = n - kSummaryWindow; t < n; ++t) {
    for (int i = 0; i < agents; ++i) {
      out.mean_price[i] += log.records[t].agents[i].value / s;
      out.mean_profit[i] += log.records[t].agents[i].profit / s;
    }
  }
  for (int i = 0; i < agents; ++i) {
    out.mean_price[i] /= kSummaryWindow;
    out.mean_profit[i] /= kSummaryWindow;
    out.mean_total_profit += out.mean_profit[i];
  }
  return out;
}

bool convergence_check(const std::vector<double>& series, double target) {
  if (series.size() < 300) throw ContractViolation("convergence_check: series must cover periods 201-300");
  if (!(target > 0.0)) throw ContractViolation("convergence_check: target must be > 0");
  const std::vector<double> window(series.begin() + 200, series.begin() + 300);
  const double p10 = percentile(window, 0.10);
  const double p90 = percentile(window, 0.90);
  return std::abs(p10 - target) <= 0.05 * target && std::abs(p90 - target) <= 0.05 * target;
}

ProfitCapture profit_capture(const RunLog& log, double optimum_profit, int agent) {
  if (!(optimum_profit > 0.0)) throw ContractViolation("profit_capture: optimum must be > 0");
  ProfitCapture out;
  for (const auto& r : log.records) out.share.push_back(r.agents.at(agent).profit / optimum_profit);
  const std::size_t first = 100;
  const std::size_t last = std::min<std::size_t>(300, out.share.size());
  if (last <= first) throw ContractViolation("profit_capture: no periods from 101 onwards");
  long hits = 0;
  for (std::size_t t = first; t < last; ++t) hits += out.share[t] >= 0.99 ? 1 : 0;
  out.fraction = static_cast<double>(hits) / static_cast<double>(last - first);
  return out;
}

std::vector<PanelObservation> pair_observations(const std::vector<RunLog>& logs,
                                                const std::optional<std::string>& prefix_filter) {
  std::vector<PanelObservation> obs;
  for (const auto& log : logs) {
    if (prefix_filter) {
      bool match = true;
      for (const auto& p : log.config.prefixes) match = match && p == *prefix_filter;
      if (!match) continue;
    }
    if (log.config.agents() != 2)
      throw ContractViolation("regression: run " + log.config.run_id + " is not a two-firm market");
    if (log.records.size() < 300)
      throw ContractViolation("regression: run " + log.config.run_id + " has fewer than 300 periods");
    const double s = log.config.scale;
    for (int t = 102; t <= 300; t += 2) {
      const int self = ((t - 102) / 2) % 2;
      const int other = 1 - self;
      const auto& now = log.records[t - 1];
      const auto& prev = log.records[t - 2];
      obs.push_back({log.config.run_id + "#" + std::to_string(self), now.agents[self].value / s,
                     prev.agents[self].value / s, prev.agents[other].value / s});
    }
  }
  return obs;
}

RegressionResult fit_panel(const std::vector<PanelObservation>& obs) {
  if (obs.empty()) throw ContractViolation("regression: no observations");
  std::map<std::string, std::array<double, 4>> sums;  // y, own, rival, count
  for (const auto& o : obs) {
    auto& s = sums[o.group];
    s[0] += o.y;
    s[1] += o.own_lag;
    s[2] += o.rival_lag;
    s[3] += 1.0;
  }
  const long n = static_cast<long>(obs.size());
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n), y_raw(n);
  for (long k = 0; k < n; ++k) {
    const auto& o = obs[k];
    const auto& s = sums[o.group];
    y(k) = o.y - s[0] / s[3];
    X(k, 0) = o.own_lag - s[1] / s[3];
    X(k, 1) = o.rival_lag - s[2] / s[3];
    y_raw(k) = o.y;
  }
  const OlsFit fit = ols_hc1(X, y, static_cast<long>(sums.size()));
  RegressionResult r;
  r.gamma = fit.coef(0);
  r.delta = fit.coef(1);
  r.gamma_se = fit.robust_se(0);
  r.delta_se = fit.robust_se(1);
  r.n = n;
  r.r2_within = fit.r2;
  r.residuals = fit.residuals;
  r.demeaned_regressors = X;
  const double tss = (y_raw.array() - y_raw.mean()).square().sum();
  r.r2_overall = tss > 0.0 ? 1.0 - fit.residuals.squaredNorm() / tss : 1.0;
  for (const auto& [group, s] : sums) {
    const auto hash = group.rfind('#');
    const double fe = s[0] / s[3] - r.gamma * s[1] / s[3] - r.delta * s[2] / s[3];
    r.fixed_effects[{group.substr(0, hash), std::stoi(group.substr(hash + 1))}] = fe;
  }
  return r;
}

RegressionResult responsiveness_regression(const std::vector<RunLog>& logs,
                                           const std::optional<std::string>& prefix_filter) {
  return fit_panel(pair_observations(logs, prefix_filter));
}

TTest robust_welch(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) throw ContractViolation("welch: each sample needs >= 2 values");
  const double va = sample_variance(a);
  const double vb = sample_variance(b);
  if (va > 0.0 || vb > 0.0) return welch_t(a, b);
  TTest r;
  const double diff = mean(a) - mean(b);
  if (std::abs(diff) <= 1e-12 * std::max(1.0, std::abs(mean(a)))) return r;
  r.t = diff > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
  r.dof = static_cast<double>(a.size() + b.size() - 2);
  r.p = 0.0;
  return r;
}

namespace {

StratumEffect effect_of(const std::string& label, const std::vector<const CounterfactualRecord*>& rs) {
  StratumEffect e;
  e.label = label;
  e.n = static_cast<long>(rs.size());
  std::vector<double> cf, orig, deltas;
  for (const auto* r : rs) {
    cf.push_back(r->counterfactual / r->scale);
    orig.push_back(r->original / r->scale);
    deltas.push_back(r->delta);
  }
  if (!deltas.empty()) e.mean_delta = mean(deltas);
  if (rs.size() >= 2) e.test = robust_welch(cf, orig);
  return e;
}

}  // namespace

EffectEstimate implantation_effect(const std::vector<CounterfactualRecord>& records) {
  EffectEstimate out;
  std::vector<const CounterfactualRecord*> all;
  std::map<std::string, std::vector<const CounterfactualRecord*>> by_prefix;
  for (const auto& r : records) {
    all.push_back(&r);
    by_prefix[r.prefix_id].push_back(&r);
  }
  const StratumEffect overall = effect_of("all", all);
  out.n = overall.n;
  out.mean_delta = overall.mean_delta;
  out.test = overall.test;
  for (const auto& [label, rs] : by_prefix) out.strata.push_back(effect_of(label, rs));
  if (by_prefix.size() >= 2) {
    auto it = by_prefix.begin();
    std::vector<double> d1, d2;
    for (const auto* r : it->second) d1.push_back(r->delta);
    ++it;
    for (const auto* r : it->second) d2.push_back(r->delta);
    if (d1.size() >= 2 && d2.size() >= 2) out.between = robust_welch(d2, d1);
  }
  return out;
}

namespace {

std::string num(double x, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

json ttest_json(const TTest& t) {
  auto finite = [](double x) { return std::isfinite(x) ? json(x) : json(x > 0 ? "inf" : "-inf"); };
  return {{"t", finite(t.t)}, {"dof", t.dof}, {"p", t.p}};
}

}  // namespace

std::string summary_csv(const std::vector<RunSummary>& summaries) {
  std::ostringstream out;
  out << "run_id,scale,agent,mean_price,mean_profit,mean_total_profit\n";
  for (const auto& s : summaries) {
    for (std::size_t i = 0; i < s.mean_price.size(); ++i) {
      out << csv_field(s.run_id) << ',' << num(s.scale, 4) << ',' << i << ','
          << num(s.mean_price[i]) << ',' << num(s.mean_profit[i]) << ','
          << num(s.mean_total_profit) << '\n';
    }
  }
  return out.str();
}

std::string regression_table(const RegressionResult& r) {
  std::ostringstream out;
  out << "term,estimate,robust_se\n";
  out << "gamma (own lag)," << num(r.gamma, 3) << ',' << num(r.gamma_se, 3) << '\n';
  out << "delta (competitor lag)," << num(r.delta, 3) << ',' << num(r.delta_se, 3) << '\n';
  out << "N," << r.n << ",\n";
  out << "R2 within," << num(r.r2_within, 3) << ",\n";
  out << "R2 overall," << num(r.r2_overall, 3) << ",\n";
  out << "firm-run fixed effects," << r.fixed_effects.size() << ",\n";
  return out.str();
}

std::string counterfactual_csv(const std::vector<CounterfactualRecord>& records) {
  std::ostringstream out;
  out << "run_id,prefix,period,agent,sentence_index,original,counterfactual,scale,delta\n";
  for (const auto& r : records) {
    out << csv_field(r.run_id) << ',' << csv_field(r.prefix_id) << ',' << r.period << ','
        << r.agent << ',' << r.sentence_index << ',' << num(r.original, 2) << ','
        << num(r.counterfactual, 2) << ',' << num(r.scale, 4) << ',' << num(r.delta, 6) << '\n';
  }
  return out.str();
}

json to_json(const RegressionResult& r) {
  return {{"gamma", r.gamma},         {"gamma_se", r.gamma_se},   {"delta", r.delta},
          {"delta_se", r.delta_se},   {"n", r.n},                 {"r2_within", r.r2_within},
          {"r2_overall", r.r2_overall}, {"groups", r.fixed_effects.size()}};
}

json to_json(const EffectEstimate& e) {
  json strata = json::array();
  for (const auto& s : e.strata) {
    strata.push_back({{"label", s.label}, {"n", s.n}, {"mean_delta", s.mean_delta},
                      {"test", ttest_json(s.test)}});
  }
  json j = {{"n", e.n}, {"mean_delta", e.mean_delta}, {"test", ttest_json(e.test)}, {"strata", strata}};
  j["between"] = e.between ? ttest_json(*e.between) : json(nullptr);
  return j;
}

}  // namespace collab
