#pragma once

#include <json.hpp>

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "collab/orchestrator.hpp"
#include "collab/stats.hpp"

namespace collab {

inline constexpr int kSummaryWindow = 50;

// Last-50-period means, everything divided by the run's scale (alpha).
struct RunSummary {
  std::string run_id;
  double scale = 1.0;
  std::vector<double> mean_price;
  std::vector<double> mean_profit;
  double mean_total_profit = 0.0;
  std::vector<std::vector<double>> price_series;  // [agent][period - 1], normalized
};

RunSummary summarize_run(const RunLog& log);

// True iff the 10th and 90th percentiles of periods 201-300 are both within
// 5% of `target`. `series` starts at period 1 and must reach period 300.
bool convergence_check(const std::vector<double>& series, double target);

struct ProfitCapture {
  std::vector<double> share;  // per period, profit / optimum
  double fraction = 0.0;      // periods 101-300 with share >= 0.99
};

ProfitCapture profit_capture(const RunLog& log, double optimum_profit, int agent = 0);

// p_t = alpha_{i,r} + gamma p_{t-1} + delta p_{-i,t-1} + e on disjoint period
// pairs (t - 1, t), t = 102, 104, ..., 300, alternating the dependent firm.
struct RegressionResult {
  double gamma = 0.0;
  double delta = 0.0;
  double gamma_se = 0.0;
  double delta_se = 0.0;
  long n = 0;
  double r2_within = 0.0;
  double r2_overall = 0.0;  // with the fixed effects as fitted values
  std::map<std::pair<std::string, int>, double> fixed_effects;  // (run id, firm)
  Eigen::VectorXd residuals;
  Eigen::MatrixXd demeaned_regressors;
};

struct PanelObservation {
  std::string group;  // firm-run identifier
  double y = 0.0;
  double own_lag = 0.0;
  double rival_lag = 0.0;
};

// Pairs a set of two-firm logs into panel observations (prices divided by alpha).
std::vector<PanelObservation> pair_observations(const std::vector<RunLog>& logs,
                                                const std::optional<std::string>& prefix_filter = {});

RegressionResult fit_panel(const std::vector<PanelObservation>& obs);

RegressionResult responsiveness_regression(const std::vector<RunLog>& logs,
                                           const std::optional<std::string>& prefix_filter = {});

struct StratumEffect {
  std::string label;
  long n = 0;
  double mean_delta = 0.0;
  TTest test;
};

struct EffectEstimate {
  long n = 0;
  double mean_delta = 0.0;
  TTest test;  // counterfactual vs original prices, both divided by alpha
  std::vector<StratumEffect> strata;
  std::optional<TTest> between;  // deltas of the first two strata
};

// Welch test that tolerates zero-variance samples: equal means give t = 0,
// p = 1; different means give p = 0.
TTest robust_welch(const std::vector<double>& a, const std::vector<double>& b);

EffectEstimate implantation_effect(const std::vector<CounterfactualRecord>& records);

// Reports.
std::string summary_csv(const std::vector<RunSummary>& summaries);
std::string regression_table(const RegressionResult& r);
std::string counterfactual_csv(const std::vector<CounterfactualRecord>& records);
nlohmann::json to_json(const RegressionResult& r);
nlohmann::json to_json(const EffectEstimate& e);

}  // namespace collab
