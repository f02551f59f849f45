#include <doctest.h>

#include <cmath>
#include <random>

#include "collab/analysis.hpp"
#include "oracles.hpp"
#include "synthetic_logs.hpp"

using namespace collab;

namespace {

std::vector<PanelObservation> to_obs(const std::vector<oracle::PanelRow>& rows) {
  std::vector<PanelObservation> out;
  for (const auto& r : rows) out.push_back({r.group + "#0", r.y, r.own, r.rival});
  return out;
}

}  // namespace

TEST_CASE("noiseless panels are recovered exactly") {
  const auto rows = oracle::synthetic_panel(0.484, 0.103, 0.0, 21, 100, 1);
  const RegressionResult r = fit_panel(to_obs(rows));
  CHECK(std::abs(r.gamma - 0.484) < 1e-8);
  CHECK(std::abs(r.delta - 0.103) < 1e-8);
  CHECK(r.n == 2100);
  CHECK(r.fixed_effects.size() == 21);
  CHECK(r.r2_within == doctest::Approx(1.0));
}

TEST_CASE("robust intervals cover the truth") {
  int gamma_hits = 0, delta_hits = 0;
  const int reps = 200;
  for (int s = 0; s < reps; ++s) {
    const auto rows = oracle::synthetic_panel(0.28, 0.022, 0.3, 21, 100, 1000 + s);
    const RegressionResult r = fit_panel(to_obs(rows));
    gamma_hits += std::abs(r.gamma - 0.28) <= 3 * r.gamma_se;
    delta_hits += std::abs(r.delta - 0.022) <= 3 * r.delta_se;
  }
  CHECK(gamma_hits >= 0.95 * reps);
  CHECK(delta_hits >= 0.95 * reps);
}

TEST_CASE("fixed effects are absorbed") {
  auto rows = oracle::synthetic_panel(0.5, 0.1, 0.0, 3, 50, 2);
  for (auto& r : rows) r.y += r.group == "g1" ? 100.0 : 0.0;
  const RegressionResult r = fit_panel(to_obs(rows));
  CHECK(std::abs(r.gamma - 0.5) < 1e-8);
  CHECK(r.fixed_effects.at({"g1", 0}) - r.fixed_effects.at({"g0", 0}) > 90.0);
}

TEST_CASE("pairing rule gives 100 observations per run with alternating self firm") {
  const RunLog log = synthetic_log("r", 300, [](int t, int i) { return 1.0 + 0.001 * t + 0.5 * i; });
  const auto obs = pair_observations({log});
  REQUIRE(obs.size() == 100);
  CHECK(obs[0].group == "r#0");
  CHECK(obs[1].group == "r#1");
  CHECK(obs[2].group == "r#0");
  // t = 102 with self = 0: y = p0(102), own lag = p0(101), rival lag = p1(101).
  CHECK(obs[0].y == doctest::Approx(1.102));
  CHECK(obs[0].own_lag == doctest::Approx(1.101));
  CHECK(obs[0].rival_lag == doctest::Approx(1.601));
  CHECK(obs[1].own_lag == doctest::Approx(1.603));
  CHECK(obs.back().y == doctest::Approx(1.3 + 0.5));
}

TEST_CASE("regression prices are normalized by alpha") {
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(1.5, 2.0);
  std::vector<double> p0(301), p1(301);
  for (int t = 1; t <= 300; ++t) {
    p0[t] = u(gen);
    p1[t] = u(gen);
  }
  auto f = [&](double s) {
    return synthetic_log("r", 300, [&](int t, int i) { return s * (i ? p1[t] : p0[t]); }, {"P1", "P1"}, s);
  };
  const RegressionResult a = responsiveness_regression({f(1.0)});
  const RegressionResult b = responsiveness_regression({f(10.0)});
  CHECK(a.gamma == doctest::Approx(b.gamma).epsilon(1e-9));
  CHECK(a.delta_se == doctest::Approx(b.delta_se).epsilon(1e-9));
}

TEST_CASE("regression eligibility") {
  const RunLog short_log = synthetic_log("s", 200, [](int, int) { return 1.0; });
  CHECK_THROWS_AS(responsiveness_regression({short_log}), ContractViolation);
  const RunLog p2 = synthetic_log("p2", 300, [](int t, int) { return 1.0 + t % 3; }, {"P2", "P2"});
  CHECK_THROWS_AS(responsiveness_regression({p2}, std::string("P1")), ContractViolation);
}

TEST_CASE("convergence criterion") {
  std::vector<double> s(300, 1.0);
  for (int t = 200; t < 300; ++t) s[t] = 1.47 * (1 + 0.04 * std::sin(t));
  CHECK(convergence_check(s, 1.47));
  s[250] = 3.0;
  CHECK(convergence_check(s, 1.47));
  for (int t = 200; t < 215; ++t) s[t] = 3.0;
  CHECK_FALSE(convergence_check(s, 1.47));
  CHECK_THROWS_AS(convergence_check(std::vector<double>(299, 1.0), 1.0), ContractViolation);
}

TEST_CASE("profit capture over periods 101 to 300") {
  RunLog log = synthetic_log("m", 300, [](int, int) { return 1.8; }, {"P1"});
  for (int t = 1; t <= 300; ++t) log.records[t - 1].agents[0].profit = t > 200 ? 10.0 : 9.0;
  const ProfitCapture c = profit_capture(log, 10.0);
  CHECK(c.fraction == doctest::Approx(0.5));
  CHECK(c.share.size() == 300);
}

TEST_CASE("summaries average the last 50 periods in alpha units") {
  const RunLog log = synthetic_log("s", 100, [](int t, int) { return t <= 50 ? 10.0 : 19.2; }, {"P1", "P1"}, 10.0);
  const RunSummary s = summarize_run(log);
  CHECK(s.mean_price[0] == doctest::Approx(1.92));
  CHECK(s.mean_profit[1] == doctest::Approx(10.0));
  CHECK(s.mean_total_profit == doctest::Approx(20.0));
}

TEST_CASE("implantation effect with degenerate variances") {
  std::vector<CounterfactualRecord> recs;
  for (int k = 0; k < 6; ++k) {
    CounterfactualRecord r;
    r.prefix_id = k < 3 ? "P1" : "P2";
    r.scale = 1.0;
    r.original = 1.8;
    r.counterfactual = 2.0;
    r.delta = 0.2;
    recs.push_back(r);
  }
  const EffectEstimate e = implantation_effect(recs);
  CHECK(e.n == 6);
  CHECK(e.mean_delta == doctest::Approx(0.2));
  CHECK(e.test.p == 0.0);
  CHECK(std::isinf(e.test.t));
  REQUIRE(e.between.has_value());
  CHECK(e.between->p == 1.0);
  CHECK(robust_welch({1, 1}, {1, 1}).p == 1.0);
}

TEST_CASE("implantation effect matches Welch on alpha-normalized prices") {
  std::vector<CounterfactualRecord> recs;
  const double orig[] = {1.8, 1.9, 2.0, 1.85};
  const double cf[] = {2.0, 2.3, 2.1, 2.2};
  std::vector<double> a, b;
  for (int k = 0; k < 4; ++k) {
    CounterfactualRecord r;
    r.prefix_id = "P1";
    r.scale = 3.2;
    r.original = orig[k] * 3.2;
    r.counterfactual = cf[k] * 3.2;
    r.delta = cf[k] - orig[k];
    recs.push_back(r);
    a.push_back(cf[k]);
    b.push_back(orig[k]);
  }
  const EffectEstimate e = implantation_effect(recs);
  CHECK(e.test.t == doctest::Approx(oracle::welch(a, b).t).epsilon(1e-9));
  CHECK_FALSE(e.between.has_value());
}

TEST_CASE("report writers") {
  const auto rows = oracle::synthetic_panel(0.5, 0.1, 0.1, 4, 20, 3);
  const std::string t = regression_table(fit_panel(to_obs(rows)));
  CHECK(t.find("gamma (own lag)") != std::string::npos);
  CHECK(t.find("R2 overall") != std::string::npos);
  CounterfactualRecord r;
  r.run_id = "a,b";
  CHECK(counterfactual_csv({r}).find("\"a,b\"") != std::string::npos);
}
