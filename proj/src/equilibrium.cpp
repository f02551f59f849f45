#include "collab/equilibrium.hpp"

#include <algorithm>
#include <cmath>

namespace collab {

namespace {

constexpr double kInvPhi = 0.6180339887498949;

double own_profit(const Eigen::VectorXd& prices, Eigen::Index firm, const MarketParams& params) {
  const Eigen::VectorXd q = logit_demand(prices, params);
  return firm_profit(prices(firm), q(firm), params.cost(firm), params.alpha);
}

double total_profit(const Eigen::VectorXd& prices, const MarketParams& params) {
  return firm_profits(prices, logit_demand(prices, params), params).sum();
}

std::pair<double, double> search_interval(const MarketParams& params, Eigen::Index firm,
                                          const SolverConfig& cfg) {
  const double lo = params.alpha * params.cost(firm);
  return {lo, lo + params.alpha * cfg.initial_markup};
}

}  // namespace

void SolverConfig::validate() const {
  if (!(scalar_tolerance > 0.0) || !(fixed_point_tolerance > 0.0))
    throw ContractViolation("solver: tolerances must be positive");
  if (!(damping > 0.0 && damping <= 1.0)) throw ContractViolation("solver: damping in (0, 1]");
  if (max_iterations < 1) throw ContractViolation("solver: max_iterations must be >= 1");
  if (!(initial_markup > 0.0)) throw ContractViolation("solver: initial_markup must be > 0");
}

ScalarOptimum maximize_unimodal(const std::function<double(double)>& objective, double lo,
                                double hi, double tolerance, int max_expansions) {
  if (!(hi > lo)) throw ContractViolation("maximize_unimodal: empty interval");
  const double floor = lo;
  for (int expansion = 0;; ++expansion) {
    double a = lo, b = hi;
    double x1 = b - kInvPhi * (b - a);
    double x2 = a + kInvPhi * (b - a);
    double f1 = objective(x1), f2 = objective(x2);
    while (b - a > tolerance) {
      if (f1 < f2) {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + kInvPhi * (b - a);
        f2 = objective(x2);
      } else {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - kInvPhi * (b - a);
        f1 = objective(x1);
      }
    }
    const double x = 0.5 * (a + b);
    ScalarOptimum opt{x, objective(x), false};
    const bool on_upper = (hi - x) <= 2.0 * tolerance;
    if (on_upper && expansion < max_expansions) {
      hi = floor + 2.0 * (hi - floor);
      continue;
    }
    opt.at_boundary = on_upper || (x - floor) <= 2.0 * tolerance;
    return opt;
  }
}

ScalarOptimum best_response(const Eigen::VectorXd& prices, Eigen::Index firm,
                            const MarketParams& params, const SolverConfig& cfg) {
  params.validate();
  cfg.validate();
  if (firm < 0 || firm >= params.firms()) throw ContractViolation("best_response: bad firm index");
  if (prices.size() != params.firms())
    throw ContractViolation("best_response: one price per firm required");

  Eigen::VectorXd trial = prices;
  auto objective = [&](double p) {
    trial(firm) = p;
    return own_profit(trial, firm, params);
  };
  const auto [lo, hi] = search_interval(params, firm, cfg);
  return maximize_unimodal(objective, lo, hi, cfg.scalar_tolerance * params.alpha,
                           cfg.max_bracket_expansions);
}

Eigen::VectorXd nash_prices(const MarketParams& params, const SolverConfig& cfg) {
  params.validate();
  cfg.validate();
  const Eigen::Index n = params.firms();
  Eigen::VectorXd p = params.alpha * (params.cost.array() + params.mu).matrix();
  Eigen::VectorXd response(n);
  const double tol = cfg.fixed_point_tolerance * params.alpha;

  for (int it = 0; it < cfg.max_iterations; ++it) {
    for (Eigen::Index i = 0; i < n; ++i) response(i) = best_response(p, i, params, cfg).price;
    const double residual = (response - p).cwiseAbs().maxCoeff();
    if (residual < tol) return response;
    p += cfg.damping * (response - p);
  }
  throw NonConvergence("nash_prices: best-response iteration did not converge", p);
}

Eigen::VectorXd joint_monopoly_prices(const MarketParams& params, const SolverConfig& cfg) {
  params.validate();
  cfg.validate();
  const Eigen::Index n = params.firms();
  Eigen::VectorXd p = params.alpha * (params.cost.array() + params.mu).matrix();
  const double tol = cfg.fixed_point_tolerance * params.alpha;

  for (int it = 0; it < cfg.max_iterations; ++it) {
    double change = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::VectorXd trial = p;
      auto objective = [&](double x) {
        trial(i) = x;
        return total_profit(trial, params);
      };
      const auto [lo, hi] = search_interval(params, i, cfg);
      const double next = maximize_unimodal(objective, lo, hi, cfg.scalar_tolerance * params.alpha,
                                            cfg.max_bracket_expansions)
                              .price;
      change = std::max(change, std::abs(next - p(i)));
      p(i) = next;
    }
    if (change < tol) return p;
  }
  throw NonConvergence("joint_monopoly_prices: coordinate ascent did not converge", p);
}

ScalarOptimum single_monopoly_price(const MarketParams& params, Eigen::Index firm,
                                    const SolverConfig& cfg) {
  params.validate();
  if (firm < 0 || firm >= params.firms())
    throw ContractViolation("single_monopoly_price: bad firm index");
  const MarketParams alone = params.only_firm(firm);
  return best_response(Eigen::VectorXd::Zero(1), 0, alone, cfg);
}

double price_ceiling(double joint_monopoly_price, double multiplier, bool allow_any_multiplier) {
  if (!allow_any_multiplier && (multiplier < 1.5 || multiplier > 2.5))
    throw ContractViolation("price_ceiling: multiplier outside [1.5, 2.5]");
  return round_cents(multiplier * joint_monopoly_price);
}

double draw_ceiling_multiplier(Rng& rng) { return rng.uniform(1.5, 2.5); }

Benchmarks compute_benchmarks(const MarketParams& params, double ceiling_multiplier,
                              const SolverConfig& cfg) {
  Benchmarks b;
  b.nash_prices = nash_prices(params, cfg);
  b.nash_profits = firm_profits(b.nash_prices, logit_demand(b.nash_prices, params), params);
  b.monopoly_prices = joint_monopoly_prices(params, cfg);
  b.monopoly_profits =
      firm_profits(b.monopoly_prices, logit_demand(b.monopoly_prices, params), params);
  b.monopoly_total_profit = b.monopoly_profits.sum();
  for (Eigen::Index i = 0; i < params.firms(); ++i)
    b.single_monopoly_prices.push_back(single_monopoly_price(params, i, cfg).price);
  b.ceiling = price_ceiling(b.monopoly_prices.maxCoeff(), ceiling_multiplier, true);
  return b;
}

double auction_nash(const AuctionParams& params) {
  params.validate();
  return params.value;
}

std::vector<double> auction_cent_grid_equilibria(const AuctionParams& params) {
  params.validate();
  return {round_cents(params.value), round_cents(params.value - 0.01)};
}

}  // namespace collab
