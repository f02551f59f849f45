#pragma once

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "collab/market.hpp"

namespace collab {

// Tolerances are expressed in alpha = 1 units and scaled by params.alpha.
struct SolverConfig {
  double scalar_tolerance = 1e-9;
  double fixed_point_tolerance = 1e-8;
  double damping = 0.5;
  int max_iterations = 10000;
  // Initial upper bracket is alpha * (cost + initial_markup); it doubles while
  // the optimum sits on the upper edge.
  double initial_markup = 3.0;
  int max_bracket_expansions = 60;

  void validate() const;
};

struct ScalarOptimum {
  double price = 0.0;
  double value = 0.0;
  // Maximum found on the lower edge (alpha * cost) or the expansion limit.
  bool at_boundary = false;
};

class NonConvergence : public std::runtime_error {
 public:
  NonConvergence(const std::string& what, Eigen::VectorXd last)
      : std::runtime_error(what), last_iterate_(std::move(last)) {}
  const Eigen::VectorXd& last_iterate() const noexcept { return last_iterate_; }

 private:
  Eigen::VectorXd last_iterate_;
};

// Golden-section maximization of a unimodal objective on [lo, hi], expanding
// hi while the optimum is pinned to it.
ScalarOptimum maximize_unimodal(const std::function<double(double)>& objective, double lo,
                                double hi, double tolerance, int max_expansions = 60);

// Own-profit maximizing price of `firm` given the other entries of `prices`
// (the firm's own entry is ignored).
ScalarOptimum best_response(const Eigen::VectorXd& prices, Eigen::Index firm,
                            const MarketParams& params, const SolverConfig& cfg = {});

// Static Bertrand-Nash prices via damped simultaneous best responses.
Eigen::VectorXd nash_prices(const MarketParams& params, const SolverConfig& cfg = {});

// Prices maximizing total industry profit (coordinate ascent).
Eigen::VectorXd joint_monopoly_prices(const MarketParams& params, const SolverConfig& cfg = {});

// Profit-maximizing price of `firm` facing only the outside option.
ScalarOptimum single_monopoly_price(const MarketParams& params, Eigen::Index firm,
                                    const SolverConfig& cfg = {});

inline double round_cents(double x) { return std::round(x * 100.0) / 100.0 + 0.0; }

constexpr double kDefaultCeilingMultiplier = 2.34;

// multiplier * joint-monopoly price, rounded to cents for display. Multipliers
// outside [1.5, 2.5] require allow_any_multiplier.
double price_ceiling(double joint_monopoly_price, double multiplier = kDefaultCeilingMultiplier,
                     bool allow_any_multiplier = false);

double draw_ceiling_multiplier(Rng& rng);

struct Benchmarks {
  Eigen::VectorXd nash_prices;
  Eigen::VectorXd nash_profits;
  Eigen::VectorXd monopoly_prices;
  Eigen::VectorXd monopoly_profits;
  double monopoly_total_profit = 0.0;
  std::vector<double> single_monopoly_prices;
  double ceiling = 0.0;
};

Benchmarks compute_benchmarks(const MarketParams& params,
                              double ceiling_multiplier = kDefaultCeilingMultiplier,
                              const SolverConfig& cfg = {});

double auction_nash(const AuctionParams& params);

// Symmetric pure equilibria when bids are restricted to cents: v and v - 0.01.
std::vector<double> auction_cent_grid_equilibria(const AuctionParams& params);

}  // namespace collab
