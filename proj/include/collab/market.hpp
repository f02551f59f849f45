#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "collab/errors.hpp"
#include "collab/rng.hpp"

namespace collab {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Logit-demand market. `alpha` scales the currency unit, `beta` the quantity
// unit, `mu` is horizontal differentiation, `a0` the outside option, and
// `quality` / `cost` are per-firm vertical quality and unit-cost coefficients
// (marginal cost of firm i is alpha * cost[i]).
template <typename Scalar>
struct BasicMarketParams {
  Scalar alpha{1};
  Scalar beta{100};
  Scalar mu{0.25};
  Scalar a0{0};
  Vector<Scalar> quality;
  Vector<Scalar> cost;

  Eigen::Index firms() const { return quality.size(); }

  void validate() const {
    if (!(alpha > Scalar(0))) throw ContractViolation("market: alpha must be > 0");
    if (!(beta > Scalar(0))) throw ContractViolation("market: beta must be > 0");
    if (!(mu > Scalar(0))) throw ContractViolation("market: mu must be > 0");
    if (quality.size() < 1) throw ContractViolation("market: at least one firm required");
    if (quality.size() != cost.size())
      throw ContractViolation("market: quality and cost lengths differ");
  }

  // Symmetric two-firm benchmark: a = [2, 2], a0 = 0, mu = 0.25, c = [1, 1].
  static BasicMarketParams benchmark(Scalar alpha = Scalar(1)) {
    BasicMarketParams p;
    p.alpha = alpha;
    p.quality = Vector<Scalar>::Constant(2, Scalar(2));
    p.cost = Vector<Scalar>::Constant(2, Scalar(1));
    return p;
  }

  BasicMarketParams with_alpha(Scalar a) const {
    BasicMarketParams p = *this;
    p.alpha = a;
    return p;
  }

  // The market as seen by firm i alone (competitors absent).
  BasicMarketParams only_firm(Eigen::Index i) const {
    BasicMarketParams p = *this;
    p.quality = Vector<Scalar>::Constant(1, quality(i));
    p.cost = Vector<Scalar>::Constant(1, cost(i));
    return p;
  }

  Vector<Scalar> marginal_costs() const { return alpha * cost; }

  template <typename Other>
  BasicMarketParams<Other> cast() const {
    BasicMarketParams<Other> p;
    p.alpha = Other(alpha);
    p.beta = Other(beta);
    p.mu = Other(mu);
    p.a0 = Other(a0);
    p.quality = quality.template cast<Other>();
    p.cost = cost.template cast<Other>();
    return p;
  }
};

using MarketParams = BasicMarketParams<double>;

template <typename Scalar>
struct LogitShares {
  Vector<Scalar> inside;  // per-firm share of beta
  Scalar outside;         // share captured by the outside option
};

// Choice shares evaluated in log space: u_i = (a_i - p_i / alpha) / mu,
// u_0 = a0 / mu, share_i = exp(u_i) / (sum_j exp(u_j) + exp(u_0)).
template <typename Derived>
LogitShares<typename Derived::Scalar> logit_shares(
    const Eigen::MatrixBase<Derived>& prices,
    const BasicMarketParams<typename Derived::Scalar>& params,
    typename Derived::Scalar a0_realized) {
  using Scalar = typename Derived::Scalar;
  using std::exp;
  using std::isfinite;
  if (prices.size() != params.firms())
    throw ContractViolation("logit_demand: one price per firm required");
  if (!prices.allFinite() || !isfinite(a0_realized))
    throw NumericDomainError("logit_demand: non-finite price");

  Vector<Scalar> utility =
      (params.quality - prices.derived() / params.alpha) / params.mu;
  const Scalar outside_utility = a0_realized / params.mu;
  const Scalar peak = std::max(utility.maxCoeff(), outside_utility);
  if (!isfinite(peak)) throw NumericDomainError("logit_demand: exponent overflow");

  Vector<Scalar> weights = (utility.array() - peak).exp().matrix();
  const Scalar outside_weight = exp(outside_utility - peak);
  const Scalar total = weights.sum() + outside_weight;
  if (!(total > Scalar(0)) || !isfinite(total))
    throw NumericDomainError("logit_demand: degenerate normalizer");

  LogitShares<Scalar> shares;
  shares.inside = weights / total;
  shares.outside = outside_weight / total;
  return shares;
}

template <typename Derived>
Vector<typename Derived::Scalar> logit_demand(
    const Eigen::MatrixBase<Derived>& prices,
    const BasicMarketParams<typename Derived::Scalar>& params,
    typename Derived::Scalar a0_realized) {
  return params.beta * logit_shares(prices, params, a0_realized).inside;
}

template <typename Derived>
Vector<typename Derived::Scalar> logit_demand(
    const Eigen::MatrixBase<Derived>& prices,
    const BasicMarketParams<typename Derived::Scalar>& params) {
  return logit_demand(prices, params, params.a0);
}

template <typename Scalar>
Scalar firm_profit(Scalar price, Scalar quantity, Scalar cost, Scalar alpha) {
  return (price - alpha * cost) * quantity;
}

template <typename DerivedP, typename DerivedQ>
Vector<typename DerivedP::Scalar> firm_profits(
    const Eigen::MatrixBase<DerivedP>& prices, const Eigen::MatrixBase<DerivedQ>& quantities,
    const BasicMarketParams<typename DerivedP::Scalar>& params) {
  return ((prices.derived() - params.alpha * params.cost).array() * quantities.derived().array())
      .matrix();
}

// Demand shock on a0: offsets sampled uniformly each period when enabled.
struct ShockConfig {
  bool enabled = false;
  std::vector<double> offsets{-0.05, 0.0, 0.05};

  void validate() const {
    if (enabled && offsets.empty()) throw ContractViolation("shock: offsets empty");
  }
};

double sample_a0(const MarketParams& params, const ShockConfig& shock, Rng& rng);

struct MarketOutcome {
  Eigen::VectorXd prices;
  Eigen::VectorXd quantities;
  Eigen::VectorXd profits;
  double realized_a0 = 0.0;
};

MarketOutcome step_market(const Eigen::VectorXd& prices, const MarketParams& params,
                          const ShockConfig& shock, Rng& rng);

// First-price sealed-bid auction with a common item value.
struct AuctionParams {
  double value = 1.0;
  int bidders = 2;

  void validate() const {
    if (!(value > 0.0)) throw ContractViolation("auction: value must be > 0");
    if (bidders < 2) throw ContractViolation("auction: at least two bidders");
  }
};

struct BidderFeedback {
  bool won = false;
  double bid = 0.0;
  // Losers see the winning bid; the winner sees the highest competing bid.
  double reference_bid = 0.0;
  double payment = 0.0;
  double profit = 0.0;
};

struct AuctionOutcome {
  std::vector<double> bids;
  std::size_t winner = 0;
  double payment = 0.0;
  std::vector<BidderFeedback> feedback;
};

AuctionOutcome auction_step(std::span<const double> bids, const AuctionParams& params, Rng& rng);

}  // namespace collab
