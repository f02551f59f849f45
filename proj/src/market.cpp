#include "collab/market.hpp"

#include <algorithm>

namespace collab {

double sample_a0(const MarketParams& params, const ShockConfig& shock, Rng& rng) {
  shock.validate();
  if (!shock.enabled) return params.a0;
  return params.a0 + shock.offsets[rng.uniform_index(shock.offsets.size())];
}

MarketOutcome step_market(const Eigen::VectorXd& prices, const MarketParams& params,
                          const ShockConfig& shock, Rng& rng) {
  params.validate();
  if (prices.size() != params.firms())
    throw ContractViolation("step_market: one price per firm required");

  MarketOutcome out;
  out.realized_a0 = sample_a0(params, shock, rng);
  out.prices = prices;
  out.quantities = logit_demand(prices, params, out.realized_a0);
  out.profits = firm_profits(prices, out.quantities, params);
  return out;
}

AuctionOutcome auction_step(std::span<const double> bids, const AuctionParams& params, Rng& rng) {
  params.validate();
  if (bids.empty()) throw ContractViolation("auction_step: no bids");
  if (static_cast<int>(bids.size()) != params.bidders)
    throw ContractViolation("auction_step: one bid per bidder required");
  for (double b : bids) {
    if (!std::isfinite(b) || b < 0.0)
      throw ContractViolation("auction_step: bids must be finite and non-negative");
  }

  const double top = *std::max_element(bids.begin(), bids.end());
  std::vector<std::size_t> leaders;
  for (std::size_t i = 0; i < bids.size(); ++i) {
    if (bids[i] == top) leaders.push_back(i);
  }
  // Ties consume one draw; a clear winner consumes none.
  const std::size_t winner =
      leaders.size() == 1 ? leaders.front() : leaders[rng.uniform_index(leaders.size())];

  AuctionOutcome out;
  out.bids.assign(bids.begin(), bids.end());
  out.winner = winner;
  out.payment = top;
  out.feedback.resize(bids.size());

  double best_rival = 0.0;
  for (std::size_t i = 0; i < bids.size(); ++i) {
    if (i != winner) best_rival = std::max(best_rival, bids[i]);
  }
  for (std::size_t i = 0; i < bids.size(); ++i) {
    BidderFeedback& fb = out.feedback[i];
    fb.bid = bids[i];
    fb.won = (i == winner);
    if (fb.won) {
      fb.reference_bid = best_rival;
      fb.payment = top;
      fb.profit = params.value - top;
    } else {
      fb.reference_bid = top;
    }
  }
  return out;
}

}  // namespace collab
