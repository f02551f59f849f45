#include <doctest.h>

#include <map>

#include "collab/equilibrium.hpp"
#include "collab/market.hpp"
#include "collab/rng.hpp"
#include "oracles.hpp"

using namespace collab;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

}  // namespace

TEST_CASE("demand matches the direct logit formula") {
  const MarketParams m = MarketParams::benchmark();
  oracle::Market om;
  for (auto [p1, p2] : {std::pair{1.5, 2.76}, {1.8, 1.8}, {0.5, 9.0}, {3.0, 1.2}}) {
    const Eigen::VectorXd q = logit_demand(vec({p1, p2}), m);
    const auto expect = oracle::demand(om, {p1, p2});
    CHECK(q(0) == doctest::Approx(expect[0]).epsilon(1e-12));
    CHECK(q(1) == doctest::Approx(expect[1]).epsilon(1e-12));
  }
}

TEST_CASE("published quantity and profit rows") {
  const MarketParams m = MarketParams::benchmark();
  struct Row { double p, rival, q, profit; };
  for (const Row& r : {Row{1.5, 2.76, 87.58, 43.79}, Row{1.8, 1.8, 40.83, 32.66},
                       Row{1.85, 1.85, 39.23, 33.35}, Row{1.65, 2.25, 74.78, 48.6},
                       Row{2.5, 2.25, 9.0, 13.5}, Row{1.5, 3.75, 88.07, 44.04}}) {
    const Eigen::VectorXd q = logit_demand(vec({r.p, r.rival}), m);
    CHECK(round_cents(q(0)) == r.q);
    CHECK(round_cents(firm_profit(r.p, q(0), 1.0, 1.0)) == r.profit);
  }
}

TEST_CASE("scaling prices and costs by alpha scales profit by alpha") {
  oracle::Market om;
  for (double alpha : {1.0, 3.2, 10.0}) {
    const MarketParams m = MarketParams::benchmark(alpha);
    const Eigen::VectorXd p = vec({1.7 * alpha, 2.1 * alpha});
    const Eigen::VectorXd q = logit_demand(p, m);
    const Eigen::VectorXd pi = firm_profits(p, q, m);
    CHECK(q(0) == doctest::Approx(oracle::demand(om, {1.7, 2.1})[0]).epsilon(1e-12));
    CHECK(pi(1) == doctest::Approx(alpha * oracle::profit(om, {1.7, 2.1}, 1)).epsilon(1e-12));
  }
}

TEST_CASE("extreme prices stay finite") {
  const MarketParams m = MarketParams::benchmark();
  const Eigen::VectorXd q = logit_demand(vec({-500.0, 1e4}), m);
  CHECK(q.allFinite());
  CHECK(q(0) == doctest::Approx(100.0));
  CHECK_THROWS_AS(logit_demand(vec({1.0}), m), ContractViolation);
  CHECK_THROWS_AS(logit_demand(vec({1.0, NAN}), m), NumericDomainError);
}

TEST_CASE("property: shares sum below beta and fall in own price") {
  Rng rng(11);
  const MarketParams m = MarketParams::benchmark();
  for (int k = 0; k < 500; ++k) {
    const double p1 = rng.uniform(0.0, 6.0), p2 = rng.uniform(0.0, 6.0);
    const Eigen::VectorXd q = logit_demand(vec({p1, p2}), m);
    CHECK(q.sum() < m.beta);
    CHECK((q.array() > 0).all());
    const Eigen::VectorXd q_up = logit_demand(vec({p1 + 0.1, p2}), m);
    CHECK(q_up(0) < q(0));
    CHECK(q_up(1) > q(1));
  }
}

TEST_CASE("demand shocks draw from the configured offsets") {
  MarketParams m = MarketParams::benchmark();
  ShockConfig shock;
  shock.enabled = true;
  Rng rng(3);
  std::map<double, int> seen;
  for (int k = 0; k < 3000; ++k) seen[sample_a0(m, shock, rng)]++;
  CHECK(seen.size() == 3);
  for (auto& [v, n] : seen) CHECK(n == doctest::Approx(1000).epsilon(0.1));
  ShockConfig off;
  CHECK(sample_a0(m, off, rng) == 0.0);
  const MarketOutcome o = step_market(vec({1.5, 2.76}), m, off, rng);
  CHECK(round_cents(o.quantities(0)) == 87.58);
}

TEST_CASE("first-price auction feedback") {
  AuctionParams a;
  Rng rng(1);
  const std::vector<double> bids{0.9, 0.3};
  const AuctionOutcome o = auction_step(bids, a, rng);
  CHECK(o.winner == 0);
  CHECK(o.payment == doctest::Approx(0.9));
  CHECK(o.feedback[0].won);
  CHECK(o.feedback[0].profit == doctest::Approx(0.1));
  CHECK(o.feedback[0].reference_bid == doctest::Approx(0.3));
  CHECK_FALSE(o.feedback[1].won);
  CHECK(o.feedback[1].reference_bid == doctest::Approx(0.9));
  CHECK(o.feedback[1].profit == 0.0);
}

TEST_CASE("tied bids are broken uniformly") {
  AuctionParams a;
  Rng rng(5);
  const std::vector<double> bids{0.5, 0.5};
  int first = 0;
  for (int k = 0; k < 2000; ++k) first += auction_step(bids, a, rng).winner == 0;
  CHECK(first == doctest::Approx(1000).epsilon(0.1));
}

TEST_CASE("rng state round-trips") {
  Rng a(42);
  a.next();
  Rng b = Rng::from_state(a.state());
  for (int k = 0; k < 10; ++k) CHECK(a.next() == b.next());
  CHECK(derive_seed(1, 2) != derive_seed(1, 3));
  CHECK_THROWS_AS(Rng::from_state("garbage"), IntegrityError);
}
