#include "collab/stats.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "collab/errors.hpp"

namespace collab {

double mean(const std::vector<double>& x) {
  if (x.empty()) throw ContractViolation("mean of empty sample");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_variance(const std::vector<double>& x) {
  if (x.size() < 2) throw ContractViolation("variance needs at least two observations");
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

double t_pvalue(double t, double dof, Sides sides) {
  if (!(dof > 0.0)) throw ContractViolation("t_pvalue: dof must be > 0");
  const boost::math::students_t dist(dof);
  switch (sides) {
    case Sides::kTwo: return t == 0.0 ? 1.0 : 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
    case Sides::kLess: return boost::math::cdf(dist, t);
    case Sides::kGreater: return boost::math::cdf(boost::math::complement(dist, t));
  }
  return 1.0;
}

TTest welch_t(const std::vector<double>& a, const std::vector<double>& b, Sides sides) {
  if (a.size() < 2 || b.size() < 2) throw ContractViolation("welch_t: each sample needs >= 2 values");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double va = sample_variance(a) / na;
  const double vb = sample_variance(b) / nb;
  const double se2 = va + vb;
  if (!(se2 > 0.0)) throw ContractViolation("welch_t: both samples have zero variance");
  TTest r;
  r.t = (mean(a) - mean(b)) / std::sqrt(se2);
  r.dof = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  r.p = t_pvalue(r.t, r.dof, sides);
  return r;
}

TTest one_sample_t(const std::vector<double>& a, double mu, Sides sides) {
  if (a.size() < 2) throw ContractViolation("one_sample_t: need >= 2 values");
  const double n = static_cast<double>(a.size());
  const double se2 = sample_variance(a) / n;
  if (!(se2 > 0.0)) throw ContractViolation("one_sample_t: zero variance");
  TTest r;
  r.t = (mean(a) - mu) / std::sqrt(se2);
  r.dof = n - 1.0;
  r.p = t_pvalue(r.t, r.dof, sides);
  return r;
}

double fisher_exact(const std::array<std::array<std::int64_t, 2>, 2>& table) {
  for (const auto& row : table) {
    for (auto v : row) {
      if (v < 0) throw ContractViolation("fisher_exact: negative count");
    }
  }
  const std::int64_t r1 = table[0][0] + table[0][1];
  const std::int64_t r2 = table[1][0] + table[1][1];
  const std::int64_t c1 = table[0][0] + table[1][0];
  const std::int64_t n = r1 + r2;
  if (n == 0) return 1.0;
  auto lchoose = [](std::int64_t m, std::int64_t k) {
    return std::lgamma(m + 1.0) - std::lgamma(k + 1.0) - std::lgamma(m - k + 1.0);
  };
  const double ldenom = lchoose(n, c1);
  auto logp = [&](std::int64_t x) { return lchoose(r1, x) + lchoose(r2, c1 - x) - ldenom; };
  const std::int64_t lo = std::max<std::int64_t>(0, c1 - r2);
  const std::int64_t hi = std::min(r1, c1);
  const double observed = logp(table[0][0]);
  double p = 0.0;
  for (std::int64_t x = lo; x <= hi; ++x) {
    const double lp = logp(x);
    if (lp <= observed + 1e-7) p += std::exp(lp);
  }
  return std::min(1.0, p);
}

double percentile(std::vector<double> x, double q) {
  if (x.empty()) throw ContractViolation("percentile of empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw ContractViolation("percentile: q outside [0, 1]");
  std::sort(x.begin(), x.end());
  const double pos = q * static_cast<double>(x.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (pos - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

OlsFit ols_hc1(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, long absorbed) {
  const long n = X.rows();
  const long k = X.cols();
  if (y.size() != n) throw ContractViolation("ols: X and y row counts differ");
  if (n - k - absorbed <= 0) throw ContractViolation("ols: not enough observations");
  const Eigen::MatrixXd xtx = X.transpose() * X;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(xtx);
  if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-14)
    throw NumericDomainError("ols: regressors are collinear");
  OlsFit fit;
  fit.n = n;
  fit.coef = ldlt.solve(X.transpose() * y);
  fit.residuals = y - X * fit.coef;
  const Eigen::MatrixXd bread = ldlt.solve(Eigen::MatrixXd::Identity(k, k));
  const Eigen::MatrixXd meat = X.transpose() * fit.residuals.array().square().matrix().asDiagonal() * X;
  const double scale = static_cast<double>(n) / static_cast<double>(n - k - absorbed);
  const Eigen::MatrixXd cov = scale * bread * meat * bread;
  fit.robust_se = cov.diagonal().array().sqrt();
  const double tss = (y.array() - y.mean()).square().sum();
  fit.r2 = tss > 0.0 ? 1.0 - fit.residuals.squaredNorm() / tss : 1.0;
  return fit;
}

}  // namespace collab
