#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <vector>

namespace collab {

enum class Sides { kTwo, kLess, kGreater };

struct TTest {
  double t = 0.0;
  double dof = 0.0;
  double p = 1.0;
};

// Welch-Satterthwaite two-sample t test. Each sample needs at least two
// observations and the pooled standard error must be positive.
TTest welch_t(const std::vector<double>& a, const std::vector<double>& b, Sides sides = Sides::kTwo);

// One-sample t test of mean(a) against `mu`.
TTest one_sample_t(const std::vector<double>& a, double mu, Sides sides = Sides::kTwo);

// p-value of a t statistic with `dof` degrees of freedom.
double t_pvalue(double t, double dof, Sides sides);

// Two-sided Fisher exact test for [[a, b], [c, d]]: sum of the probabilities
// of all tables with the same margins that are no more likely than the
// observed one (relative tolerance 1e-7).
double fisher_exact(const std::array<std::array<std::int64_t, 2>, 2>& table);

double mean(const std::vector<double>& x);
double sample_variance(const std::vector<double>& x);

// Quantile with linear interpolation between order statistics, q in [0, 1].
double percentile(std::vector<double> x, double q);

// OLS with HC1 heteroskedasticity-robust standard errors. `absorbed` counts
// parameters swept out before the fit (e.g. fixed effects) and enters the HC1
// degrees-of-freedom correction n / (n - k - absorbed).
struct OlsFit {
  Eigen::VectorXd coef;
  Eigen::VectorXd robust_se;
  Eigen::VectorXd residuals;
  double r2 = 0.0;  // 1 - SSR / TSS of y as given
  long n = 0;
};

OlsFit ols_hc1(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, long absorbed = 0);

}  // namespace collab
