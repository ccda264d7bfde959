#pragma once

// Empirical Value-at-Risk / Conditional Value-at-Risk over a batch of
// nonnegative losses, plus the Rockafellar-Uryasev auxiliary objective
//
//     V(xi) = xi + 1/(1 - alpha) * E[(L - xi)_+]
//
// whose minimizer over xi is VaR_alpha(L) and whose minimum is CVaR_alpha(L).
//
// VaR is the order statistic at 1-based rank k, the smallest k with
// k / n >= alpha, i.e. inf{x : P(L <= x) >= alpha} on the empirical CDF.
// No interpolation: the quantile is always an actual sample value.

#include <cstddef>
#include <span>
#include <vector>

namespace riskloss {

// A batch of finite, nonnegative per-sample losses (n >= 1).
class LossSample {
 public:
  explicit LossSample(std::vector<double> values);

  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double max() const;

 private:
  std::vector<double> values_;
};

// Confidence level alpha in (0, 1].
class ConfidenceLevel {
 public:
  explicit ConfidenceLevel(double alpha);

  double value() const { return alpha_; }
  // 1 - alpha; zero only at alpha = 1.
  double tail_mass() const { return 1.0 - alpha_; }

 private:
  double alpha_;
};

// 1-based rank of the VaR order statistic: smallest k in [1, n] with k/n >= alpha.
std::size_t var_rank(std::size_t n, ConfidenceLevel alpha);

double empirical_var(const LossSample& sample, ConfidenceLevel alpha);

// xi + (1 / ((1 - alpha) n)) * sum_i (L_i - xi)_+ with xi = empirical_var.
// Throws at alpha = 1 (no tail mass).
double empirical_cvar(const LossSample& sample, ConfidenceLevel alpha);

double ru_objective(double xi, const LossSample& sample, ConfidenceLevel alpha);

// Right derivative of ru_objective in xi: 1 - (#{L_i > xi} / n) / (1 - alpha).
double ru_derivative(double xi, const LossSample& sample, ConfidenceLevel alpha);

// |#{L_i > VaR} / n - (1 - alpha)|: how far the discrete sample is from
// satisfying P(L > xi) = 1 - alpha at the empirical VaR.
double ru_optimality_gap(const LossSample& sample, ConfidenceLevel alpha);

}  // namespace riskloss
