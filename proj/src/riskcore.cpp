#include "riskloss/riskcore.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace riskloss {
namespace {

void require_tail(ConfidenceLevel alpha) {
  if (alpha.value() >= 1.0) {
    throw std::invalid_argument("CVaR undefined at alpha=1");
  }
}

double hinge_sum(std::span<const double> values, double xi) {
  double total = 0.0;
  for (const double v : values) {
    total += std::max(v - xi, 0.0);
  }
  return total;
}

}  // namespace

LossSample::LossSample(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) {
    throw std::invalid_argument("empty sample");
  }
  for (const double v : values_) {
    if (!std::isfinite(v) || v < 0.0) {
      throw std::invalid_argument("loss sample values must be finite and nonnegative");
    }
  }
}

double LossSample::max() const { return *std::max_element(values_.begin(), values_.end()); }

ConfidenceLevel::ConfidenceLevel(double alpha) : alpha_(alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("invalid confidence level");
  }
}

std::size_t var_rank(std::size_t n, ConfidenceLevel alpha) {
  const double nd = static_cast<double>(n);
  // ceil(alpha * n) can be off by one in floating point (0.7 * 10 > 7);
  // settle on the exact comparison k / n >= alpha.
  auto k = static_cast<std::size_t>(std::ceil(alpha.value() * nd));
  k = std::clamp<std::size_t>(k, 1, n);
  while (k > 1 && static_cast<double>(k - 1) / nd >= alpha.value()) {
    --k;
  }
  while (k < n && static_cast<double>(k) / nd < alpha.value()) {
    ++k;
  }
  return k;
}

double empirical_var(const LossSample& sample, ConfidenceLevel alpha) {
  std::vector<double> sorted(sample.values().begin(), sample.values().end());
  const std::size_t k = var_rank(sorted.size(), alpha);
  auto nth = sorted.begin() + static_cast<std::ptrdiff_t>(k - 1);
  std::nth_element(sorted.begin(), nth, sorted.end());
  return *nth;
}

double empirical_cvar(const LossSample& sample, ConfidenceLevel alpha) {
  require_tail(alpha);
  const double xi = empirical_var(sample, alpha);
  const double n = static_cast<double>(sample.size());
  const double cvar = xi + hinge_sum(sample.values(), xi) / (alpha.tail_mass() * n);
  // Rounding in (1 - alpha) n can push the tail average past the largest loss.
  return std::min(cvar, sample.max());
}

double ru_objective(double xi, const LossSample& sample, ConfidenceLevel alpha) {
  require_tail(alpha);
  if (!std::isfinite(xi)) {
    throw std::invalid_argument("xi must be finite");
  }
  const double n = static_cast<double>(sample.size());
  return xi + (hinge_sum(sample.values(), xi) / n) / alpha.tail_mass();
}

double ru_derivative(double xi, const LossSample& sample, ConfidenceLevel alpha) {
  require_tail(alpha);
  const auto above = std::count_if(sample.values().begin(), sample.values().end(),
                                   [xi](double v) { return v > xi; });
  const double n = static_cast<double>(sample.size());
  return 1.0 - (static_cast<double>(above) / n) / alpha.tail_mass();
}

double ru_optimality_gap(const LossSample& sample, ConfidenceLevel alpha) {
  require_tail(alpha);
  const double xi = empirical_var(sample, alpha);
  const auto above = std::count_if(sample.values().begin(), sample.values().end(),
                                   [xi](double v) { return v > xi; });
  const double n = static_cast<double>(sample.size());
  return std::abs(static_cast<double>(above) / n - alpha.tail_mass());
}

}  // namespace riskloss
