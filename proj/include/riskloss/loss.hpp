#pragma once

// Training objectives over a batch of scalar predictions:
//
//   mse       mean_i (p_i - t_i)^2
//   var-mse   mean(L) + lambda * VaR_alpha(L)
//   cvar-mse  mean(L) + lambda * CVaR_alpha(L)
//
// with L_i = (p_i - t_i)^2 and the quantile taken over the batch. Each
// function returns the value and its (sub)gradient with respect to pred.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace riskloss {

enum class LossKind { Mse, VarMse, CvarMse };

std::string_view to_string(LossKind kind);
// Accepts "mse", "var-mse", "cvar-mse".
LossKind parse_loss_kind(std::string_view name);

struct LossConfig {
  LossKind kind = LossKind::Mse;
  double alpha = 0.95;
  double lambda = 0.0;

  // Throws std::invalid_argument if lambda is negative or non-finite, or
  // alpha is outside (0, 1) for cvar-mse / (0, 1] for var-mse.
  void validate() const;
};

inline constexpr std::string_view kTailWarning = "tail may be empty at this batch size";

struct LossResult {
  double value = 0.0;
  // lambda-free risk statistic (VaR or CVaR of the per-sample losses); 0 for mse.
  double risk = 0.0;
  std::vector<double> gradient;
  // Batch index carrying the VaR order statistic, when a risk term is present.
  std::optional<std::size_t> selected;
  // Set when n * (1 - alpha) < 1.
  std::optional<std::string> warning;
};

std::vector<double> per_sample_mse(std::span<const double> pred, std::span<const double> truth);

LossResult mse_loss(std::span<const double> pred, std::span<const double> truth);
LossResult loss_at_risk_var(std::span<const double> pred, std::span<const double> truth,
                            const LossConfig& config);
LossResult loss_at_risk_cvar(std::span<const double> pred, std::span<const double> truth,
                             const LossConfig& config);

// Reusable, stateless handle to one of the objectives above.
class LossFunction {
 public:
  explicit LossFunction(LossConfig config);

  LossResult operator()(std::span<const double> pred, std::span<const double> truth) const;
  const LossConfig& config() const { return config_; }

 private:
  LossConfig config_;
};

LossFunction make_loss(const LossConfig& config);

}  // namespace riskloss
