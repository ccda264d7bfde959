#include "riskloss/loss.hpp"

#include <cmath>
#include <stdexcept>

#include "riskloss/riskcore.hpp"

namespace riskloss {
namespace {

void check_batch(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) {
    throw std::invalid_argument("prediction and truth lengths differ (" +
                                std::to_string(pred.size()) + " vs " +
                                std::to_string(truth.size()) + ")");
  }
  if (pred.empty()) {
    throw std::invalid_argument("empty batch");
  }
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!std::isfinite(pred[i]) || !std::isfinite(truth[i])) {
      throw std::invalid_argument("non-finite prediction");
    }
  }
}

// Smallest batch index whose loss equals the selected order statistic.
std::size_t selected_index(std::span<const double> losses, double xi) {
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (losses[i] == xi) {
      return i;
    }
  }
  throw std::logic_error("order statistic not found in sample");
}

std::optional<std::string> tail_warning(std::size_t n, double alpha) {
  if (static_cast<double>(n) * (1.0 - alpha) < 1.0) {
    return std::string(kTailWarning);
  }
  return std::nullopt;
}

double mean_of(std::span<const double> values) {
  double total = 0.0;
  for (const double v : values) {
    total += v;
  }
  return total / static_cast<double>(values.size());
}

std::vector<double> mse_gradient(std::span<const double> pred, std::span<const double> truth) {
  const double scale = 2.0 / static_cast<double>(pred.size());
  std::vector<double> grad(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    grad[i] = scale * (pred[i] - truth[i]);
  }
  return grad;
}

void require_kind(const LossConfig& config, LossKind kind) {
  config.validate();
  if (config.kind != kind) {
    throw std::invalid_argument("loss config kind " + std::string(to_string(config.kind)) +
                                " passed to " + std::string(to_string(kind)) + " loss");
  }
}

}  // namespace

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::Mse:
      return "mse";
    case LossKind::VarMse:
      return "var-mse";
    case LossKind::CvarMse:
      return "cvar-mse";
  }
  return "unknown";
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "mse") return LossKind::Mse;
  if (name == "var-mse") return LossKind::VarMse;
  if (name == "cvar-mse") return LossKind::CvarMse;
  throw std::invalid_argument("unknown loss kind '" + std::string(name) +
                              "' (expected mse, var-mse or cvar-mse)");
}

void LossConfig::validate() const {
  if (!std::isfinite(lambda) || lambda < 0.0) {
    throw std::invalid_argument("lambda must be finite and >= 0");
  }
  switch (kind) {
    case LossKind::Mse:
      return;
    case LossKind::VarMse:
      if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw std::invalid_argument("invalid confidence level: var-mse requires alpha in (0, 1]");
      }
      return;
    case LossKind::CvarMse:
      if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("invalid confidence level: cvar-mse requires alpha in (0, 1)");
      }
      return;
  }
  throw std::invalid_argument("unknown loss kind");
}

std::vector<double> per_sample_mse(std::span<const double> pred, std::span<const double> truth) {
  check_batch(pred, truth);
  std::vector<double> losses(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - truth[i];
    losses[i] = e * e;
  }
  return losses;
}

LossResult mse_loss(std::span<const double> pred, std::span<const double> truth) {
  const auto losses = per_sample_mse(pred, truth);
  LossResult out;
  out.value = mean_of(losses);
  out.gradient = mse_gradient(pred, truth);
  return out;
}

LossResult loss_at_risk_var(std::span<const double> pred, std::span<const double> truth,
                            const LossConfig& config) {
  require_kind(config, LossKind::VarMse);
  auto losses = per_sample_mse(pred, truth);
  const double mean_loss = mean_of(losses);
  const double xi = empirical_var(LossSample(losses), ConfidenceLevel(config.alpha));
  const std::size_t k = selected_index(losses, xi);

  LossResult out;
  out.value = mean_loss + config.lambda * xi;
  out.risk = xi;
  out.selected = k;
  out.warning = tail_warning(pred.size(), config.alpha);
  out.gradient = mse_gradient(pred, truth);
  // The quantile is a max-like piecewise selection: its subgradient is the
  // derivative of the selected sample's loss.
  out.gradient[k] += config.lambda * 2.0 * (pred[k] - truth[k]);
  return out;
}

LossResult loss_at_risk_cvar(std::span<const double> pred, std::span<const double> truth,
                             const LossConfig& config) {
  require_kind(config, LossKind::CvarMse);
  const auto losses = per_sample_mse(pred, truth);
  const double mean_loss = mean_of(losses);
  const LossSample sample(losses);
  const ConfidenceLevel alpha(config.alpha);
  const double xi = empirical_var(sample, alpha);
  const double cvar = empirical_cvar(sample, alpha);
  const std::size_t k = selected_index(losses, xi);

  LossResult out;
  out.value = mean_loss + config.lambda * cvar;
  out.risk = cvar;
  out.selected = k;
  out.warning = tail_warning(pred.size(), config.alpha);
  out.gradient = mse_gradient(pred, truth);

  const double n = static_cast<double>(pred.size());
  const double tail_weight = 1.0 / ((1.0 - config.alpha) * n);
  std::size_t above = 0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (losses[i] > xi) {
      out.gradient[i] += config.lambda * tail_weight * 2.0 * (pred[i] - truth[i]);
      ++above;
    }
  }
  // d/dL_k of xi + w * sum (L_i - xi)_+ where L_k = xi.
  const double selected_weight = 1.0 - static_cast<double>(above) * tail_weight;
  out.gradient[k] += config.lambda * selected_weight * 2.0 * (pred[k] - truth[k]);
  return out;
}

LossFunction::LossFunction(LossConfig config) : config_(config) { config_.validate(); }

LossResult LossFunction::operator()(std::span<const double> pred,
                                    std::span<const double> truth) const {
  switch (config_.kind) {
    case LossKind::Mse:
      return mse_loss(pred, truth);
    case LossKind::VarMse:
      return loss_at_risk_var(pred, truth, config_);
    case LossKind::CvarMse:
      return loss_at_risk_cvar(pred, truth, config_);
  }
  throw std::invalid_argument("unknown loss kind");
}

LossFunction make_loss(const LossConfig& config) { return LossFunction(config); }

}  // namespace riskloss
