#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace riskloss {

struct ErrorStats {
  double mse = 0.0;
  double mae = 0.0;
  std::optional<double> r2;  // absent when truth is constant
  double max_ae = 0.0;       // |truth - pred| at the first argmax of truth
  double min_ae = 0.0;       // |truth - pred| at the first argmin of truth
  std::size_t n = 0;
};

struct MetricsReport {
  ErrorStats overall;
  // Rows whose truth is among the ceil(tail * n) largest or smallest.
  std::optional<ErrorStats> extreme;
  double tail_fraction = 0.05;
};

ErrorStats error_stats(std::span<const double> pred, std::span<const double> truth);

// Row indices of the extreme subset, ascending. Ranking is by truth value
// with ties broken by index.
std::vector<std::size_t> extreme_rows(std::span<const double> truth, double tail_fraction);

// Number of rows per tail: ceil(tail * n), guarded against floating overshoot.
std::size_t tail_count(std::size_t n, double tail_fraction);

MetricsReport compute_metrics(std::span<const double> pred, std::span<const double> truth,
                              double tail_fraction = 0.05);

// Field order: mse, mae, r2, max_ae, min_ae, extreme, n, tail_fraction.
nlohmann::ordered_json to_json(const MetricsReport& report);
MetricsReport metrics_from_json(const nlohmann::ordered_json& doc);

}  // namespace riskloss
