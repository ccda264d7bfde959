#include "riskloss/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace riskloss {
namespace {

void check_lengths(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) {
    throw std::invalid_argument("metrics: length mismatch (" + std::to_string(pred.size()) +
                                " predictions vs " + std::to_string(truth.size()) + " truths)");
  }
  if (pred.empty()) {
    throw std::invalid_argument("metrics: empty input");
  }
}

nlohmann::ordered_json stats_json(const ErrorStats& s, const nlohmann::ordered_json& extreme,
                                  double tail_fraction) {
  nlohmann::ordered_json j;
  j["mse"] = s.mse;
  j["mae"] = s.mae;
  j["r2"] = s.r2 ? nlohmann::ordered_json(*s.r2) : nlohmann::ordered_json(nullptr);
  j["max_ae"] = s.max_ae;
  j["min_ae"] = s.min_ae;
  j["extreme"] = extreme;
  j["n"] = s.n;
  j["tail_fraction"] = tail_fraction;
  return j;
}

ErrorStats stats_from_json(const nlohmann::ordered_json& j) {
  ErrorStats s;
  s.mse = j.at("mse").get<double>();
  s.mae = j.at("mae").get<double>();
  if (!j.at("r2").is_null()) {
    s.r2 = j.at("r2").get<double>();
  }
  s.max_ae = j.at("max_ae").get<double>();
  s.min_ae = j.at("min_ae").get<double>();
  s.n = j.at("n").get<std::size_t>();
  return s;
}

}  // namespace

ErrorStats error_stats(std::span<const double> pred, std::span<const double> truth) {
  check_lengths(pred, truth);
  const double n = static_cast<double>(truth.size());
  ErrorStats s;
  s.n = truth.size();

  double sq = 0.0;
  double abs_sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double e = truth[i] - pred[i];
    sq += e * e;
    abs_sum += std::abs(e);
  }
  s.mse = sq / n;
  s.mae = abs_sum / n;

  const double mean = std::accumulate(truth.begin(), truth.end(), 0.0) / n;
  double total = 0.0;
  for (const double t : truth) {
    total += (t - mean) * (t - mean);
  }
  if (total > 0.0) {
    s.r2 = 1.0 - sq / total;
  }

  // max_element / min_element return the first extremum.
  const auto t_max = static_cast<std::size_t>(std::max_element(truth.begin(), truth.end()) - truth.begin());
  const auto t_min = static_cast<std::size_t>(std::min_element(truth.begin(), truth.end()) - truth.begin());
  s.max_ae = std::abs(truth[t_max] - pred[t_max]);
  s.min_ae = std::abs(truth[t_min] - pred[t_min]);
  return s;
}

std::size_t tail_count(std::size_t n, double tail_fraction) {
  if (!(tail_fraction > 0.0 && tail_fraction <= 0.5)) {
    throw std::invalid_argument("tail fraction must be in (0, 0.5]");
  }
  const double nd = static_cast<double>(n);
  // Smallest k with k / n >= tail (0.05 * 100 evaluates above 5).
  auto k = static_cast<std::size_t>(std::ceil(tail_fraction * nd));
  while (k > 0 && static_cast<double>(k - 1) / nd >= tail_fraction) {
    --k;
  }
  while (k < n && static_cast<double>(k) / nd < tail_fraction) {
    ++k;
  }
  return std::min(k, n);
}

std::vector<std::size_t> extreme_rows(std::span<const double> truth, double tail_fraction) {
  const std::size_t k = tail_count(truth.size(), tail_fraction);
  std::vector<std::size_t> order(truth.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return truth[a] < truth[b]; });
  std::vector<char> chosen(truth.size(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    chosen[order[i]] = 1;
    chosen[order[order.size() - 1 - i]] = 1;
  }
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    if (chosen[i]) {
      rows.push_back(i);
    }
  }
  return rows;
}

MetricsReport compute_metrics(std::span<const double> pred, std::span<const double> truth,
                              double tail_fraction) {
  check_lengths(pred, truth);
  MetricsReport report;
  report.tail_fraction = tail_fraction;
  report.overall = error_stats(pred, truth);
  const auto rows = extreme_rows(truth, tail_fraction);
  std::vector<double> p, t;
  p.reserve(rows.size());
  t.reserve(rows.size());
  for (const auto r : rows) {
    p.push_back(pred[r]);
    t.push_back(truth[r]);
  }
  report.extreme = error_stats(p, t);
  return report;
}

nlohmann::ordered_json to_json(const MetricsReport& report) {
  nlohmann::ordered_json extreme(nullptr);
  if (report.extreme) {
    extreme = stats_json(*report.extreme, nullptr, report.tail_fraction);
  }
  return stats_json(report.overall, extreme, report.tail_fraction);
}

MetricsReport metrics_from_json(const nlohmann::ordered_json& doc) {
  MetricsReport report;
  report.overall = stats_from_json(doc);
  report.tail_fraction = doc.at("tail_fraction").get<double>();
  if (!doc.at("extreme").is_null()) {
    report.extreme = stats_from_json(doc.at("extreme"));
  }
  return report;
}

}  // namespace riskloss
