#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "riskloss/metrics.hpp"

namespace riskloss::cli {

enum class Mark { None, Best, RunnerUp };

// Best = every entry equal to the best value; runner-up = every entry equal
// to the next distinct value. Nothing is marked for fewer than two entries.
// Missing values are never marked.
std::vector<Mark> column_marks(std::span<const std::optional<double>> values,
                               bool higher_is_better);

struct ReportRow {
  std::string run;
  std::string loss;
  double alpha = 0.0;
  double lambda = 0.0;
  MetricsReport metrics;
};

// Overall then extreme-subset columns (mse, mae, r2, max_ae, min_ae each).
// R^2 is higher-is-better, everything else lower-is-better. Best values are
// wrapped as **v**, runner-up as _v_.
std::string report_text(std::span<const ReportRow> rows);
// Same values plus a <column>_mark column holding best / second / empty.
std::string report_csv(std::span<const ReportRow> rows);

}  // namespace riskloss::cli
