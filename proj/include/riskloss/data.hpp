#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "riskloss/tensor.hpp"

namespace riskloss {

// Raised for malformed input files; carries the 1-based line number.
class DataError : public std::runtime_error {
 public:
  DataError(std::string source, std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

inline constexpr std::string_view kOptionalColumns[] = {"open", "high", "low", "volume",
                                                        "sentiment"};

struct PriceRow {
  std::string date;  // YYYY-MM-DD
  double close = 0.0;
  std::optional<double> open, high, low, volume, sentiment;

  // close or one of kOptionalColumns; throws if absent.
  double feature(std::string_view column) const;

  friend bool operator==(const PriceRow&, const PriceRow&) = default;
};

struct PriceSeries {
  std::string ticker;
  std::vector<PriceRow> rows;
  // Optional columns present in the source, in kOptionalColumns order.
  std::vector<std::string> columns;

  std::size_t size() const { return rows.size(); }
  friend bool operator==(const PriceSeries&, const PriceSeries&) = default;
};

// Header row required; columns date and close required, open/high/low/
// volume/sentiment optional, any order. Dates must strictly increase.
PriceSeries parse_csv(std::istream& in, const std::string& source);
PriceSeries load_csv(const std::filesystem::path& path);

// date,close[,optional...] with reals at 17 significant digits, LF endings.
void write_csv(std::ostream& out, const PriceSeries& series);
void write_csv(const std::filesystem::path& path, const PriceSeries& series);

enum class Split { Train, Val, Test };
std::string_view to_string(Split split);
Split parse_split(std::string_view name);

struct SplitFractions {
  double train = 0.7;
  double val = 0.15;
  double test = 0.15;
};

struct WindowOptions {
  std::size_t window = 32;
  std::size_t horizon = 1;
  SplitFractions splits;
  // First entry must be "close" (the prediction target).
  std::vector<std::string> features{"close"};
};

// Per-feature z-score parameters from train rows only.
struct NormParams {
  std::vector<double> mean;
  std::vector<double> std;
};

inline constexpr double kStdFloor = 1e-8;

struct Window {
  std::size_t start = 0;   // first input row
  std::size_t target = 0;  // row of the predicted close
  Split split = Split::Train;
};

class WindowedDataset {
 public:
  // Splits rows chronologically, then forms windows inside each split.
  WindowedDataset(const PriceSeries& series, const WindowOptions& options);

  std::size_t window() const { return options_.window; }
  std::size_t features() const { return options_.features.size(); }
  const WindowOptions& options() const { return options_; }
  const NormParams& norm() const { return norm_; }
  const std::vector<Window>& windows() const { return windows_; }

  // Row ranges [0, train_end), [train_end, val_end), [val_end, rows).
  std::size_t train_end() const { return train_end_; }
  std::size_t val_end() const { return val_end_; }
  std::size_t rows() const { return dates_.size(); }

  // Indices into windows() for a split, in chronological order.
  std::vector<std::size_t> indices(Split split) const;

  // [B, W, F] normalized inputs and normalized next-step closes.
  ad::Tensor inputs(std::span<const std::size_t> window_indices) const;
  std::vector<double> targets(std::span<const std::size_t> window_indices) const;

  const std::string& target_date(std::size_t window_index) const;
  // Raw (unnormalized) close at the window's target row.
  double target_close(std::size_t window_index) const;
  double normalized(std::size_t row, std::size_t feature) const;

  // Inverse z-score of the close feature.
  double denormalize(double value) const;
  std::vector<double> denormalize(std::span<const double> values) const;
  double normalize_close(double price) const;

 private:
  WindowOptions options_;
  NormParams norm_;
  std::vector<std::string> dates_;
  std::vector<double> closes_;
  std::vector<double> features_;  // [rows, F] normalized
  std::vector<Window> windows_;
  std::size_t train_end_ = 0;
  std::size_t val_end_ = 0;
};

// Mean and (population) std per feature over rows [begin, end), std floored.
NormParams compute_norm(const PriceSeries& series, std::span<const std::string> features,
                        std::size_t begin, std::size_t end);

struct JumpDiffusionParams {
  double mu = 0.05;
  double sigma = 0.2;
  double jump_prob = 0.02;
  double jump_mean = -0.05;
  double jump_std = 0.08;
  double s0 = 100.0;

  void validate() const;
};

inline constexpr double kTradingDaysPerYear = 252.0;

// Log-price walk with daily step
//   (mu - sigma^2/2) dt + sigma sqrt(dt) eps + J 1[u < p],  dt = 1/252,
// eps ~ N(0,1), J ~ N(jump_mean, jump_std^2). Dates are consecutive weekdays
// from 2000-01-03.
PriceSeries gen_synthetic(std::uint64_t seed, std::size_t days,
                          const JumpDiffusionParams& params = {});

}  // namespace riskloss
