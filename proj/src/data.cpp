#include "riskloss/data.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "riskloss/format.hpp"
#include "riskloss/random.hpp"

namespace riskloss {
namespace {

bool valid_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') {
    return false;
  }
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9}) {
    if (s[i] < '0' || s[i] > '9') {
      return false;
    }
  }
  const int y = std::stoi(std::string(s.substr(0, 4)));
  const unsigned m = static_cast<unsigned>(std::stoi(std::string(s.substr(5, 2))));
  const unsigned d = static_cast<unsigned>(std::stoi(std::string(s.substr(8, 2))));
  return std::chrono::year_month_day{std::chrono::year{y}, std::chrono::month{m},
                                     std::chrono::day{d}}
      .ok();
}

std::string format_date(std::chrono::sys_days day) {
  const std::chrono::year_month_day ymd{day};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::optional<double>* optional_slot(PriceRow& row, std::string_view column) {
  if (column == "open") return &row.open;
  if (column == "high") return &row.high;
  if (column == "low") return &row.low;
  if (column == "volume") return &row.volume;
  if (column == "sentiment") return &row.sentiment;
  return nullptr;
}

const std::optional<double>* optional_slot(const PriceRow& row, std::string_view column) {
  return optional_slot(const_cast<PriceRow&>(row), column);
}

}  // namespace

DataError::DataError(std::string source, std::size_t line, const std::string& what)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

double PriceRow::feature(std::string_view column) const {
  if (column == "close") {
    return close;
  }
  const auto* slot = optional_slot(*this, column);
  if (slot == nullptr) {
    throw std::invalid_argument("unknown feature column '" + std::string(column) + "'");
  }
  if (!slot->has_value()) {
    throw std::invalid_argument("feature column '" + std::string(column) +
                                "' missing on " + date);
  }
  return **slot;
}

PriceSeries parse_csv(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) {
    throw DataError(source, line_no, "missing header row");
  }
  // Tolerate a UTF-8 byte order mark.
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) {
    line.erase(0, 3);
  }
  const auto header = split_csv_line(line);
  std::optional<std::size_t> date_col, close_col;
  std::vector<std::pair<std::string, std::size_t>> optional_cols;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const auto name = std::string(trim(header[i]));
    if (name == "date") {
      date_col = i;
    } else if (name == "close") {
      close_col = i;
    } else if (std::find(std::begin(kOptionalColumns), std::end(kOptionalColumns), name) !=
               std::end(kOptionalColumns)) {
      optional_cols.emplace_back(name, i);
    }
  }
  if (!date_col) {
    throw DataError(source, line_no, "missing column 'date'");
  }
  if (!close_col) {
    throw DataError(source, line_no, "missing column 'close'");
  }

  PriceSeries series;
  series.ticker = std::filesystem::path(source).stem().string();
  for (const auto& col : kOptionalColumns) {
    for (const auto& [name, idx] : optional_cols) {
      if (name == col) {
        series.columns.push_back(name);
      }
    }
  }

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) {
      continue;
    }
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw DataError(source, line_no,
                      "expected " + std::to_string(header.size()) + " fields, got " +
                          std::to_string(fields.size()));
    }
    PriceRow row;
    row.date = std::string(trim(fields[*date_col]));
    if (!valid_date(row.date)) {
      throw DataError(source, line_no, "invalid date '" + row.date + "'");
    }
    const auto close = parse_real(fields[*close_col]);
    if (!close) {
      throw DataError(source, line_no, "unparseable number '" + fields[*close_col] + "'");
    }
    if (!std::isfinite(*close) || *close <= 0.0) {
      throw DataError(source, line_no, "non-positive price");
    }
    row.close = *close;
    for (const auto& [name, idx] : optional_cols) {
      if (trim(fields[idx]).empty()) {
        throw DataError(source, line_no, "empty value in column '" + name + "'");
      }
      const auto v = parse_real(fields[idx]);
      if (!v || !std::isfinite(*v)) {
        throw DataError(source, line_no, "unparseable number '" + fields[idx] + "'");
      }
      *optional_slot(row, name) = *v;
    }
    if (!series.rows.empty() && row.date <= series.rows.back().date) {
      throw DataError(source, line_no,
                      row.date == series.rows.back().date
                          ? "duplicate date " + row.date
                          : "date " + row.date + " precedes " + series.rows.back().date);
    }
    series.rows.push_back(std::move(row));
  }
  return series;
}

PriceSeries load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  return parse_csv(in, path.string());
}

void write_csv(std::ostream& out, const PriceSeries& series) {
  out << "date,close";
  for (const auto& c : series.columns) {
    out << ',' << c;
  }
  out << '\n';
  for (const auto& row : series.rows) {
    out << row.date << ',' << format_real(row.close);
    for (const auto& c : series.columns) {
      out << ',' << format_real(row.feature(c));
    }
    out << '\n';
  }
}

void write_csv(const std::filesystem::path& path, const PriceSeries& series) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  }
  write_csv(out, series);
  if (!out) {
    throw std::runtime_error("write failed: " + path.string());
  }
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "unknown";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::Train;
  if (name == "val") return Split::Val;
  if (name == "test") return Split::Test;
  throw std::invalid_argument("unknown split '" + std::string(name) + "'");
}

NormParams compute_norm(const PriceSeries& series, std::span<const std::string> features,
                        std::size_t begin, std::size_t end) {
  if (begin >= end || end > series.size()) {
    throw std::invalid_argument("normalization range is empty");
  }
  NormParams norm;
  const double n = static_cast<double>(end - begin);
  for (const auto& f : features) {
    double mean = 0.0;
    for (std::size_t r = begin; r < end; ++r) mean += series.rows[r].feature(f);
    mean /= n;
    double var = 0.0;
    for (std::size_t r = begin; r < end; ++r) {
      const double e = series.rows[r].feature(f) - mean;
      var += e * e;
    }
    norm.mean.push_back(mean);
    norm.std.push_back(std::max(std::sqrt(var / n), kStdFloor));
  }
  return norm;
}

WindowedDataset::WindowedDataset(const PriceSeries& series, const WindowOptions& options)
    : options_(options) {
  const std::size_t w = options.window;
  const std::size_t h = options.horizon;
  if (w == 0 || h == 0) {
    throw std::invalid_argument("window and horizon must be positive");
  }
  if (options.features.empty() || options.features.front() != "close") {
    throw std::invalid_argument("features must start with 'close'");
  }
  const auto& s = options.splits;
  if (s.train < 0 || s.val < 0 || s.test < 0 ||
      std::abs(s.train + s.val + s.test - 1.0) > 1e-9) {
    throw std::invalid_argument("split fractions must be nonnegative and sum to 1");
  }
  const std::size_t n = series.size();
  if (n < w + h) {
    throw std::invalid_argument("series too short: need at least " + std::to_string(w + h) +
                                " rows for window " + std::to_string(w) + ", got " +
                                std::to_string(n));
  }
  const double nd = static_cast<double>(n);
  train_end_ = std::min(n, static_cast<std::size_t>(std::floor(s.train * nd + 1e-9)));
  val_end_ = std::min(n, static_cast<std::size_t>(std::floor((s.train + s.val) * nd + 1e-9)));
  if (s.test == 0.0) {
    val_end_ = n;
  }
  if (train_end_ == 0) {
    throw std::invalid_argument("train split is empty");
  }

  norm_ = compute_norm(series, options.features, 0, train_end_);
  const std::size_t f = options.features.size();
  features_.resize(n * f);
  dates_.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    dates_.push_back(series.rows[r].date);
    closes_.push_back(series.rows[r].close);
    for (std::size_t j = 0; j < f; ++j) {
      features_[r * f + j] = (series.rows[r].feature(options.features[j]) - norm_.mean[j]) /
                             norm_.std[j];
    }
  }

  const std::size_t bounds[] = {0, train_end_, val_end_, n};
  const Split tags[] = {Split::Train, Split::Val, Split::Test};
  for (std::size_t k = 0; k < 3; ++k) {
    const std::size_t begin = bounds[k];
    const std::size_t end = bounds[k + 1];
    // Inputs [start, start + w) and target start + w - 1 + h all inside the split.
    for (std::size_t start = begin; start + w - 1 + h < end; ++start) {
      windows_.push_back({start, start + w - 1 + h, tags[k]});
    }
  }
}

std::vector<std::size_t> WindowedDataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < windows_.size(); ++i) {
    if (windows_[i].split == split) {
      out.push_back(i);
    }
  }
  return out;
}

ad::Tensor WindowedDataset::inputs(std::span<const std::size_t> window_indices) const {
  const std::size_t w = options_.window;
  const std::size_t f = features();
  ad::Tensor out({window_indices.size(), w, f});
  auto dst = out.data().begin();
  for (const auto idx : window_indices) {
    const auto& win = windows_.at(idx);
    dst = std::copy_n(features_.begin() + static_cast<std::ptrdiff_t>(win.start * f), w * f, dst);
  }
  return out;
}

std::vector<double> WindowedDataset::targets(std::span<const std::size_t> window_indices) const {
  std::vector<double> out;
  out.reserve(window_indices.size());
  for (const auto idx : window_indices) {
    out.push_back(normalized(windows_.at(idx).target, 0));
  }
  return out;
}

const std::string& WindowedDataset::target_date(std::size_t window_index) const {
  return dates_.at(windows_.at(window_index).target);
}

double WindowedDataset::target_close(std::size_t window_index) const {
  return closes_.at(windows_.at(window_index).target);
}

double WindowedDataset::normalized(std::size_t row, std::size_t feature) const {
  return features_.at(row * features() + feature);
}

double WindowedDataset::denormalize(double value) const {
  return value * norm_.std[0] + norm_.mean[0];
}

std::vector<double> WindowedDataset::denormalize(std::span<const double> values) const {
  std::vector<double> out;
  out.reserve(values.size());
  for (const double v : values) {
    out.push_back(denormalize(v));
  }
  return out;
}

double WindowedDataset::normalize_close(double price) const {
  return (price - norm_.mean[0]) / norm_.std[0];
}

void JumpDiffusionParams::validate() const {
  if (!std::isfinite(mu)) throw std::invalid_argument("mu must be finite");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("sigma must be >= 0");
  if (!(jump_prob >= 0.0 && jump_prob <= 1.0)) {
    throw std::invalid_argument("jump probability must be in [0, 1]");
  }
  if (!std::isfinite(jump_mean)) throw std::invalid_argument("jump mean must be finite");
  if (!(jump_std >= 0.0) || !std::isfinite(jump_std)) {
    throw std::invalid_argument("jump std must be >= 0");
  }
  if (!(s0 > 0.0) || !std::isfinite(s0)) throw std::invalid_argument("s0 must be > 0");
}

PriceSeries gen_synthetic(std::uint64_t seed, std::size_t days, const JumpDiffusionParams& params) {
  if (days < 2) {
    throw std::invalid_argument("minimum 2 days");
  }
  params.validate();
  SplitMix64 rng(seed);
  const double dt = 1.0 / kTradingDaysPerYear;
  const double drift = (params.mu - 0.5 * params.sigma * params.sigma) * dt;
  const double vol = params.sigma * std::sqrt(dt);

  PriceSeries series;
  series.ticker = "SYN";
  series.rows.reserve(days);
  std::chrono::sys_days day = std::chrono::year{2000} / std::chrono::January / 3;
  double log_price = std::log(params.s0);
  for (std::size_t t = 0; t < days; ++t) {
    if (t > 0) {
      // Fixed draw order per day keeps the stream aligned whether or not a jump fires.
      const double eps = rng.normal();
      const double u = rng.uniform();
      const double jump = params.jump_mean + params.jump_std * rng.normal();
      log_price += drift + vol * eps + (u < params.jump_prob ? jump : 0.0);
      do {
        day += std::chrono::days{1};
      } while (std::chrono::weekday{day} == std::chrono::Saturday ||
               std::chrono::weekday{day} == std::chrono::Sunday);
    }
    PriceRow row;
    row.date = format_date(day);
    row.close = std::exp(log_price);
    series.rows.push_back(std::move(row));
  }
  return series;
}

}  // namespace riskloss
