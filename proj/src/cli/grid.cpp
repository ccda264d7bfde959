#include "riskloss/cli/grid.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "riskloss/format.hpp"

namespace riskloss::cli {
namespace {

constexpr double kEndpointTolerance = 1e-12;
constexpr std::size_t kMaxPoints = 100000;

double number(std::string_view text, std::string_view spec) {
  const auto v = parse_real(text);
  if (!v || !std::isfinite(*v)) {
    throw std::invalid_argument("invalid grid '" + std::string(spec) + "': bad number '" +
                                std::string(text) + "'");
  }
  return *v;
}

double snap(double v) {
  const double snapped = std::round(v * 1e12) / 1e12;
  return snapped == 0.0 ? 0.0 : snapped;
}

}  // namespace

std::vector<double> parse_grid(std::string_view spec) {
  spec = trim(spec);
  if (spec.empty()) {
    throw std::invalid_argument("empty grid");
  }
  std::vector<double> out;
  if (spec.find(':') == std::string_view::npos) {
    for (const auto& field : split_csv_line(spec)) {
      out.push_back(number(field, spec));
    }
    return out;
  }

  const auto first = spec.find(':');
  const auto second = spec.find(':', first + 1);
  if (second == std::string_view::npos || spec.find(':', second + 1) != std::string_view::npos) {
    throw std::invalid_argument("invalid grid '" + std::string(spec) +
                                "': expected start:stop:step");
  }
  const double start = number(spec.substr(0, first), spec);
  const double stop = number(spec.substr(first + 1, second - first - 1), spec);
  const double step = number(spec.substr(second + 1), spec);
  if (stop < start) {
    throw std::invalid_argument("invalid grid '" + std::string(spec) + "': stop < start");
  }
  if (!(step > 0.0)) {
    throw std::invalid_argument("invalid grid '" + std::string(spec) + "': step must be > 0");
  }
  for (std::size_t i = 0;; ++i) {
    const double v = start + static_cast<double>(i) * step;
    if (v > stop + kEndpointTolerance) {
      break;
    }
    if (out.size() == kMaxPoints) {
      throw std::invalid_argument("invalid grid '" + std::string(spec) + "': too many points");
    }
    out.push_back(std::abs(v - stop) <= kEndpointTolerance ? stop : snap(v));
  }
  return out;
}

}  // namespace riskloss::cli
