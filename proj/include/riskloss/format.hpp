#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace riskloss {

// Canonical real formatting: 17 significant digits, round-trips exactly.
std::string format_real(double value);

// Strict parse of a whole field; nullopt on any trailing garbage.
std::optional<double> parse_real(std::string_view text);

std::vector<std::string> split_csv_line(std::string_view line);

std::string join_csv(std::span<const std::string> fields);

std::string_view trim(std::string_view text);

}  // namespace riskloss
