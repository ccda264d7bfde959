#pragma once

#include <string_view>
#include <vector>

namespace riskloss::cli {

// "start:stop:step" (inclusive of stop within 1e-12), "a,b,c", or a single
// value. Generated points are start + i*step rounded to 12 decimals so that
// 0.5:1.0:0.05 yields 0.65 rather than 0.65000000000000002.
std::vector<double> parse_grid(std::string_view spec);

}  // namespace riskloss::cli
