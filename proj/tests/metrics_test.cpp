#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "riskloss/metrics.hpp"

using namespace riskloss;

TEST(ErrorStats, PerfectPrediction) {
  const std::vector<double> truth{3.0, 1.0, 4.0, 1.5, 9.0};
  const auto s = error_stats(truth, truth);
  EXPECT_EQ(s.mse, 0.0);
  EXPECT_EQ(s.mae, 0.0);
  ASSERT_TRUE(s.r2.has_value());
  EXPECT_EQ(*s.r2, 1.0);
  EXPECT_EQ(s.max_ae, 0.0);
  EXPECT_EQ(s.min_ae, 0.0);
  EXPECT_EQ(s.n, 5u);
}

TEST(ErrorStats, HandExample) {
  const std::vector<double> truth{1, 5, 3};
  const std::vector<double> pred{2, 4, 3};
  const auto s = error_stats(pred, truth);
  EXPECT_DOUBLE_EQ(s.mse, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.mae, 2.0 / 3.0);
  EXPECT_EQ(s.max_ae, 1.0);
  EXPECT_EQ(s.min_ae, 1.0);
  // 1 - 2 / 8
  EXPECT_DOUBLE_EQ(*s.r2, 0.75);
}

TEST(ErrorStats, ConstantTruthHasNoR2) {
  const std::vector<double> truth{2, 2, 2};
  const std::vector<double> pred{1, 2, 3};
  const auto s = error_stats(pred, truth);
  EXPECT_FALSE(s.r2.has_value());
  EXPECT_EQ(s.max_ae, 1.0);  // first index wins the tie
  EXPECT_EQ(s.min_ae, 1.0);
}

TEST(ErrorStats, Errors) {
  const std::vector<double> a{1, 2}, b{1};
  EXPECT_THROW(error_stats(a, b), std::invalid_argument);
  EXPECT_THROW(error_stats(std::vector<double>{}, std::vector<double>{}), std::invalid_argument);
}

TEST(ErrorStats, ExtremePointErrorsMatchExhaustiveScan) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> coarse(0, 9);
  std::normal_distribution<double> noise(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 40;
    std::vector<double> truth(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = coarse(rng);  // many ties
      pred[i] = truth[i] + noise(rng);
    }
    std::size_t hi = 0, lo = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (truth[i] > truth[hi]) hi = i;
      if (truth[i] < truth[lo]) lo = i;
    }
    const auto s = error_stats(pred, truth);
    EXPECT_EQ(s.max_ae, std::abs(truth[hi] - pred[hi]));
    EXPECT_EQ(s.min_ae, std::abs(truth[lo] - pred[lo]));
    EXPECT_GE(s.mse, 0.0);
    EXPECT_GE(s.mae, 0.0);
    if (s.r2) EXPECT_LE(*s.r2, 1.0);
  }
}

TEST(Extreme, TailCount) {
  EXPECT_EQ(tail_count(100, 0.05), 5u);
  EXPECT_EQ(tail_count(101, 0.05), 6u);
  EXPECT_EQ(tail_count(1, 0.05), 1u);
  EXPECT_EQ(tail_count(10, 0.5), 5u);
  EXPECT_EQ(tail_count(300, 0.07), 21u);  // 0.07 * 300 = 21.000000000000004
  EXPECT_THROW(tail_count(10, 0.0), std::invalid_argument);
  EXPECT_THROW(tail_count(10, 0.6), std::invalid_argument);
}

TEST(Extreme, SubsetSizeMatchesEnumeration) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> coarse(0, 5);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng() % 60;
    const double tail = std::uniform_real_distribution<double>(0.01, 0.5)(rng);
    std::vector<double> truth(n);
    for (auto& v : truth) v = coarse(rng);

    // Rank by (value, index); take the bottom and top k ranks.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return truth[a] < truth[b]; });
    std::size_t k = 0;
    while (static_cast<double>(k) < tail * static_cast<double>(n)) ++k;
    std::set<std::size_t> expected;
    for (std::size_t r = 0; r < n; ++r) {
      if (r < k || r + k >= n) expected.insert(order[r]);
    }
    const auto rows = extreme_rows(truth, tail);
    EXPECT_EQ(std::vector<std::size_t>(expected.begin(), expected.end()), rows);
    const std::size_t overlap = 2 * k > n ? 2 * k - n : 0;
    EXPECT_EQ(rows.size(), 2 * k - overlap);
  }
}

TEST(Extreme, ReportRestrictsRows) {
  std::vector<double> truth, pred;
  for (int i = 0; i < 40; ++i) {
    truth.push_back(i);
    pred.push_back(i + (i < 2 || i >= 38 ? 3.0 : 0.5));
  }
  const auto report = compute_metrics(pred, truth, 0.05);
  ASSERT_TRUE(report.extreme.has_value());
  EXPECT_EQ(report.extreme->n, 4u);
  EXPECT_EQ(report.extreme->mae, 3.0);
  EXPECT_EQ(report.extreme->max_ae, 3.0);
  EXPECT_EQ(report.overall.n, 40u);
  EXPECT_LE(report.extreme->n, report.overall.n);
}

TEST(Extreme, PermutationCovariant) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0, 1);
  std::vector<double> truth(50), pred(50);
  for (std::size_t i = 0; i < 50; ++i) {
    truth[i] = 100 + 10 * g(rng);
    pred[i] = truth[i] + g(rng);
  }
  const auto a = compute_metrics(pred, truth);
  std::vector<std::size_t> perm(50);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<double> pt(50), pp(50);
  for (std::size_t i = 0; i < 50; ++i) {
    pt[i] = truth[perm[i]];
    pp[i] = pred[perm[i]];
  }
  const auto b = compute_metrics(pp, pt);
  EXPECT_NEAR(a.overall.mse, b.overall.mse, 1e-12);
  EXPECT_NEAR(a.overall.mae, b.overall.mae, 1e-12);
  EXPECT_NEAR(*a.overall.r2, *b.overall.r2, 1e-12);
  EXPECT_EQ(a.overall.max_ae, b.overall.max_ae);
  EXPECT_EQ(a.overall.min_ae, b.overall.min_ae);
  EXPECT_NEAR(a.extreme->mae, b.extreme->mae, 1e-12);
}

TEST(Json, FieldOrderAndRoundTrip) {
  const std::vector<double> truth{2, 2, 2, 2};
  const std::vector<double> pred{1, 2.5, 2, 3};
  const auto report = compute_metrics(pred, truth, 0.25);
  const auto doc = to_json(report);
  std::vector<std::string> keys;
  for (const auto& [k, v] : doc.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"mse", "mae", "r2", "max_ae", "min_ae", "extreme",
                                            "n", "tail_fraction"}));
  EXPECT_TRUE(doc["r2"].is_null());
  EXPECT_TRUE(doc["extreme"]["extreme"].is_null());
  const auto back = metrics_from_json(doc);
  EXPECT_EQ(back.overall.mse, report.overall.mse);
  EXPECT_FALSE(back.overall.r2.has_value());
  EXPECT_EQ(back.extreme->n, report.extreme->n);
  EXPECT_EQ(back.tail_fraction, 0.25);
}
