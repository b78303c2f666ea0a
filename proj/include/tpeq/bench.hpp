#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tpeq/optimizer.hpp"

namespace tpeq {

// Random optimizer instance with per-thread Pareto rows: CPI strictly decreasing and
// power strictly increasing with the level. The budget sits at `budget_fraction` of
// the way from the all-lowest to the all-highest total power; values below zero or
// above one give infeasible or slack budgets.
OptimizerInput random_instance(int n_threads, int n_levels, std::uint64_t seed, double budget_fraction);

struct BenchRow {
  int n_threads = 0;
  int n_levels = 0;
  double heap_seconds = 0.0;   // best of the trials
  double naive_seconds = 0.0;  // zero when not timed
  bool identical = true;
};

struct BenchResult {
  std::vector<BenchRow> rows;
  double heap_slope = 0.0;
  double naive_slope = 0.0;
};

BenchResult bench_optimizer(std::span<const int> n_list, int n_levels, int trials, std::uint64_t seed,
                            bool time_naive = true, double budget_fraction = 0.25);

// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace tpeq
