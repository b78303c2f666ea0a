#include "tpeq/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "tpeq/rng.hpp"

namespace tpeq {

OptimizerInput random_instance(int n_threads, int n_levels, std::uint64_t seed, double budget_fraction) {
  if (n_threads < 1 || n_levels < 1) throw std::invalid_argument("random_instance: sizes must be positive");
  Rng rng(mix64(seed, 0x62656e6368ULL));
  const auto n = static_cast<std::size_t>(n_threads);
  const auto m = static_cast<std::size_t>(n_levels);
  OptimizerInput in;
  in.weights.resize(n);
  in.cpi = Matrix(n, m);
  in.power = Matrix(n, m);
  double lo = 0.0;
  double hi = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    in.weights[i] = rng.uniform(0.5, 2.0);
    double cpi = rng.uniform(1.0, 4.0);
    double watts = rng.uniform(2.0, 5.0);
    for (std::size_t j = 0; j < m; ++j) {
      in.cpi(i, j) = cpi;
      in.power(i, j) = watts;
      cpi *= rng.uniform(0.6, 0.95);
      watts += rng.uniform(0.2, 2.0);
    }
    lo += in.power(i, 0);
    hi += in.power(i, m - 1);
  }
  in.budget = std::max(1e-3, lo + budget_fraction * (hi - lo));
  return in;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: need two or more points");
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw std::invalid_argument("loglog_slope: values must be positive");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw std::invalid_argument("loglog_slope: x values must differ");
  return sxy / sxx;
}

namespace {

template <class F>
double time_once(F&& f) {
  const auto start = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

BenchResult bench_optimizer(std::span<const int> n_list, int n_levels, int trials, std::uint64_t seed,
                            bool time_naive, double budget_fraction) {
  if (trials < 1) throw std::invalid_argument("bench_optimizer: trials must be >= 1");
  BenchResult result;
  std::vector<OptimizerInput> inputs;
  std::vector<Assignment> heap_out(n_list.size());
  for (const int n : n_list) {
    inputs.push_back(random_instance(n, n_levels, mix64(seed, static_cast<std::uint64_t>(n)), budget_fraction));
    BenchRow row;
    row.n_threads = n;
    row.n_levels = n_levels;
    row.heap_seconds = std::numeric_limits<double>::infinity();
    result.rows.push_back(row);
  }
  // Rounds sweep every size so slow stretches on the host hit all sizes alike; best time wins.
  for (int t = 0; t < trials; ++t) {
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      const double s = time_once([&] { heap_out[k] = tpeq_assign_heap(inputs[k]); });
      result.rows[k].heap_seconds = std::min(result.rows[k].heap_seconds, std::max(s, 1e-9));
    }
  }
  std::vector<double> xs;
  std::vector<double> heap_ys;
  std::vector<double> naive_ys;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    BenchRow& row = result.rows[k];
    if (time_naive) {
      Assignment naive;
      row.naive_seconds = std::max(time_once([&] { naive = tpeq_assign(inputs[k]); }), 1e-9);
      row.identical = naive.configs == heap_out[k].configs;
      naive_ys.push_back(row.naive_seconds);
    }
    xs.push_back(static_cast<double>(row.n_threads));
    heap_ys.push_back(row.heap_seconds);
  }
  if (xs.size() >= 2) {
    result.heap_slope = loglog_slope(xs, heap_ys);
    if (time_naive) result.naive_slope = loglog_slope(xs, naive_ys);
  }
  return result;
}

}  // namespace tpeq
