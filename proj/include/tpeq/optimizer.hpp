#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tpeq/core_model.hpp"

namespace tpeq {

// Relative tolerance for progress ties and for budget comparisons. Sums of the same
// powers taken in a different order may differ in the last bits.
inline constexpr double kRelativeTolerance = 1e-12;

bool within_budget(double total_power, double budget);

struct ParetoResult {
  std::vector<int> retained;   // 1-based, ascending
  std::vector<int> discarded;
  bool all_dominated = false;  // only configuration 1 survived out of several
};

// `performance` and `power` are per-configuration proxies with power strictly
// ascending. Keeps each configuration whose performance beats every cheaper one kept.
ParetoResult pareto_filter(std::span<const double> performance, std::span<const double> power);

enum class ProgressMode { kMicroarch, kDvfs };

// Predicted progress by the end of the next epoch:
//   instr / w + E / (w * CPI)             (E in cycles)
//   instr / w + E * freq / (w * CPI)      (DVFS, E in seconds)
// Throws std::invalid_argument when cpi or weight is not positive.
double epoch_progress(double instr_count, double weight, double cpi, double epoch_length,
                      ProgressMode mode = ProgressMode::kMicroarch, double freq_hz = 0.0);
double epoch_progress(const ThreadRuntimeState& state, double cpi, double epoch_length,
                      ProgressMode mode = ProgressMode::kMicroarch, double freq_hz = 0.0);

struct OptimizerInput {
  std::vector<double> weights;    // N, positive
  Matrix cpi;                     // N x M, positive
  Matrix power;                   // N x M, positive watts
  double budget = 0.0;
  std::vector<double> instr_count;  // N, or empty for all zero
  // Zero selects the between-barrier form 1 / (w * CPI).
  double epoch_length = 0.0;
  ProgressMode mode = ProgressMode::kMicroarch;
  std::vector<double> freq_hz;      // per level, DVFS mode only

  std::size_t n_threads() const { return weights.size(); }
  std::size_t n_levels() const { return cpi.cols(); }

  // Progress of `thread` at 0-based `level`.
  double progress(std::size_t thread, std::size_t level) const;

  void validate() const;
};

// Progress of the most lagging thread under `configs` (1-based levels).
double min_progress(const OptimizerInput& in, std::span<const int> configs);
double total_power(const OptimizerInput& in, std::span<const int> configs);

// Lagging-thread greedy with a linear scan for the arg min. Threads start at level 1;
// the lowest-progress thread below the top level is raised one level when the raise
// fits the budget, otherwise it is retired from the candidate set. Ties go to the
// lower thread index. An unaffordable all-lowest start returns feasible = false.
Assignment tpeq_assign(const OptimizerInput& in);

// Same procedure with the candidates in a min-heap: O(M N log N).
Assignment tpeq_assign_heap(const OptimizerInput& in);

inline constexpr std::uint64_t kBruteForceLimit = 10'000'000;

// Exhaustive max-min progress under the budget; ties go to the lexicographically
// smallest vector. Throws SizeGuardError when M^N exceeds `limit`.
Assignment brute_force_assign(const OptimizerInput& in, std::uint64_t limit = kBruteForceLimit);

}  // namespace tpeq
