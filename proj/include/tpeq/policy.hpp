#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tpeq/core_model.hpp"

namespace tpeq {

// A stretch of an epoch during which the set of active (non-stalled) threads is fixed.
struct ActivityInterval {
  std::int64_t cycles = 0;
  std::vector<int> active;  // 0-based thread indices
};

// Ground truth handed to policies running in oracle mode.
struct OracleView {
  Matrix cpi;    // N x M', current phase at the current drift
  Matrix power;  // N x M', upper bound over the phases reachable this epoch
  std::vector<double> weights;      // instructions in the current phase
  std::vector<double> instr_count;  // instructions retired in it so far
};

// Everything a policy may look at when choosing the next epoch's configurations.
// Levels are 1-based positions in the Pareto-filtered configuration list.
struct EpochView {
  int epoch = 0;
  const ConfigTable* table = nullptr;
  std::span<const int> levels;  // level -> table configuration index
  double budget_w = 0.0;
  std::int64_t epoch_cycles = 0;
  AdaptationMode mode = AdaptationMode::kMicroarch;
  double epoch_seconds = 0.0;
  std::span<const ThreadRuntimeState> threads;
  std::span<const ActivityInterval> intervals;  // previous epoch
  const OracleView* oracle = nullptr;
  const Assignment* previous = nullptr;  // null before the first decision

  int n_threads() const { return static_cast<int>(threads.size()); }
  int n_levels() const { return static_cast<int>(levels.size()); }
  double level_freq_hz(int level) const { return table->at(levels[level - 1]).nominal_freq_hz; }
};

struct PolicyDecision {
  Assignment assignment;
  Matrix predicted_cpi;    // empty when the policy makes no predictions
  Matrix predicted_power;
  bool fallback = false;
  int clamped_predictions = 0;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual PolicyDecision decide(const EpochView& view) = 0;
  virtual std::string name() const = 0;
  // Non-adaptive policies are not charged the per-epoch controller overhead.
  virtual bool adaptive() const { return true; }
};

}  // namespace tpeq
