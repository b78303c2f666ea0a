#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tpeq/simulator.hpp"

namespace tpeq {

struct SpeedupRow {
  std::string workload;
  std::string policy;
  std::string baseline;
  std::int64_t makespan = 0;
  std::int64_t baseline_makespan = 0;
  double speedup = 1.0;  // baseline makespan / makespan
  std::int64_t stall_cycles = 0;
  std::int64_t baseline_stall_cycles = 0;
  double stall_reduction = 0.0;  // 1 - stall / baseline stall
};

struct PolicyMean {
  std::string policy;
  double geomean_speedup = 1.0;
  std::size_t workloads = 0;
};

struct Report {
  std::vector<SpeedupRow> rows;
  std::vector<PolicyMean> means;
};

// Speedups of every run relative to the `baseline` policy run on the same workload.
// Throws HashMismatchError when two runs of one workload name carry different hashes,
// std::invalid_argument when a workload has no baseline run.
Report build_report(std::span<const RunSummary> runs, std::string_view baseline);

std::string speedup_csv(const Report& report);
std::string means_csv(const Report& report);
std::string overshoot_csv(std::span<const RunSummary> runs);

// Cumulative retired instructions per thread at the end of every epoch.
std::string progress_series_csv(std::span<const TelemetryRow> rows, std::int64_t epoch_cycles);

// Epochs spent by each thread at each configuration; each row sums to the thread's epochs.
std::string config_histogram_csv(std::span<const TelemetryRow> rows, int n_configs);

double geometric_mean(std::span<const double> values);

}  // namespace tpeq
