#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tpeq/core_model.hpp"
#include "tpeq/policy.hpp"
#include "tpeq/workload.hpp"

namespace tpeq {

struct ThrottleRule {
  double overshoot_watts = 3.0;  // strict: more than this over budget
  int consecutive_epochs = 3;
};

struct SimConfig {
  std::int64_t epoch_cycles = 3'500'000;  // 1 ms at 3.5 GHz
  double budget_watts = 80.0;
  int n_cores = 16;
  double idle_power_fraction = 1.0;  // stalled threads spin at this fraction of active power
  ThrottleRule throttle;
  std::int64_t controller_overhead_cycles = 20'000;
  double measurement_noise = 0.0;  // multiplicative sigma on measured CPI stacks
  std::uint64_t rng_seed = 1;
  int max_epochs = 1'000'000;
};

enum class AdvanceEvent { kNone, kBarrierReached, kWorkloadDone };

struct AdvanceResult {
  std::int64_t retired = 0;
  std::int64_t consumed = 0;
  AdvanceEvent event = AdvanceEvent::kNone;
};

// Runs a thread for up to `cycles` at `cpi`. Retires floor(cycles / cpi) instructions
// capped at `remaining`; finishing the phase consumes only the cycles it needs.
AdvanceResult advance_thread(std::int64_t remaining, double cpi, std::int64_t cycles,
                             bool last_phase = false);
AdvanceResult advance_thread(const PhaseProfile& phase, std::int64_t retired_in_phase, int config,
                             double drift_factor, std::int64_t cycles, bool last_phase = false);

// Reference cycles to retire `remaining` instructions at `cpi`.
std::int64_t cycles_to_finish(std::int64_t remaining, double cpi);

struct PowerAccount {
  std::vector<double> per_thread_w;
  double total_w = 0.0;
};

// Active share at full power, stalled share at idle_fraction of it.
PowerAccount account_power(std::span<const double> active_power_w, std::span<const double> stalled_frac,
                           double idle_fraction);

// True when each of the last `rule.consecutive_epochs` totals exceeded budget + overshoot.
bool throttle_check(std::span<const double> total_power_history, double budget, const ThrottleRule& rule);

struct OvershootStats {
  double mean_over_w = 0.0;  // over epochs that exceeded the budget
  double max_over_w = 0.0;
  int epochs_over_budget = 0;
  int max_consecutive_over_trigger = 0;  // longest run of epochs above budget + rule.overshoot
  int throttle_count = 0;
  int infeasible_epochs = 0;

  friend bool operator==(const OvershootStats&, const OvershootStats&) = default;
};

struct WeightUpdate {
  int epoch = 0;
  int thread = 0;
  int tasks_completed = 0;
  double weight = 0.0;
};

struct SimResult {
  std::string workload_name;
  std::string workload_hash;
  std::string policy;
  std::vector<int> levels;  // Pareto level -> table configuration
  std::vector<EpochRecord> epochs;
  std::int64_t total_cycles = 0;
  std::int64_t epoch_cycles = 0;
  std::vector<std::int64_t> stall_cycles;
  std::vector<std::int64_t> retired;
  OvershootStats overshoot;
  std::vector<WeightUpdate> weight_log;
  double cpi_prediction_mare = 0.0;  // mean |pred - observed| / observed at the assigned level
  double power_prediction_mare = 0.0;
  std::size_t predictions_scored = 0;

  std::int64_t total_stall_cycles() const;
};

// Pareto levels of `table` from its anchors.
std::vector<int> pareto_levels(const ConfigTable& table);

// Epoch-driven execution of `workload` under `policy`. Deterministic for fixed inputs.
// Throws std::invalid_argument when the thread count differs from sim.n_cores and
// std::runtime_error when the policy returns a malformed assignment.
SimResult run(const WorkloadSpec& workload, Policy& policy, const SimConfig& sim, const ConfigTable& table);

// Telemetry: one row per (epoch, thread).
inline constexpr std::string_view kTelemetryHeader =
    "epoch,thread,config,retired,cpi,comp,mem,branch,synch,power_w,stalled_frac";

struct TelemetryRow {
  int epoch = 0;
  int thread = 0;
  ThreadEpochRecord record;

  friend bool operator==(const TelemetryRow&, const TelemetryRow&) = default;
};

std::string telemetry_csv(const SimResult& result);
std::vector<TelemetryRow> parse_telemetry_csv(std::string_view text);

// Run summary, `tpeq-summary v1`.
struct RunSummary {
  std::string workload_name;
  std::string workload_hash;
  std::string policy;
  bool oracle = false;
  double budget_w = 0.0;
  std::int64_t epoch_cycles = 0;
  std::int64_t makespan_cycles = 0;
  int epochs = 0;
  std::int64_t total_stall_cycles = 0;
  std::vector<std::int64_t> stall_cycles;
  OvershootStats overshoot;
  double cpi_prediction_mare = 0.0;
  double power_prediction_mare = 0.0;

  friend bool operator==(const RunSummary&, const RunSummary&) = default;
};

RunSummary summarize(const SimResult& result, double budget_w, bool oracle);
std::string serialize_summary(const RunSummary& s);
RunSummary parse_summary(std::string_view text);

}  // namespace tpeq
