#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tpeq/core_model.hpp"
#include "tpeq/policy.hpp"
#include "tpeq/workload.hpp"

namespace tpeq {

enum class PolicyKind { kTpeq, kTpeqW, kCriticalityStacks, kMaxBipsExact, kMaxBipsHeuristic, kStatic };

std::string_view to_string(PolicyKind kind);
PolicyKind policy_kind_from_string(std::string_view s);  // throws std::invalid_argument

struct PolicyHandle {
  PolicyKind kind = PolicyKind::kTpeq;
  bool oracle_mode = false;
  std::shared_ptr<const PredictorCoefficients> coeffs;  // required unless oracle_mode or static
  int static_level = 1;
};

std::unique_ptr<Policy> make_policy(const PolicyHandle& handle);

// CPI and power for every (thread, level) from the last measured stacks: last value,
// cross-configuration CPI, then the power model. Threads without history use the
// cold-start prior at every level.
struct Predictions {
  Matrix cpi;
  Matrix power;
  int clamped = 0;
};
Predictions predict_matrices(const EpochView& view, const PredictorCoefficients& coeffs);

// MaxBIPS: maximize sum of freq / CPI under the budget (multiple-choice knapsack).
// Exact branch and bound with an LP-relaxation bound; ties to the lexicographically
// smallest vector. Throws SizeGuardError above `max_threads`.
Assignment maxbips_exact(const Matrix& cpi, const Matrix& power, std::span<const double> freq_hz,
                         double budget, int max_threads = 32);

// Greedy on marginal IPS per watt over single-level upgrades.
Assignment maxbips_heuristic(const Matrix& cpi, const Matrix& power, std::span<const double> freq_hz,
                             double budget);

double sum_ips(const Matrix& cpi, std::span<const double> freq_hz, std::span<const int> configs);

// Criticality over one epoch: N / E * sum over intervals where the thread is active of
// dt / (number of active threads). All threads active throughout gives 1.0 each.
std::vector<double> criticality(std::span<const ActivityInterval> intervals, int n_threads);

inline constexpr double kCsAccelerateThreshold = 1.2;
inline constexpr double kCsReleaseThreshold = 0.8;

// Hysteresis: the accelerated thread keeps its slot until its criticality drops below
// 0.8 or a more critical thread exceeds 1.2. Returns the new accelerated thread or -1.
int update_accelerated_thread(int current, std::span<const double> crit);

// The accelerated thread (if any) goes to the top level, the rest to the highest
// homogeneous level that fits; residual power is spent in decreasing criticality.
Assignment criticality_stacks_assign(std::span<const double> crit, int accelerated, const Matrix& power,
                                     double budget);

// Highest level at which every phase of `workload`, run homogeneously, stays within
// the budget even at the lowest drifted CPI.
int max_feasible_static_level(const WorkloadSpec& workload, const ConfigTable& table,
                              std::span<const int> levels, double budget);

}  // namespace tpeq
