#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tpeq/core_model.hpp"
#include "tpeq/workload.hpp"

namespace tpeq {

// How instruction counts are distributed across threads in heterogeneous workloads.
enum class WorkProfile {
  kSpread,     // persistent ratios spread uniformly between 1 and weight_ratio_max
  kSingleHot,  // one thread carries weight_ratio_max times the work of the rest
};

struct GeneratorParams {
  std::string name = "workload";
  Category category = Category::kHomogeneous;
  int n_threads = 16;
  int n_phases = 10;
  std::int64_t phase_instr = 20'000'000;
  double phase_length_spread = 0.3;  // per-phase length variation, shared by all threads
  double cpi_spread = 1.0;           // range of per-thread memory CPI at configuration 1
  double weight_ratio_max = 1.0;
  WorkProfile work_profile = WorkProfile::kSpread;
  int hot_thread = 0;
  double phase_noise = 0.0;       // multiplicative sigma on per-phase counts
  double drift_amplitude = 0.05;
  double scaling_jitter = 0.03;   // per-thread deviation from the table's CPI multipliers
  int n_stages = 2;
  std::uint64_t seed = 1;
};

// Throws std::invalid_argument on out-of-range parameters.
WorkloadSpec generate_workload(const GeneratorParams& params, const ConfigTable& table);

// Seeded parameter sets for the default corpus: seven homogeneous-like and eight
// heterogeneous-like barrier workloads.
std::vector<GeneratorParams> corpus_presets();
GeneratorParams corpus_preset(const std::string& name);

}  // namespace tpeq
