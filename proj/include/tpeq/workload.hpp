#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "tpeq/core_model.hpp"

namespace tpeq {

enum class Category { kHomogeneous, kHeterogeneous, kThreadPool, kPipeline };

std::string_view to_string(Category c);
Category category_from_string(std::string_view s);  // throws std::invalid_argument

// Barrier categories bind phase p of thread t to thread t; the others feed a queue.
inline bool is_barrier_category(Category c) {
  return c == Category::kHomogeneous || c == Category::kHeterogeneous;
}

// Temporal CPI variation: a bounded multiplicative random walk. The walk starts at 0
// when the phase starts and moves by step * U(-1, 1) per epoch, clamped to [-1, 1];
// the CPI factor is 1 + amplitude * walk.
struct DriftParams {
  double amplitude = 0.0;  // in [0, 1)
  double step = 0.25;
  std::uint64_t seed = 0;

  friend bool operator==(const DriftParams&, const DriftParams&) = default;
};

class DriftWalk {
 public:
  DriftWalk() = default;
  explicit DriftWalk(const DriftParams& params) : params_(params) {}

  double factor() const { return 1.0 + params_.amplitude * walk_; }
  int epochs() const { return epochs_; }
  void step();

 private:
  DriftParams params_;
  double walk_ = 0.0;
  int epochs_ = 0;
};

// Factor after `epochs` steps, recomputed from the start of the walk.
double drift_factor(const DriftParams& params, int epochs);

struct PhaseProfile {
  std::int64_t instr_count = 0;
  CpiStack base_stack;  // at configuration 1
  // Component multipliers per configuration (entry j-1 for configuration j).
  std::vector<std::array<double, kStackComponents>> scaling;
  DriftParams drift;

  CpiStack stack_at(int config, double drift_factor = 1.0) const;
  double cpi_at(int config, double drift_factor = 1.0) const { return stack_at(config, drift_factor).total(); }

  friend bool operator==(const PhaseProfile&, const PhaseProfile&) = default;
};

struct WorkloadSpec {
  std::string name;
  Category category = Category::kHomogeneous;
  std::uint64_t seed = 0;
  int n_stages = 1;  // pipeline only
  std::vector<std::vector<PhaseProfile>> threads;

  int n_threads() const { return static_cast<int>(threads.size()); }
  int n_phases() const { return threads.empty() ? 0 : static_cast<int>(threads.front().size()); }
  int n_configs() const;
  std::int64_t total_instructions(int thread) const;

  // Throws std::invalid_argument on a violated invariant.
  void validate() const;

  friend bool operator==(const WorkloadSpec&, const WorkloadSpec&) = default;
};

// `tpeq-workload v1` text. The header is followed by a `content-hash` line
// covering every byte after it.
std::string serialize_workload(const WorkloadSpec& w);
WorkloadSpec parse_workload(std::string_view text);
std::string workload_hash(const WorkloadSpec& w);

WorkloadSpec load_workload(const std::string& path);
void save_workload(const WorkloadSpec& w, const std::string& path);

}  // namespace tpeq
