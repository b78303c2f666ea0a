#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tpeq {

inline constexpr int kStackComponents = 4;

// Cycles-per-instruction broken down by cause.
struct CpiStack {
  double compute = 0.0;
  double memory = 0.0;
  double branch = 0.0;
  double synch = 0.0;

  double total() const { return compute + memory + branch + synch; }
  std::array<double, kStackComponents> components() const { return {compute, memory, branch, synch}; }
  static CpiStack from_components(const std::array<double, kStackComponents>& c) {
    return {c[0], c[1], c[2], c[3]};
  }
  CpiStack scaled(double factor) const {
    return {compute * factor, memory * factor, branch * factor, synch * factor};
  }
  bool valid() const;

  friend bool operator==(const CpiStack&, const CpiStack&) = default;
};

// Dense row-major matrix of reals; rows are threads, columns are configuration levels.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// One per-core operating point. The micro-architectural fields are descriptive;
// `scaling` and `truth_beta` drive the synthetic ground-truth generator.
struct CoreConfig {
  int index = 0;  // 1-based
  std::string label;
  int dispatch_width = 0;
  int rob_size = 0;
  int int_alus = 0;
  double nominal_freq_hz = 0.0;
  double voltage = 1.0;

  // Calibration anchors: maximum observed IPC and power at this configuration.
  double anchor_ipc = 0.0;
  double anchor_power_w = 0.0;

  // Per-component CPI multipliers relative to configuration 1.
  std::array<double, kStackComponents> scaling{1.0, 1.0, 1.0, 1.0};
  // Ground-truth power model P = b0 + b1/CPI + b2/CPI^2.
  std::array<double, 3> truth_beta{0.0, 0.0, 0.0};

  double anchor_cpi() const { return 1.0 / anchor_ipc; }
  double anchor_ips() const { return nominal_freq_hz * anchor_ipc; }
  double truth_power(double cpi) const;
};

enum class AdaptationMode { kMicroarch, kDvfs };

// Configurations sorted by ascending representative power.
struct ConfigTable {
  std::vector<CoreConfig> configs;
  AdaptationMode mode = AdaptationMode::kMicroarch;

  int size() const { return static_cast<int>(configs.size()); }
  const CoreConfig& at(int index) const;  // 1-based
  double reference_freq_hz() const;       // highest nominal frequency

  // Throws std::invalid_argument when an invariant does not hold.
  void validate() const;
};

// Five micro-architectural configurations: dispatch width, ROB and ALU count per
// level, with max-IPC / max-power anchors from a compute-bound reference run.
ConfigTable default_config_table();

// Five voltage/frequency levels from 0.8 V / 2.5 GHz to 1.0 V / 3.5 GHz on a fixed core.
ConfigTable dvfs_config_table();

// Reference CPI stack at configuration 1 that reproduces the anchor IPC of every level.
CpiStack anchor_stack();

// Re-expresses a stack measured on micro-architectural configuration 1 at level 1 of
// `table` (identity for the micro-architectural table).
CpiStack to_level_one(const CpiStack& microarch_stack, const ConfigTable& table);

struct ThreadRuntimeState {
  std::int64_t cum_instr = 0;
  double weight = 1.0;
  std::int64_t instr_in_interval = 0;
  int current_config = 1;
  bool stalled = false;
  std::int64_t stall_cycles = 0;
  CpiStack last_stack;
  int stack_config = 1;
  bool has_stack = false;
};

struct Assignment {
  std::vector<int> configs;  // 1-based level per thread
  double total_power = 0.0;
  bool feasible = true;
};

struct ThreadEpochRecord {
  int config = 1;
  std::int64_t retired = 0;
  double cpi = 0.0;
  CpiStack stack;
  double power_w = 0.0;
  double stalled_frac = 0.0;

  friend bool operator==(const ThreadEpochRecord&, const ThreadEpochRecord&) = default;
};

struct EpochRecord {
  int epoch_index = 0;
  std::int64_t cycles = 0;  // length of this epoch, shorter for the final one
  std::vector<ThreadEpochRecord> threads;
  double total_power = 0.0;
  bool throttled = false;
  bool infeasible = false;
  bool policy_fallback = false;
};

// Cross-configuration CPI coefficients alpha(j,k) and power coefficients beta(j).
class PredictorCoefficients {
 public:
  using Alpha = std::array<double, kStackComponents>;
  using Beta = std::array<double, 3>;

  PredictorCoefficients() = default;
  explicit PredictorCoefficients(int n_configs);

  int n_configs() const { return n_configs_; }

  bool has_alpha(int from, int to) const;
  const Alpha& alpha(int from, int to) const;  // throws std::out_of_range when missing
  void set_alpha(int from, int to, const Alpha& a);

  bool has_beta(int config) const;
  const Beta& beta(int config) const;
  void set_beta(int config, const Beta& b);

  bool complete() const;

  // alpha = 1 for every pair, beta(j) = (b0, 0, 0).
  static PredictorCoefficients identity(int n_configs, double b0 = 0.0);

  friend bool operator==(const PredictorCoefficients&, const PredictorCoefficients&) = default;

 private:
  std::size_t pair_slot(int from, int to) const;
  void check_config(int config) const;

  int n_configs_ = 0;
  std::vector<std::optional<Alpha>> alpha_;
  std::vector<std::optional<Beta>> beta_;
};

}  // namespace tpeq
