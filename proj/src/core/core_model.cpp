#include "tpeq/core_model.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace tpeq {

namespace {

// Split of anchor power into static, 1/CPI and 1/CPI^2 shares.
constexpr double kStaticShare = 0.6;
constexpr double kLinearShare = 0.3;
constexpr double kQuadraticShare = 0.1;

std::array<double, 3> truth_beta_from_anchor(double anchor_power_w, double anchor_cpi) {
  return {anchor_power_w * kStaticShare, anchor_power_w * kLinearShare * anchor_cpi,
          anchor_power_w * kQuadraticShare * anchor_cpi * anchor_cpi};
}

}  // namespace

bool CpiStack::valid() const {
  for (const double c : components()) {
    if (!std::isfinite(c) || c < 0.0) return false;
  }
  return true;
}

double CoreConfig::truth_power(double cpi) const {
  const double inv = 1.0 / cpi;
  return truth_beta[0] + truth_beta[1] * inv + truth_beta[2] * inv * inv;
}

const CoreConfig& ConfigTable::at(int index) const {
  if (index < 1 || index > size()) {
    throw std::out_of_range("configuration index " + std::to_string(index) + " outside [1, " +
                            std::to_string(size()) + "]");
  }
  return configs[static_cast<std::size_t>(index - 1)];
}

double ConfigTable::reference_freq_hz() const {
  double f = 0.0;
  for (const auto& c : configs) f = std::max(f, c.nominal_freq_hz);
  return f;
}

void ConfigTable::validate() const {
  if (configs.empty()) throw std::invalid_argument("configuration table is empty");
  for (int i = 0; i < size(); ++i) {
    const CoreConfig& c = configs[static_cast<std::size_t>(i)];
    const std::string where = "configuration " + std::to_string(i + 1);
    if (c.index != i + 1) throw std::invalid_argument(where + ": index must be contiguous from 1");
    if (c.dispatch_width <= 0 || c.rob_size <= 0 || c.int_alus <= 0) {
      throw std::invalid_argument(where + ": structural fields must be positive");
    }
    if (!(c.nominal_freq_hz > 0.0)) throw std::invalid_argument(where + ": frequency must be positive");
    if (!(c.anchor_ipc > 0.0) || !(c.anchor_power_w > 0.0)) {
      throw std::invalid_argument(where + ": anchors must be positive");
    }
    for (const double s : c.scaling) {
      if (!(s > 0.0)) throw std::invalid_argument(where + ": CPI multipliers must be positive");
    }
    if (i > 0 && !(c.anchor_power_w > configs[static_cast<std::size_t>(i - 1)].anchor_power_w)) {
      throw std::invalid_argument(where + ": table must be sorted by ascending power");
    }
  }
}

CpiStack anchor_stack() {
  // Compute-bound reference; the synchronization share absorbs the remainder so the
  // total matches the configuration-1 anchor exactly.
  constexpr double kIpc1 = 0.65;
  CpiStack s{1.30, 0.15, 0.07, 0.0};
  s.synch = 1.0 / kIpc1 - s.compute - s.memory - s.branch;
  return s;
}

ConfigTable default_config_table() {
  struct Row {
    int width, rob, alus;
    double ipc, power;
    double mem_scale, branch_scale;
  };
  // dispatch width / ROB / ALUs, max IPC / max power, ROB- and frontend-driven multipliers.
  constexpr Row rows[] = {
      {1, 16, 1, 0.65, 3.93, 1.00, 1.00},  //
      {2, 32, 3, 1.06, 5.43, 0.80, 0.90},  //
      {2, 64, 3, 1.13, 5.56, 0.60, 0.90},  //
      {4, 64, 6, 1.27, 6.51, 0.55, 0.85},  //
      {4, 128, 6, 1.36, 6.69, 0.40, 0.85},
  };
  constexpr double kFreq = 3.5e9;

  const CpiStack ref = anchor_stack();
  ConfigTable table;
  table.mode = AdaptationMode::kMicroarch;
  int index = 1;
  for (const Row& r : rows) {
    CoreConfig c;
    c.index = index;
    char label[48];
    std::snprintf(label, sizeof label, "w%d-rob%d-alu%d", r.width, r.rob, r.alus);
    c.label = label;
    c.dispatch_width = r.width;
    c.rob_size = r.rob;
    c.int_alus = r.alus;
    c.nominal_freq_hz = kFreq;
    c.anchor_ipc = r.ipc;
    c.anchor_power_w = r.power;
    // Solve the compute multiplier so the reference stack hits the anchor IPC.
    const double rest = ref.memory * r.mem_scale + ref.branch * r.branch_scale + ref.synch;
    const double compute_scale = (1.0 / r.ipc - rest) / ref.compute;
    c.scaling = {compute_scale, r.mem_scale, r.branch_scale, 1.0};
    c.truth_beta = truth_beta_from_anchor(r.power, 1.0 / r.ipc);
    table.configs.push_back(c);
    ++index;
  }
  return table;
}

ConfigTable dvfs_config_table() {
  // Fixed core (configuration 3 of the micro-architectural table); memory stall
  // cycles grow with frequency because memory latency is fixed in time.
  constexpr double kTopPower = 5.56;
  constexpr double kTopFreq = 3.5e9;
  const ConfigTable micro = default_config_table();
  const CoreConfig& core = micro.at(3);
  const CpiStack ref = anchor_stack();
  const double comp = ref.compute * core.scaling[0];
  const double mem_top = ref.memory * core.scaling[1];
  const double branch = ref.branch * core.scaling[2];
  const double synch = ref.synch * core.scaling[3];

  ConfigTable table;
  table.mode = AdaptationMode::kDvfs;
  const double f1 = 2.5e9;
  const double mem1 = mem_top * f1 / kTopFreq;
  for (int j = 1; j <= 5; ++j) {
    const double f = f1 + 0.25e9 * (j - 1);
    const double v = 0.80 + 0.05 * (j - 1);
    CoreConfig c;
    c.index = j;
    char label[48];
    std::snprintf(label, sizeof label, "%.2fGHz-%.2fV", f / 1e9, v);
    c.label = label;
    c.dispatch_width = core.dispatch_width;
    c.rob_size = core.rob_size;
    c.int_alus = core.int_alus;
    c.nominal_freq_hz = f;
    c.voltage = v;
    const double mem = mem1 * f / f1;
    // Multipliers are relative to the level-1 stack.
    c.scaling = {1.0, f / f1, 1.0, 1.0};
    c.anchor_ipc = 1.0 / (comp + mem + branch + synch);
    c.anchor_power_w = kTopPower * (0.35 * v + 0.65 * v * v * f / kTopFreq);
    c.truth_beta = truth_beta_from_anchor(c.anchor_power_w, 1.0 / c.anchor_ipc);
    table.configs.push_back(c);
  }
  return table;
}

CpiStack to_level_one(const CpiStack& microarch_stack, const ConfigTable& table) {
  if (table.mode == AdaptationMode::kMicroarch) return microarch_stack;
  const ConfigTable micro = default_config_table();
  const CoreConfig& core = micro.at(3);
  const double f1 = table.at(1).nominal_freq_hz;
  return {microarch_stack.compute * core.scaling[0],
          microarch_stack.memory * core.scaling[1] * f1 / micro.reference_freq_hz(),
          microarch_stack.branch * core.scaling[2], microarch_stack.synch * core.scaling[3]};
}

PredictorCoefficients::PredictorCoefficients(int n_configs)
    : n_configs_(n_configs),
      alpha_(static_cast<std::size_t>(n_configs) * static_cast<std::size_t>(n_configs)),
      beta_(static_cast<std::size_t>(n_configs)) {
  if (n_configs <= 0) throw std::invalid_argument("coefficient table needs at least one configuration");
}

void PredictorCoefficients::check_config(int config) const {
  if (config < 1 || config > n_configs_) {
    throw std::out_of_range("configuration " + std::to_string(config) + " outside [1, " +
                            std::to_string(n_configs_) + "]");
  }
}

std::size_t PredictorCoefficients::pair_slot(int from, int to) const {
  check_config(from);
  check_config(to);
  return static_cast<std::size_t>(from - 1) * static_cast<std::size_t>(n_configs_) +
         static_cast<std::size_t>(to - 1);
}

bool PredictorCoefficients::has_alpha(int from, int to) const {
  if (from < 1 || from > n_configs_ || to < 1 || to > n_configs_) return false;
  return alpha_[pair_slot(from, to)].has_value();
}

const PredictorCoefficients::Alpha& PredictorCoefficients::alpha(int from, int to) const {
  const auto& slot = alpha_[pair_slot(from, to)];
  if (!slot) {
    throw std::out_of_range("no CPI coefficients for configuration pair (" + std::to_string(from) + ", " +
                            std::to_string(to) + ")");
  }
  return *slot;
}

void PredictorCoefficients::set_alpha(int from, int to, const Alpha& a) { alpha_[pair_slot(from, to)] = a; }

bool PredictorCoefficients::has_beta(int config) const {
  if (config < 1 || config > n_configs_) return false;
  return beta_[static_cast<std::size_t>(config - 1)].has_value();
}

const PredictorCoefficients::Beta& PredictorCoefficients::beta(int config) const {
  check_config(config);
  const auto& slot = beta_[static_cast<std::size_t>(config - 1)];
  if (!slot) throw std::out_of_range("no power coefficients for configuration " + std::to_string(config));
  return *slot;
}

void PredictorCoefficients::set_beta(int config, const Beta& b) {
  check_config(config);
  beta_[static_cast<std::size_t>(config - 1)] = b;
}

bool PredictorCoefficients::complete() const {
  for (const auto& a : alpha_) {
    if (!a) return false;
  }
  for (const auto& b : beta_) {
    if (!b) return false;
  }
  return n_configs_ > 0;
}

PredictorCoefficients PredictorCoefficients::identity(int n_configs, double b0) {
  PredictorCoefficients c(n_configs);
  for (int j = 1; j <= n_configs; ++j) {
    for (int k = 1; k <= n_configs; ++k) c.set_alpha(j, k, {1.0, 1.0, 1.0, 1.0});
    c.set_beta(j, {b0, 0.0, 0.0});
  }
  return c;
}

}  // namespace tpeq
