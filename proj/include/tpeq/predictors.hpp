#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tpeq/core_model.hpp"

namespace tpeq {

inline constexpr double kCpiFloor = 0.05;
inline constexpr double kColdStartCpi = 1.0;
inline constexpr double kTrainingRidge = 1e-10;

// Relative instruction count: at the end of a synchronization stall the weight takes
// the running instruction count. A thread that has retired nothing keeps weight 1.
void update_weight_on_stall_exit(ThreadRuntimeState& state);

// Next-epoch CPI at the same configuration; the cold-start prior when there is no history.
double last_value_cpi(std::optional<double> prev_epoch_cpi);

struct CpiPrediction {
  double cpi = 0.0;
  bool clamped = false;
};

// Linear prediction of CPI at configuration `to` from a stack measured at `from`.
// Throws std::out_of_range when the pair has no coefficients.
CpiPrediction cross_config_cpi(const CpiStack& stack, int from, int to,
                               const PredictorCoefficients& coeffs);

// P = b0 + b1 / CPI + b2 / CPI^2, clamped at zero.
double predict_power(double cpi, int config, const PredictorCoefficients& coeffs);

struct TrainingSample {
  int source_config = 1;
  int target_config = 1;
  CpiStack stack_at_source;
  double observed_cpi_at_target = 0.0;
  double observed_power_at_source = 0.0;
};

struct FitResidual {
  int from = 0;  // for power fits, the configuration; `to` is 0
  int to = 0;
  std::size_t samples = 0;
  double rms = 0.0;
  double mean_abs_rel = 0.0;
};

struct TrainingReport {
  std::vector<FitResidual> alpha;
  std::vector<FitResidual> beta;
};

// Ordinary least squares per (from, to) pair for alpha and per configuration for
// beta. A pair with samples must have at least 4 (alpha) / 3 (beta) of them.
// Throws std::invalid_argument naming the pair on insufficient or rank-deficient data.
PredictorCoefficients train(std::span<const TrainingSample> samples, int n_configs,
                            TrainingReport* report = nullptr);

struct PredictionError {
  double cpi_mean_abs_rel = 0.0;
  double power_mean_abs_rel = 0.0;
  std::size_t samples = 0;
};

PredictionError evaluate(std::span<const TrainingSample> samples, const PredictorCoefficients& coeffs);

// Synthetic training corpus drawn from the ground-truth generator of `table`.
struct TrainingSynthParams {
  int samples_per_pair = 64;
  double noise_sigma = 0.0;     // multiplicative, on observed CPI and power
  double scaling_jitter = 0.0;  // per-sample deviation from the table's CPI multipliers
  std::uint64_t seed = 7;
};

std::vector<TrainingSample> synth_training_samples(const ConfigTable& table,
                                                   const TrainingSynthParams& params);

// Coefficients trained on the default synthetic corpus for `table`.
PredictorCoefficients default_coefficients(const ConfigTable& table);

// `tpeq-coeffs v1`, 17 significant digits.
std::string serialize_coefficients(const PredictorCoefficients& coeffs);
PredictorCoefficients parse_coefficients(std::string_view text);
PredictorCoefficients load_coefficients(const std::string& path);
void save_coefficients(const PredictorCoefficients& coeffs, const std::string& path);

}  // namespace tpeq
