#include "tpeq/predictors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>

#include "tpeq/rng.hpp"

namespace tpeq {

void update_weight_on_stall_exit(ThreadRuntimeState& state) {
  if (state.cum_instr > 0) state.weight = static_cast<double>(state.cum_instr);
  state.instr_in_interval = 0;
}

double last_value_cpi(std::optional<double> prev_epoch_cpi) {
  return prev_epoch_cpi ? *prev_epoch_cpi : kColdStartCpi;
}

CpiPrediction cross_config_cpi(const CpiStack& stack, int from, int to, const PredictorCoefficients& coeffs) {
  const auto& a = coeffs.alpha(from, to);
  const auto c = stack.components();
  double cpi = 0.0;
  for (int i = 0; i < kStackComponents; ++i) cpi += a[static_cast<std::size_t>(i)] * c[static_cast<std::size_t>(i)];
  if (!(cpi >= kCpiFloor)) return {kCpiFloor, true};
  return {cpi, false};
}

double predict_power(double cpi, int config, const PredictorCoefficients& coeffs) {
  const auto& b = coeffs.beta(config);
  const double inv = 1.0 / std::max(cpi, kCpiFloor);
  return std::max(0.0, b[0] + b[1] * inv + b[2] * inv * inv);
}

namespace {

// Smallest-to-largest eigenvalue ratio of the Gram matrix below which the design is
// treated as rank deficient.
constexpr double kConditionFloor = 1e-14;

template <int K>
Eigen::Matrix<double, K, 1> least_squares(const std::vector<std::array<double, K>>& rows, const std::vector<double>& y,
                                          const std::string& what) {
  using Mat = Eigen::Matrix<double, K, K>;
  using Vec = Eigen::Matrix<double, K, 1>;
  Mat gram = Mat::Zero();
  Vec rhs = Vec::Zero();
  for (std::size_t s = 0; s < rows.size(); ++s) {
    const Vec x = Eigen::Map<const Vec>(rows[s].data());
    gram.noalias() += x * x.transpose();
    rhs.noalias() += x * y[s];
  }
  const Eigen::SelfAdjointEigenSolver<Mat> eig(gram, Eigen::EigenvaluesOnly);
  const double hi = eig.eigenvalues().maxCoeff();
  const double lo = eig.eigenvalues().minCoeff();
  if (!(hi > 0.0) || lo < kConditionFloor * hi) {
    throw std::invalid_argument("train: rank-deficient design for " + what);
  }
  gram += kTrainingRidge * Mat::Identity();
  return gram.ldlt().solve(rhs);
}

}  // namespace

PredictorCoefficients train(std::span<const TrainingSample> samples, int n_configs, TrainingReport* report) {
  PredictorCoefficients out(n_configs);
  std::map<std::pair<int, int>, std::vector<const TrainingSample*>> pairs;
  std::map<int, std::vector<const TrainingSample*>> sources;
  for (const auto& s : samples) {
    if (s.source_config < 1 || s.source_config > n_configs || s.target_config < 1 || s.target_config > n_configs) {
      throw std::invalid_argument("train: sample configuration outside [1, " + std::to_string(n_configs) + "]");
    }
    if (!s.stack_at_source.valid() || !(s.observed_cpi_at_target > 0.0) || !std::isfinite(s.observed_cpi_at_target) ||
        !(s.observed_power_at_source > 0.0) || !std::isfinite(s.observed_power_at_source) ||
        !(s.stack_at_source.total() > 0.0)) {
      throw std::invalid_argument("train: observed values must be finite and positive");
    }
    pairs[{s.source_config, s.target_config}].push_back(&s);
    sources[s.source_config].push_back(&s);
  }

  for (const auto& [key, group] : pairs) {
    const std::string what = "configuration pair (" + std::to_string(key.first) + ", " + std::to_string(key.second) + ")";
    if (group.size() < 4) {
      throw std::invalid_argument("train: " + what + " has " + std::to_string(group.size()) +
                                  " samples, at least 4 are needed");
    }
    std::vector<std::array<double, 4>> rows;
    std::vector<double> y;
    for (const auto* s : group) {
      rows.push_back(s->stack_at_source.components());
      y.push_back(s->observed_cpi_at_target);
    }
    const auto a = least_squares<4>(rows, y, what);
    out.set_alpha(key.first, key.second, {a[0], a[1], a[2], a[3]});
    if (report) {
      FitResidual r{key.first, key.second, group.size(), 0.0, 0.0};
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const double pred = a[0] * rows[i][0] + a[1] * rows[i][1] + a[2] * rows[i][2] + a[3] * rows[i][3];
        r.rms += (pred - y[i]) * (pred - y[i]);
        r.mean_abs_rel += std::abs(pred - y[i]) / y[i];
      }
      r.rms = std::sqrt(r.rms / static_cast<double>(rows.size()));
      r.mean_abs_rel /= static_cast<double>(rows.size());
      report->alpha.push_back(r);
    }
  }

  for (const auto& [config, group] : sources) {
    const std::string what = "configuration " + std::to_string(config);
    if (group.size() < 3) {
      throw std::invalid_argument("train: " + what + " has " + std::to_string(group.size()) +
                                  " power samples, at least 3 are needed");
    }
    std::vector<std::array<double, 3>> rows;
    std::vector<double> y;
    for (const auto* s : group) {
      const double inv = 1.0 / s->stack_at_source.total();
      rows.push_back({1.0, inv, inv * inv});
      y.push_back(s->observed_power_at_source);
    }
    const auto b = least_squares<3>(rows, y, what);
    out.set_beta(config, {b[0], b[1], b[2]});
    if (report) {
      FitResidual r{config, 0, group.size(), 0.0, 0.0};
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const double pred = b[0] + b[1] * rows[i][1] + b[2] * rows[i][2];
        r.rms += (pred - y[i]) * (pred - y[i]);
        r.mean_abs_rel += std::abs(pred - y[i]) / y[i];
      }
      r.rms = std::sqrt(r.rms / static_cast<double>(rows.size()));
      r.mean_abs_rel /= static_cast<double>(rows.size());
      report->beta.push_back(r);
    }
  }
  return out;
}

PredictionError evaluate(std::span<const TrainingSample> samples, const PredictorCoefficients& coeffs) {
  PredictionError e;
  for (const auto& s : samples) {
    const double cpi = cross_config_cpi(s.stack_at_source, s.source_config, s.target_config, coeffs).cpi;
    const double power = predict_power(s.stack_at_source.total(), s.source_config, coeffs);
    e.cpi_mean_abs_rel += std::abs(cpi - s.observed_cpi_at_target) / s.observed_cpi_at_target;
    e.power_mean_abs_rel += std::abs(power - s.observed_power_at_source) / s.observed_power_at_source;
    ++e.samples;
  }
  if (e.samples > 0) {
    e.cpi_mean_abs_rel /= static_cast<double>(e.samples);
    e.power_mean_abs_rel /= static_cast<double>(e.samples);
  }
  return e;
}

std::vector<TrainingSample> synth_training_samples(const ConfigTable& table, const TrainingSynthParams& params) {
  table.validate();
  if (params.samples_per_pair < 1) throw std::invalid_argument("synth_training_samples: samples_per_pair must be >= 1");
  if (params.noise_sigma < 0.0 || params.noise_sigma > 0.5 || params.scaling_jitter < 0.0 || params.scaling_jitter > 0.5) {
    throw std::invalid_argument("synth_training_samples: noise and jitter must be in [0, 0.5]");
  }
  Rng rng(mix64(params.seed, 0x636f656666ULL));
  const int m = table.size();
  auto noisy = [&](double v) { return v * std::max(0.5, 1.0 + params.noise_sigma * rng.normal()); };
  std::vector<TrainingSample> out;
  out.reserve(static_cast<std::size_t>(m * m * params.samples_per_pair));
  for (int j = 1; j <= m; ++j) {
    for (int k = 1; k <= m; ++k) {
      for (int s = 0; s < params.samples_per_pair; ++s) {
        // A representative stack at micro-architectural configuration 1.
        const CpiStack base = to_level_one(
            {1.30 * rng.uniform(0.7, 1.3), rng.uniform(0.1, 2.5), rng.uniform(0.03, 0.12), rng.uniform(0.005, 0.05)},
            table);
        auto scaled = [&](int config) {
          const auto& sc = table.at(config).scaling;
          auto c = base.components();
          for (int i = 0; i < kStackComponents; ++i) {
            double f = sc[static_cast<std::size_t>(i)];
            if (params.scaling_jitter > 0.0 && config > 1) f *= std::exp(params.scaling_jitter * rng.normal());
            c[static_cast<std::size_t>(i)] *= f;
          }
          return CpiStack::from_components(c);
        };
        TrainingSample t;
        t.source_config = j;
        t.target_config = k;
        t.stack_at_source = scaled(j);
        t.observed_cpi_at_target = noisy(scaled(k).total());
        t.observed_power_at_source = noisy(table.at(j).truth_power(t.stack_at_source.total()));
        out.push_back(t);
      }
    }
  }
  return out;
}

PredictorCoefficients default_coefficients(const ConfigTable& table) {
  TrainingSynthParams p;
  p.scaling_jitter = 0.03;
  const auto samples = synth_training_samples(table, p);
  return train(samples, table.size());
}

}  // namespace tpeq
