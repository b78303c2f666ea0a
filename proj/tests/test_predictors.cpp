#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "tpeq/errors.hpp"
#include "tpeq/predictors.hpp"
#include "tpeq/rng.hpp"

using namespace tpeq;

namespace {

// Samples generated from known coefficients, observed without noise.
std::vector<TrainingSample> planted_samples(const PredictorCoefficients& truth, int per_pair, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TrainingSample> out;
  const int m = truth.n_configs();
  for (int j = 1; j <= m; ++j) {
    for (int k = 1; k <= m; ++k) {
      for (int s = 0; s < per_pair; ++s) {
        TrainingSample t;
        t.source_config = j;
        t.target_config = k;
        t.stack_at_source = {rng.uniform(0.5, 2.0), rng.uniform(0.05, 3.0), rng.uniform(0.01, 0.2),
                             rng.uniform(0.0, 0.1)};
        const auto& a = truth.alpha(j, k);
        const auto c = t.stack_at_source.components();
        t.observed_cpi_at_target = a[0] * c[0] + a[1] * c[1] + a[2] * c[2] + a[3] * c[3];
        const auto& b = truth.beta(j);
        const double inv = 1.0 / t.stack_at_source.total();
        t.observed_power_at_source = b[0] + b[1] * inv + b[2] * inv * inv;
        out.push_back(t);
      }
    }
  }
  return out;
}

PredictorCoefficients planted_truth(int m, std::uint64_t seed) {
  Rng rng(seed);
  PredictorCoefficients c(m);
  for (int j = 1; j <= m; ++j) {
    for (int k = 1; k <= m; ++k) {
      c.set_alpha(j, k, {rng.uniform(0.3, 1.5), rng.uniform(0.3, 1.5), rng.uniform(0.5, 1.2), rng.uniform(0.8, 1.1)});
    }
    c.set_beta(j, {rng.uniform(1.0, 4.0), rng.uniform(0.5, 2.0), rng.uniform(0.0, 1.0)});
  }
  return c;
}

}  // namespace

TEST_CASE("weight update on stall exit") {
  ThreadRuntimeState s;
  CHECK(s.weight == 1.0);

  SUBCASE("first barrier exit takes the running count") {
    s.cum_instr = 1'000'000;
    s.instr_in_interval = 1'000'000;
    update_weight_on_stall_exit(s);
    CHECK(s.weight == 1e6);
    CHECK(s.instr_in_interval == 0);
  }
  SUBCASE("relative counts are preserved") {
    ThreadRuntimeState a;
    ThreadRuntimeState b;
    a.cum_instr = 1'150'000;
    b.cum_instr = 1'000'000;
    update_weight_on_stall_exit(a);
    update_weight_on_stall_exit(b);
    CHECK(a.weight / b.weight == doctest::Approx(1.15).epsilon(1e-15));
  }
  SUBCASE("no instructions yet keeps the initial weight") {
    update_weight_on_stall_exit(s);
    CHECK(s.weight == 1.0);
  }
  SUBCASE("idempotent without retired instructions in between") {
    s.cum_instr = 777;
    update_weight_on_stall_exit(s);
    const double w = s.weight;
    update_weight_on_stall_exit(s);
    CHECK(s.weight == w);
    CHECK(s.instr_in_interval == 0);
  }
}

TEST_CASE("last-value CPI") {
  CHECK(last_value_cpi(1.7) == 1.7);
  CHECK(last_value_cpi(std::nullopt) == kColdStartCpi);
  CHECK(kColdStartCpi == 1.0);
  double prev = 0;
  for (const double v : {2.0, 2.2}) prev = v;
  CHECK(last_value_cpi(prev) == 2.2);
}

TEST_CASE("cross-configuration CPI") {
  const auto id = PredictorCoefficients::identity(5);
  const CpiStack s{1.0, 0.6, 0.1, 0.05};
  const auto p = cross_config_cpi(s, 3, 3, id);
  CHECK(p.cpi == s.total());
  CHECK_FALSE(p.clamped);

  const auto zero = cross_config_cpi(CpiStack{}, 1, 2, id);
  CHECK(zero.cpi == kCpiFloor);
  CHECK(zero.clamped);

  PredictorCoefficients neg(2);
  neg.set_alpha(1, 2, {-1.0, 0.0, 0.0, 0.0});
  const auto n = cross_config_cpi(s, 1, 2, neg);
  CHECK(n.cpi == kCpiFloor);
  CHECK(n.clamped);

  CHECK_THROWS_AS(cross_config_cpi(s, 2, 1, neg), std::out_of_range);
}

TEST_CASE("power model") {
  PredictorCoefficients c(2);
  c.set_beta(1, {5.0, 0.0, 0.0});
  c.set_beta(2, {2.0, 1.0, 1.0});
  CHECK(predict_power(0.7, 1, c) == 5.0);
  CHECK(predict_power(3.0, 1, c) == 5.0);
  CHECK(predict_power(1.0, 2, c) == 4.0);

  // Non-increasing in CPI for non-negative b1, b2.
  double prev = predict_power(0.2, 2, c);
  for (double cpi = 0.25; cpi < 10.0; cpi += 0.05) {
    const double p = predict_power(cpi, 2, c);
    CHECK(p <= prev);
    prev = p;
  }

  PredictorCoefficients neg(1);
  neg.set_beta(1, {-10.0, 1.0, 0.0});
  CHECK(predict_power(2.0, 1, neg) == 0.0);
}

TEST_CASE("trainer recovers planted coefficients") {
  const auto truth = planted_truth(5, 31);
  const auto samples = planted_samples(truth, 12, 5);
  TrainingReport report;
  const auto fit = train(samples, 5, &report);
  CHECK(fit.complete());
  double worst_alpha = 0.0;
  double worst_beta = 0.0;
  for (int j = 1; j <= 5; ++j) {
    for (int k = 1; k <= 5; ++k) {
      for (int i = 0; i < 4; ++i) {
        worst_alpha = std::max(worst_alpha, std::abs(fit.alpha(j, k)[i] - truth.alpha(j, k)[i]));
      }
    }
    for (int i = 0; i < 3; ++i) worst_beta = std::max(worst_beta, std::abs(fit.beta(j)[i] - truth.beta(j)[i]));
  }
  CHECK(worst_alpha <= 1e-6);
  CHECK(worst_beta <= 1e-6);
  CHECK(report.alpha.size() == 25);
  CHECK(report.beta.size() == 5);
  for (const auto& r : report.alpha) CHECK(r.rms < 1e-6);

  // Predictions on fresh samples from the same model match the ground truth.
  const auto fresh = planted_samples(truth, 4, 77);
  for (const auto& s : fresh) {
    CHECK(cross_config_cpi(s.stack_at_source, s.source_config, s.target_config, fit).cpi ==
          doctest::Approx(s.observed_cpi_at_target).epsilon(1e-6));
  }
}

TEST_CASE("trainer self-prediction") {
  const auto samples = synth_training_samples(default_config_table(), {32, 0.0, 0.0, 3});
  const auto fit = train(samples, 5);
  for (const auto& s : samples) {
    if (s.source_config != s.target_config) continue;
    CHECK(cross_config_cpi(s.stack_at_source, s.source_config, s.source_config, fit).cpi ==
          doctest::Approx(s.stack_at_source.total()).epsilon(1e-6));
  }
}

TEST_CASE("trainer rejects unusable data") {
  const auto truth = planted_truth(2, 1);
  auto samples = planted_samples(truth, 6, 2);

  SUBCASE("too few samples for a pair") {
    std::vector<TrainingSample> few;
    for (const auto& s : samples) {
      if (s.source_config == 1 && s.target_config == 2 && few.size() < 3) few.push_back(s);
    }
    CHECK_THROWS_AS(train(few, 2), std::invalid_argument);
  }
  SUBCASE("rank-deficient design names the pair") {
    for (auto& s : samples) {
      if (s.source_config == 2 && s.target_config == 1) s.stack_at_source = {1.0, 0.5, 0.1, 0.05};
    }
    try {
      train(samples, 2);
      FAIL("expected a rank-deficiency error");
    } catch (const std::invalid_argument& e) {
      CHECK(std::string(e.what()).find("(2, 1)") != std::string::npos);
    }
  }
  SUBCASE("non-positive observations") {
    samples[3].observed_cpi_at_target = 0.0;
    CHECK_THROWS_AS(train(samples, 2), std::invalid_argument);
  }
  SUBCASE("configuration outside the table") {
    samples[0].target_config = 3;
    CHECK_THROWS_AS(train(samples, 2), std::invalid_argument);
  }
}

TEST_CASE("training on the synthetic corpus") {
  const ConfigTable table = default_config_table();
  const auto coeffs = default_coefficients(table);
  CHECK(coeffs.complete());
  // Config 1 at its anchor CPI.
  CHECK(predict_power(table.at(1).anchor_cpi(), 1, coeffs) == doctest::Approx(3.93).epsilon(0.05));
  CHECK(predict_power(table.at(5).anchor_cpi(), 5, coeffs) == doctest::Approx(6.69).epsilon(0.05));

  TrainingSynthParams noisy;
  noisy.noise_sigma = 0.05;
  noisy.scaling_jitter = 0.03;
  noisy.seed = 100;
  const auto fit = train(synth_training_samples(table, noisy), table.size());
  noisy.seed = 200;
  const auto err = evaluate(synth_training_samples(table, noisy), fit);
  CHECK(err.cpi_mean_abs_rel <= 0.137);
  CHECK(err.power_mean_abs_rel <= 0.05);
}

TEST_CASE("synthetic corpus is deterministic") {
  const ConfigTable table = default_config_table();
  TrainingSynthParams p;
  p.noise_sigma = 0.05;
  const auto a = synth_training_samples(table, p);
  const auto b = synth_training_samples(table, p);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].stack_at_source == b[i].stack_at_source);
    CHECK(a[i].observed_cpi_at_target == b[i].observed_cpi_at_target);
  }
  p.noise_sigma = 0.9;
  CHECK_THROWS_AS(synth_training_samples(table, p), std::invalid_argument);
}

TEST_CASE("coefficient file round trip") {
  const auto c = default_coefficients(default_config_table());
  const std::string text = serialize_coefficients(c);
  const auto back = parse_coefficients(text);
  CHECK(back == c);
  CHECK(serialize_coefficients(back) == text);

  SUBCASE("comments and blank lines are ignored") {
    CHECK(parse_coefficients("# trained offline\n\n" + text) == c);
  }
  SUBCASE("wrong header") {
    try {
      parse_coefficients("tpeq-coeffs v9\nconfigs 1\nbeta 1 1 0 0\n");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 1);
    }
  }
  SUBCASE("bad value reports its line") {
    try {
      parse_coefficients("tpeq-coeffs v1\nconfigs 1\nalpha 1 1 1 1 1 1\nbeta 1 1 zero 0\n");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 4);
    }
  }
  SUBCASE("duplicate entries") {
    CHECK_THROWS_AS(parse_coefficients("tpeq-coeffs v1\nconfigs 1\nbeta 1 1 0 0\nbeta 1 1 0 0\n"), ParseError);
  }
  SUBCASE("index out of range") {
    CHECK_THROWS_AS(parse_coefficients("tpeq-coeffs v1\nconfigs 1\nbeta 2 1 0 0\n"), ParseError);
  }
}

TEST_CASE("coefficient table") {
  PredictorCoefficients c(3);
  CHECK_FALSE(c.complete());
  CHECK_FALSE(c.has_alpha(1, 2));
  CHECK_THROWS_AS(c.alpha(1, 2), std::out_of_range);
  CHECK_THROWS_AS(c.set_beta(4, {1, 0, 0}), std::out_of_range);
  const auto id = PredictorCoefficients::identity(3, 2.5);
  CHECK(id.complete());
  CHECK(id.beta(2) == PredictorCoefficients::Beta{2.5, 0.0, 0.0});
}
