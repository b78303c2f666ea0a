#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>
#include <numeric>
#include <vector>

#include "tpeq/errors.hpp"
#include "tpeq/optimizer.hpp"
#include "tpeq/policies.hpp"
#include "tpeq/predictors.hpp"
#include "tpeq/simulator.hpp"
#include "tpeq/workload_gen.hpp"

using namespace tpeq;

namespace {

// Same stack for every thread and phase; drift off.
WorkloadSpec flat_workload(const std::vector<std::vector<std::int64_t>>& counts, const CpiStack& stack,
                           const ConfigTable& table, Category category = Category::kHeterogeneous) {
  WorkloadSpec w;
  w.name = "flat";
  w.category = category;
  for (const auto& row : counts) {
    std::vector<PhaseProfile> phases;
    for (const auto c : row) {
      PhaseProfile p;
      p.instr_count = c;
      p.base_stack = stack;
      for (int j = 1; j <= table.size(); ++j) p.scaling.push_back(table.at(j).scaling);
      phases.push_back(p);
    }
    w.threads.push_back(phases);
  }
  w.validate();
  return w;
}

// Returns whatever the callback says, marked feasible.
class ScriptedPolicy : public Policy {
 public:
  explicit ScriptedPolicy(std::function<std::vector<int>(const EpochView&)> f) : f_(std::move(f)) {}
  PolicyDecision decide(const EpochView& view) override {
    PolicyDecision d;
    d.assignment.configs = f_(view);
    return d;
  }
  std::string name() const override { return "scripted"; }
  bool adaptive() const override { return false; }

 private:
  std::function<std::vector<int>(const EpochView&)> f_;
};

std::unique_ptr<Policy> static_policy(int level) {
  PolicyHandle h;
  h.kind = PolicyKind::kStatic;
  h.static_level = level;
  return make_policy(h);
}

std::unique_ptr<Policy> oracle_policy(PolicyKind kind) {
  PolicyHandle h;
  h.kind = kind;
  h.oracle_mode = true;
  return make_policy(h);
}

SimConfig config_for(int n, std::int64_t epoch = 3'500'000) {
  SimConfig s;
  s.n_cores = n;
  s.epoch_cycles = epoch;
  return s;
}

// Phase p of a thread has started once it retired more than the sum of the earlier phases.
void check_barriers(const WorkloadSpec& w, const SimResult& r) {
  const int n = w.n_threads();
  std::vector<std::int64_t> cum(static_cast<std::size_t>(n), 0);
  for (const auto& e : r.epochs) {
    for (int t = 0; t < n; ++t) cum[static_cast<std::size_t>(t)] += e.threads[static_cast<std::size_t>(t)].retired;
    for (int a = 0; a < n; ++a) {
      std::int64_t before = 0;
      for (int p = 0; p < w.n_phases(); ++p) {
        if (cum[static_cast<std::size_t>(a)] <= before) break;
        // Thread a is executing phase p, so everyone finished phases < p.
        for (int b = 0; b < n; ++b) {
          std::int64_t need = 0;
          for (int q = 0; q < p; ++q) need += w.threads[static_cast<std::size_t>(b)][static_cast<std::size_t>(q)].instr_count;
          CHECK(cum[static_cast<std::size_t>(b)] >= need);
        }
        before += w.threads[static_cast<std::size_t>(a)][static_cast<std::size_t>(p)].instr_count;
      }
    }
  }
}

void check_conservation(const WorkloadSpec& w, const SimResult& r) {
  std::int64_t total = 0;
  std::int64_t retired = 0;
  for (int t = 0; t < w.n_threads(); ++t) {
    total += w.total_instructions(t);
    retired += r.retired[static_cast<std::size_t>(t)];
    if (is_barrier_category(w.category)) CHECK(r.retired[static_cast<std::size_t>(t)] == w.total_instructions(t));
  }
  CHECK(retired == total);
  std::int64_t from_epochs = 0;
  for (const auto& e : r.epochs) {
    for (const auto& tr : e.threads) from_epochs += tr.retired;
  }
  CHECK(from_epochs == total);
}

}  // namespace

TEST_CASE("advance_thread") {
  SUBCASE("finishes the phase") {
    const auto a = advance_thread(30, 2.0, 100);
    CHECK(a.retired == 30);
    CHECK(a.consumed == 60);
    CHECK(a.event == AdvanceEvent::kBarrierReached);
  }
  SUBCASE("runs out of cycles") {
    const auto a = advance_thread(1000, 2.0, 100);
    CHECK(a.retired == 50);
    CHECK(a.consumed == 100);
    CHECK(a.event == AdvanceEvent::kNone);
  }
  SUBCASE("last phase reports completion") {
    CHECK(advance_thread(10, 1.0, 100, true).event == AdvanceEvent::kWorkloadDone);
  }
  SUBCASE("drift scales the ground-truth CPI") {
    const ConfigTable table = default_config_table();
    PhaseProfile p;
    p.instr_count = 1000;
    p.base_stack = {1.0, 0.0, 0.0, 0.0};
    for (int j = 1; j <= table.size(); ++j) p.scaling.push_back(table.at(j).scaling);
    const auto a = advance_thread(p, 0, 1, 1.1, 110);
    CHECK(a.retired == 100);
    CHECK(a.event == AdvanceEvent::kNone);
    const auto b = advance_thread(p, 950, 1, 1.0, 110);
    CHECK(b.retired == 50);
    CHECK(b.consumed == 50);
  }
  CHECK(cycles_to_finish(3, 1.0 / 3.0) == 1);
  CHECK(cycles_to_finish(10, 2.5) == 25);
  CHECK(cycles_to_finish(3, 1.1) == 4);
}

TEST_CASE("account_power") {
  const std::vector<double> active{5.0, 5.0, 4.0};
  const std::vector<double> stalled{0.0, 1.0, 0.5};
  const auto spin = account_power(active, stalled, 1.0);
  CHECK(spin.per_thread_w == std::vector<double>{5.0, 5.0, 4.0});
  CHECK(spin.total_w == 14.0);
  const auto idle = account_power(active, stalled, 0.25);
  CHECK(idle.per_thread_w[1] == 1.25);
  CHECK(idle.per_thread_w[2] == doctest::Approx(2.5));
  const std::vector<double> sixteen(16, 5.0);
  const std::vector<double> none(16, 0.0);
  CHECK(account_power(sixteen, none, 1.0).total_w <= 80.0);
}

TEST_CASE("throttle_check") {
  const ThrottleRule rule;
  const double b = 80;
  CHECK(throttle_check(std::vector<double>{b + 4, b + 4, b + 4}, b, rule));
  CHECK_FALSE(throttle_check(std::vector<double>{b + 4, b + 2, b + 4}, b, rule));
  CHECK_FALSE(throttle_check(std::vector<double>{b + 3, b + 3, b + 3}, b, rule));
  CHECK_FALSE(throttle_check(std::vector<double>{b + 4, b + 4}, b, rule));
  CHECK(throttle_check(std::vector<double>{b, b + 4, b + 4, b + 4}, b, rule));
  CHECK_FALSE(throttle_check(std::vector<double>{b + 4, b + 4, b + 4, b}, b, rule));
}

TEST_CASE("single thread, single epoch") {
  const ConfigTable table = default_config_table();
  const auto w = flat_workload({{3'500'000}}, {1.0, 0.0, 0.0, 0.0}, table);
  auto policy = static_policy(1);
  const SimResult r = run(w, *policy, config_for(1), table);
  CHECK(r.epochs.size() == 1);
  CHECK(r.total_cycles == 3'500'000);
  CHECK(r.total_stall_cycles() == 0);
  CHECK(r.epochs[0].threads[0].retired == 3'500'000);
  CHECK(r.epochs[0].threads[0].cpi == doctest::Approx(1.0));
}

TEST_CASE("barrier stall equals the partner's extra work") {
  const ConfigTable table = default_config_table();
  const std::int64_t x = 1'000'000;
  const CpiStack s{1.2, 0.3, 0.0, 0.0};
  const auto w = flat_workload({{x}, {2 * x}}, s, table);
  auto policy = static_policy(2);
  const SimResult r = run(w, *policy, config_for(2), table);
  const double cpi = w.threads[0][0].cpi_at(2);
  CHECK(r.stall_cycles[1] == 0);
  CHECK(r.stall_cycles[0] == cycles_to_finish(2 * x, cpi) - cycles_to_finish(x, cpi));
  CHECK(r.total_cycles == cycles_to_finish(2 * x, cpi));
}

TEST_CASE("stalled threads burn idle power") {
  const ConfigTable table = default_config_table();
  const std::int64_t x = 3'500'000;
  const CpiStack s{1.0, 0.0, 0.0, 0.0};
  const auto w = flat_workload({{x}, {4 * x}}, s, table);
  auto policy = static_policy(1);
  SimConfig sim = config_for(2);
  sim.idle_power_fraction = 0.5;
  const SimResult r = run(w, *policy, sim, table);
  REQUIRE(r.epochs.size() == 4);
  const double p = table.at(1).truth_power(1.0);
  CHECK(r.epochs[0].threads[0].stalled_frac == 0.0);
  CHECK(r.epochs[0].threads[0].power_w == doctest::Approx(p));
  CHECK(r.epochs[2].threads[0].stalled_frac == 1.0);
  CHECK(r.epochs[2].threads[0].power_w == doctest::Approx(0.5 * p));
  for (const auto& e : r.epochs) {
    CHECK(e.total_power == doctest::Approx(e.threads[0].power_w + e.threads[1].power_w));
  }
}

TEST_CASE("every telemetry row of a static run carries its configuration") {
  const ConfigTable table = default_config_table();
  const auto w = generate_workload(corpus_preset("barnes_like"), table);
  auto policy = static_policy(3);
  const SimResult r = run(w, *policy, SimConfig{}, table);
  for (const auto& row : parse_telemetry_csv(telemetry_csv(r))) CHECK(row.record.config == 3);
}

TEST_CASE("corpus runs: conservation, barriers, determinism, budget") {
  const ConfigTable table = default_config_table();
  for (const char* name : {"fft_like", "water_nsq_like", "fluidanimate_like"}) {
    CAPTURE(name);
    const auto w = generate_workload(corpus_preset(name), table);
    for (const auto kind : {PolicyKind::kTpeq, PolicyKind::kCriticalityStacks, PolicyKind::kMaxBipsHeuristic}) {
      CAPTURE(to_string(kind));
      auto p1 = oracle_policy(kind);
      const SimResult a = run(w, *p1, SimConfig{}, table);
      check_conservation(w, a);
      check_barriers(w, a);
      for (const auto& e : a.epochs) {
        if (!e.throttled) CHECK(within_budget(e.total_power, 80.0));
      }
      auto p2 = oracle_policy(kind);
      const SimResult b = run(w, *p2, SimConfig{}, table);
      CHECK(telemetry_csv(a) == telemetry_csv(b));
      CHECK(a.total_cycles == b.total_cycles);
    }
  }
}

TEST_CASE("total cycles add up over epochs") {
  const ConfigTable table = default_config_table();
  const auto w = generate_workload(corpus_preset("kmeans_like"), table);
  auto policy = oracle_policy(PolicyKind::kTpeq);
  const SimResult r = run(w, *policy, SimConfig{}, table);
  std::int64_t sum = 0;
  for (std::size_t i = 0; i < r.epochs.size(); ++i) {
    if (i + 1 < r.epochs.size()) CHECK(r.epochs[i].cycles == r.epoch_cycles);
    CHECK(r.epochs[i].cycles <= r.epoch_cycles);
    sum += r.epochs[i].cycles;
  }
  CHECK(sum == r.total_cycles);
}

TEST_CASE("symmetric threads get symmetric configurations") {
  const ConfigTable table = default_config_table();
  const CpiStack s{1.3, 0.8, 0.08, 0.02};
  const std::vector<std::vector<std::int64_t>> counts(16, std::vector<std::int64_t>(3, 8'000'000));
  const auto w = flat_workload(counts, s, table, Category::kHomogeneous);
  for (int level = 1; level <= table.size(); ++level) {
    CAPTURE(level);
    SimConfig sim;
    sim.budget_watts = 16.0 * table.at(level).truth_power(w.threads[0][0].cpi_at(level));
    auto policy = oracle_policy(PolicyKind::kTpeq);
    const SimResult r = run(w, *policy, sim, table);
    for (const auto& e : r.epochs) {
      for (const auto& tr : e.threads) CHECK(tr.config == e.threads[0].config);
    }
    CHECK(r.epochs[0].threads[0].config == level);
  }
  // Between two levels the greedy splits threads across adjacent levels only.
  SimConfig sim;
  sim.budget_watts = 80.0;
  auto policy = oracle_policy(PolicyKind::kTpeq);
  const SimResult r = run(w, *policy, sim, table);
  for (const auto& e : r.epochs) {
    int lo = 99;
    int hi = 0;
    for (const auto& tr : e.threads) {
      lo = std::min(lo, tr.config);
      hi = std::max(hi, tr.config);
    }
    CHECK(hi - lo <= 1);
  }
}

TEST_CASE("throttling after three epochs above the trigger") {
  const ConfigTable table = default_config_table();
  const CpiStack s{1.0, 0.5, 0.0, 0.0};
  const std::vector<std::vector<std::int64_t>> counts(4, std::vector<std::int64_t>{60'000'000});
  const auto w = flat_workload(counts, s, table);
  const double p5 = table.at(5).truth_power(w.threads[0][0].cpi_at(5));
  const double p1 = table.at(1).truth_power(w.threads[0][0].cpi_at(1));

  SimConfig sim = config_for(4);
  sim.budget_watts = 4 * p5 - 4.0;  // 4 W over at the top level

  SUBCASE("sustained overshoot is throttled") {
    ScriptedPolicy policy([](const EpochView& v) { return std::vector<int>(static_cast<std::size_t>(v.n_threads()), 5); });
    const SimResult r = run(w, policy, sim, table);
    REQUIRE(r.epochs.size() > 4);
    for (int e = 0; e < 3; ++e) CHECK_FALSE(r.epochs[static_cast<std::size_t>(e)].throttled);
    CHECK(r.epochs[3].throttled);
    for (const auto& tr : r.epochs[3].threads) CHECK(tr.config == 4);
    CHECK(r.overshoot.throttle_count >= 1);
    CHECK(r.overshoot.max_consecutive_over_trigger >= 3);
  }
  SUBCASE("two epochs over, then one under: no throttle") {
    ScriptedPolicy policy([](const EpochView& v) {
      return std::vector<int>(static_cast<std::size_t>(v.n_threads()), v.epoch % 3 == 2 ? 1 : 5);
    });
    const SimResult r = run(w, policy, sim, table);
    CHECK(r.overshoot.throttle_count == 0);
    CHECK(r.overshoot.max_consecutive_over_trigger == 2);
    for (const auto& e : r.epochs) CHECK_FALSE(e.throttled);
    CHECK(p1 < p5);
  }
}

TEST_CASE("infeasible budget runs at the lowest level, flagged") {
  const ConfigTable table = default_config_table();
  const auto w = generate_workload(corpus_preset("fft_like"), table);
  SimConfig sim;
  sim.budget_watts = 20.0;
  auto policy = oracle_policy(PolicyKind::kTpeq);
  const SimResult r = run(w, *policy, sim, table);
  for (const auto& e : r.epochs) {
    CHECK(e.infeasible);
    CHECK(e.throttled);
    for (const auto& tr : e.threads) CHECK(tr.config == 1);
  }
  CHECK(r.overshoot.infeasible_epochs == static_cast<int>(r.epochs.size()));
}

TEST_CASE("malformed assignments abort the run") {
  const ConfigTable table = default_config_table();
  const auto w = flat_workload({{1000}, {1000}}, {1.0, 0.0, 0.0, 0.0}, table);
  ScriptedPolicy short_vector([](const EpochView&) { return std::vector<int>{1}; });
  CHECK_THROWS_AS(run(w, short_vector, config_for(2), table), std::runtime_error);
  ScriptedPolicy bad_level([](const EpochView&) { return std::vector<int>{1, 9}; });
  CHECK_THROWS_AS(run(w, bad_level, config_for(2), table), std::runtime_error);
  auto policy = static_policy(1);
  CHECK_THROWS_AS(run(w, *policy, config_for(3), table), std::invalid_argument);
}

TEST_CASE("weight updates happen at stall exits") {
  const ConfigTable table = default_config_table();
  // Thread 1 has twice the work; thread 0 waits at each barrier.
  const auto w = flat_workload({{1'000'000, 1'000'000, 1'000'000}, {2'000'000, 2'000'000, 2'000'000}},
                               {1.0, 0.2, 0.0, 0.0}, table);
  auto policy = static_policy(1);
  SimConfig sim = config_for(2, 500'000);
  const SimResult r = run(w, *policy, sim, table);
  REQUIRE_FALSE(r.weight_log.empty());
  for (const auto& u : r.weight_log) {
    const std::int64_t per_phase = u.thread == 0 ? 1'000'000 : 2'000'000;
    CHECK(u.weight == static_cast<double>(per_phase * u.tasks_completed));
  }
}

TEST_CASE("queue categories run to completion") {
  const ConfigTable table = default_config_table();
  for (const Category c : {Category::kThreadPool, Category::kPipeline}) {
    GeneratorParams p;
    p.category = c;
    p.n_threads = 8;
    p.n_phases = 6;
    p.phase_instr = 4'000'000;
    p.n_stages = 2;
    p.weight_ratio_max = 1.3;
    p.seed = 17;
    const auto w = generate_workload(p, table);
    for (const auto kind : {PolicyKind::kTpeq, PolicyKind::kTpeqW, PolicyKind::kCriticalityStacks}) {
      auto policy = oracle_policy(kind);
      const SimResult r = run(w, *policy, config_for(8), table);
      check_conservation(w, r);
      CHECK(r.total_cycles > 0);
    }
  }
}

TEST_CASE("telemetry and summary round trip") {
  const ConfigTable table = default_config_table();
  const auto w = generate_workload(corpus_preset("lu_cont_like"), table);
  PolicyHandle h;
  h.kind = PolicyKind::kTpeq;
  h.coeffs = std::make_shared<const PredictorCoefficients>(default_coefficients(table));
  auto policy = make_policy(h);
  SimConfig sim;
  sim.measurement_noise = 0.02;
  const SimResult r = run(w, *policy, sim, table);

  const std::string csv = telemetry_csv(r);
  CHECK(csv.substr(0, csv.find('\n')) == kTelemetryHeader);
  const auto rows = parse_telemetry_csv(csv);
  REQUIRE(rows.size() == r.epochs.size() * 16);
  for (const auto& row : rows) {
    CHECK(row.record == r.epochs[static_cast<std::size_t>(row.epoch)].threads[static_cast<std::size_t>(row.thread)]);
  }

  const RunSummary s = summarize(r, sim.budget_watts, false);
  CHECK(parse_summary(serialize_summary(s)) == s);
  CHECK(s.makespan_cycles == r.total_cycles);
  CHECK(s.total_stall_cycles == std::accumulate(s.stall_cycles.begin(), s.stall_cycles.end(), std::int64_t{0}));

  CHECK_THROWS_AS(parse_telemetry_csv("epoch,thread\n"), ParseError);
  CHECK_THROWS_AS(parse_telemetry_csv(std::string(kTelemetryHeader) + "\n1,2,3\n"), ParseError);
  CHECK_THROWS_AS(parse_summary("tpeq-summary v1\nbogus: 1\n"), ParseError);
}

TEST_CASE("pareto levels of the built-in tables") {
  CHECK(pareto_levels(default_config_table()) == std::vector<int>{1, 2, 3, 4, 5});
  CHECK(pareto_levels(dvfs_config_table()).size() == 5);
}
