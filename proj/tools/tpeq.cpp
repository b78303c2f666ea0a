// tpeq: workload generation, predictor training, simulation, reports and the
// optimizer benchmark.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "tpeq/bench.hpp"
#include "tpeq/errors.hpp"
#include "tpeq/policies.hpp"
#include "tpeq/predictors.hpp"
#include "tpeq/report.hpp"
#include "tpeq/rng.hpp"
#include "tpeq/simulator.hpp"
#include "tpeq/text.hpp"
#include "tpeq/workload_gen.hpp"

namespace fs = std::filesystem;
using namespace tpeq;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitGuard = 4;

// Usage errors raised after CLI11 has accepted the flags.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string default_out_dir() {
  const char* env = std::getenv("TPEQ_OUT_DIR");
  return env && *env ? env : ".";
}

ConfigTable table_named(const std::string& name) {
  if (name == "micro") return default_config_table();
  if (name == "dvfs") return dvfs_config_table();
  throw UsageError("unknown table '" + name + "' (micro, dvfs)");
}

std::string out_path(const std::string& dir, const std::string& file) { return (fs::path(dir) / file).string(); }

// --- generate ---------------------------------------------------------------

struct GenerateArgs {
  std::string preset;
  bool all_presets = false;
  std::string category = "homogeneous";
  std::string profile = "spread";
  std::string table = "micro";
  std::string output;
  std::string out_dir;
  GeneratorParams params;
};

int cmd_generate(const GenerateArgs& a) {
  const ConfigTable table = table_named(a.table);
  std::vector<GeneratorParams> jobs;
  if (a.all_presets) {
    jobs = corpus_presets();
  } else if (!a.preset.empty()) {
    jobs.push_back(corpus_preset(a.preset));
  } else {
    GeneratorParams p = a.params;
    p.category = category_from_string(a.category);
    if (a.profile == "spread") p.work_profile = WorkProfile::kSpread;
    else if (a.profile == "single-hot") p.work_profile = WorkProfile::kSingleHot;
    else throw UsageError("unknown work profile '" + a.profile + "' (spread, single-hot)");
    jobs.push_back(p);
  }
  if (!a.output.empty() && jobs.size() != 1) throw UsageError("--output takes a single workload");
  const std::string dir = a.out_dir.empty() ? default_out_dir() : a.out_dir;
  for (const auto& p : jobs) {
    const WorkloadSpec w = generate_workload(p, table);
    const std::string path = a.output.empty() ? out_path(dir, p.name + ".tpw") : a.output;
    save_workload(w, path);
    std::cout << path << " " << workload_hash(w) << "\n";
  }
  return kExitOk;
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
  std::string table = "micro";
  std::string output;
  TrainingSynthParams synth;
  int holdout = 16;
};

int cmd_train(const TrainArgs& a) {
  const ConfigTable table = table_named(a.table);
  const auto samples = synth_training_samples(table, a.synth);
  TrainingReport report;
  const PredictorCoefficients coeffs = train(samples, table.size(), &report);
  TrainingSynthParams held = a.synth;
  held.samples_per_pair = a.holdout;
  held.seed = mix64(a.synth.seed, 0x686f6c64ULL);
  const PredictionError err = evaluate(synth_training_samples(table, held), coeffs);
  const std::string path = a.output.empty() ? out_path(default_out_dir(), "coeffs.txt") : a.output;
  save_coefficients(coeffs, path);
  double worst = 0.0;
  for (const auto& r : report.alpha) worst = std::max(worst, r.mean_abs_rel);
  std::printf("%s\n", path.c_str());
  std::printf("training samples: %zu  worst pair in-sample CPI error: %.4f\n", samples.size(), worst);
  std::printf("held-out CPI error: %.4f  power error: %.4f  (%zu samples)\n", err.cpi_mean_abs_rel,
              err.power_mean_abs_rel, err.samples);
  return kExitOk;
}

// --- run --------------------------------------------------------------------

struct RunArgs {
  std::string workload;
  std::string policy = "tpeq";
  bool oracle = false;
  std::string static_level = "max";
  std::string coeffs;
  std::string table = "micro";
  std::string out_dir;
  SimConfig sim;
};

int cmd_run(RunArgs a) {
  const ConfigTable table = table_named(a.table);
  const WorkloadSpec w = load_workload(a.workload);
  a.sim.n_cores = w.n_threads();
  PolicyHandle h;
  h.kind = policy_kind_from_string(a.policy);
  h.oracle_mode = a.oracle;
  std::string label = a.policy;
  if (h.kind == PolicyKind::kStatic) {
    const std::vector<int> levels = pareto_levels(table);
    if (a.static_level == "max") {
      h.static_level = max_feasible_static_level(w, table, levels, a.sim.budget_watts);
    } else {
      h.static_level = static_cast<int>(text::parse_int(a.static_level, 0));
      if (h.static_level < 1 || h.static_level > static_cast<int>(levels.size())) {
        throw UsageError("--static-level must be in [1, " + std::to_string(levels.size()) + "] or 'max'");
      }
    }
    label += "-" + std::to_string(h.static_level);
  } else if (!a.oracle) {
    h.coeffs = std::make_shared<const PredictorCoefficients>(a.coeffs.empty() ? default_coefficients(table)
                                                                              : load_coefficients(a.coeffs));
  }
  if (a.oracle && h.kind != PolicyKind::kStatic) label += "-oracle";
  auto policy = make_policy(h);
  const SimResult r = run(w, *policy, a.sim, table);
  const std::string dir = a.out_dir.empty() ? default_out_dir() : a.out_dir;
  const std::string stem = out_path(dir, w.name + "." + label);
  text::write_file_atomic(stem + ".csv", telemetry_csv(r));
  RunSummary s = summarize(r, a.sim.budget_watts, a.oracle);
  if (h.kind == PolicyKind::kStatic) {
    s.policy = label;
    s.oracle = false;
  }
  text::write_file_atomic(stem + ".summary", serialize_summary(s));
  std::printf("%s.csv\n%s.summary\n", stem.c_str(), stem.c_str());
  std::printf("makespan %lld cycles over %d epochs, stall %lld cycles, mean overshoot %.3f W, throttled %d\n",
              static_cast<long long>(s.makespan_cycles), s.epochs, static_cast<long long>(s.total_stall_cycles),
              s.overshoot.mean_over_w, s.overshoot.throttle_count);
  // A predicted infeasibility (cold-start prior) is not a budget error; an epoch that ran
  // all-lowest and still measured over the budget is.
  for (const auto& e : r.epochs) {
    if (e.infeasible && !within_budget(e.total_power, a.sim.budget_watts)) return kExitInfeasible;
  }
  return kExitOk;
}

// --- report -----------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> summaries;
  std::vector<std::string> telemetry;
  std::string baseline = "cs";
  std::string out_dir;
  int n_configs = 5;
};

int cmd_report(const ReportArgs& a) {
  std::vector<RunSummary> runs;
  for (const auto& p : a.summaries) {
    try {
      runs.push_back(parse_summary(text::read_file(p)));
    } catch (const ParseError& e) {
      throw ParseError(p + ": " + e.what(), 0);
    }
  }
  const Report rep = build_report(runs, a.baseline);
  const std::string dir = a.out_dir.empty() ? default_out_dir() : a.out_dir;
  text::write_file_atomic(out_path(dir, "speedups.csv"), speedup_csv(rep));
  text::write_file_atomic(out_path(dir, "means.csv"), means_csv(rep));
  text::write_file_atomic(out_path(dir, "overshoot.csv"), overshoot_csv(runs));
  for (const auto& m : rep.means) {
    std::printf("%-24s geomean speedup vs %s: %.4f over %zu workloads\n", m.policy.c_str(), a.baseline.c_str(),
                m.geomean_speedup, m.workloads);
  }
  for (const auto& p : a.telemetry) {
    std::vector<TelemetryRow> rows;
    try {
      rows = parse_telemetry_csv(text::read_file(p));
    } catch (const ParseError& e) {
      throw ParseError(p + ": " + e.what(), 0);
    }
    const std::string stem = out_path(dir, fs::path(p).stem().string());
    const std::int64_t epoch_cycles = runs.empty() ? SimConfig{}.epoch_cycles : runs.front().epoch_cycles;
    text::write_file_atomic(stem + ".progress.csv", progress_series_csv(rows, epoch_cycles));
    text::write_file_atomic(stem + ".histogram.csv", config_histogram_csv(rows, a.n_configs));
  }
  return kExitOk;
}

// --- bench ------------------------------------------------------------------

struct BenchArgs {
  std::vector<int> n_list{1000, 10000, 100000};
  int levels = 5;
  int trials = 3;
  std::uint64_t seed = 1;
  bool no_naive = false;
  double budget_fraction = 0.25;
  std::string out_dir;
};

int cmd_bench(const BenchArgs& a) {
  const BenchResult r = bench_optimizer(a.n_list, a.levels, a.trials, a.seed, !a.no_naive, a.budget_fraction);
  std::string csv = "n_threads,n_levels,heap_seconds,naive_seconds,identical\n";
  for (const auto& row : r.rows) {
    csv += std::to_string(row.n_threads) + "," + std::to_string(row.n_levels) + "," +
           text::format_real(row.heap_seconds) + "," + text::format_real(row.naive_seconds) + "," +
           (row.identical ? "1" : "0") + "\n";
    std::printf("N=%-8d M=%d heap %.6f s  naive %.6f s  %s\n", row.n_threads, row.n_levels, row.heap_seconds,
                row.naive_seconds, row.identical ? "identical" : "DIFFERENT");
  }
  std::printf("log-log slope: heap %.3f  naive %.3f\n", r.heap_slope, r.naive_slope);
  const std::string dir = a.out_dir.empty() ? default_out_dir() : a.out_dir;
  text::write_file_atomic(out_path(dir, "bench.csv"), csv);
  for (const auto& row : r.rows) {
    if (!row.identical) return kExitGuard;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Power-budgeted thread progress equalization: generate, train, run, report, bench"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write a synthetic workload file");
  g->add_option("--preset", gen.preset, "Corpus preset name");
  g->add_flag("--all-presets", gen.all_presets, "Write every corpus preset");
  g->add_option("--name", gen.params.name, "Workload name");
  g->add_option("--category", gen.category, "homogeneous, heterogeneous, thread-pool or pipeline");
  g->add_option("--threads", gen.params.n_threads, "Thread count")->check(CLI::PositiveNumber);
  g->add_option("--phases", gen.params.n_phases, "Phases (tasks) per thread")->check(CLI::PositiveNumber);
  g->add_option("--phase-instr", gen.params.phase_instr, "Mean instructions per phase");
  g->add_option("--phase-length-spread", gen.params.phase_length_spread, "Per-phase length variation");
  g->add_option("--cpi-spread", gen.params.cpi_spread, "Range of per-thread memory CPI");
  g->add_option("--weight-ratio", gen.params.weight_ratio_max, "Largest per-thread work ratio");
  g->add_option("--profile", gen.profile, "spread or single-hot");
  g->add_option("--hot-thread", gen.params.hot_thread, "Thread carrying the extra work (single-hot)");
  g->add_option("--phase-noise", gen.params.phase_noise, "Multiplicative sigma on phase lengths");
  g->add_option("--drift", gen.params.drift_amplitude, "Temporal CPI drift amplitude");
  g->add_option("--scaling-jitter", gen.params.scaling_jitter, "Per-thread deviation of CPI multipliers");
  g->add_option("--stages", gen.params.n_stages, "Pipeline stages");
  g->add_option("--seed", gen.params.seed, "Generator seed");
  g->add_option("--table", gen.table, "micro or dvfs");
  g->add_option("-o,--output", gen.output, "Output file (single workload)");
  g->add_option("--out-dir", gen.out_dir, "Output directory (default $TPEQ_OUT_DIR or .)");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Fit predictor coefficients on a synthetic training corpus");
  t->add_option("--table", tr.table, "micro or dvfs");
  t->add_option("--samples", tr.synth.samples_per_pair, "Samples per configuration pair")->check(CLI::PositiveNumber);
  t->add_option("--noise", tr.synth.noise_sigma, "Multiplicative noise on observed CPI and power");
  t->add_option("--jitter", tr.synth.scaling_jitter, "Per-sample deviation of CPI multipliers");
  t->add_option("--seed", tr.synth.seed, "Sampling seed");
  t->add_option("--holdout", tr.holdout, "Held-out samples per pair")->check(CLI::PositiveNumber);
  t->add_option("-o,--output", tr.output, "Coefficient file (default $TPEQ_OUT_DIR/coeffs.txt)");
  tr.synth.scaling_jitter = 0.03;

  RunArgs ra;
  auto* r = app.add_subcommand("run", "Simulate a workload under a policy");
  r->add_option("workload", ra.workload, "Workload file")->required();
  r->add_option("-p,--policy", ra.policy, "tpeq, tpeq-w, cs, maxbips, maxbips-heuristic or static");
  r->add_flag("--oracle", ra.oracle, "Give the policy ground-truth CPI and power");
  r->add_option("--static-level", ra.static_level, "Level for the static policy, or 'max'");
  r->add_option("--coeffs", ra.coeffs, "Predictor coefficient file (default: trained on the fly)");
  r->add_option("--table", ra.table, "micro or dvfs");
  r->add_option("--budget", ra.sim.budget_watts, "Power budget in watts")->check(CLI::PositiveNumber);
  r->add_option("--epoch-cycles", ra.sim.epoch_cycles, "Epoch length in reference cycles")->check(CLI::PositiveNumber);
  r->add_option("--idle-fraction", ra.sim.idle_power_fraction, "Power of a stalled core relative to active")
      ->check(CLI::Range(0.0, 1.0));
  r->add_option("--overhead", ra.sim.controller_overhead_cycles, "Controller cycles charged per epoch");
  r->add_option("--measurement-noise", ra.sim.measurement_noise, "Sigma of CPI-stack measurement noise");
  r->add_option("--throttle-watts", ra.sim.throttle.overshoot_watts, "Overshoot that counts toward throttling");
  r->add_option("--throttle-epochs", ra.sim.throttle.consecutive_epochs, "Consecutive overshooting epochs");
  r->add_option("--seed", ra.sim.rng_seed, "Simulator seed");
  r->add_option("--out-dir", ra.out_dir, "Output directory (default $TPEQ_OUT_DIR or .)");

  ReportArgs rep;
  auto* p = app.add_subcommand("report", "Compare run summaries and turn telemetry into plot-ready CSV");
  p->add_option("summaries", rep.summaries, "Run summary files")->required();
  p->add_option("--telemetry", rep.telemetry, "Telemetry CSV files for progress series and histograms");
  p->add_option("--baseline", rep.baseline, "Baseline policy label (e.g. cs, tpeq-w, static-2)");
  p->add_option("--configs", rep.n_configs, "Configurations in the table")->check(CLI::PositiveNumber);
  p->add_option("--out-dir", rep.out_dir, "Output directory (default $TPEQ_OUT_DIR or .)");

  BenchArgs be;
  auto* b = app.add_subcommand("bench", "Time the heap and naive optimizers across thread counts");
  b->add_option("--n", be.n_list, "Thread counts")->delimiter(',');
  b->add_option("--levels", be.levels, "Levels per thread")->check(CLI::PositiveNumber);
  b->add_option("--trials", be.trials, "Timed repetitions (best is kept)")->check(CLI::PositiveNumber);
  b->add_option("--seed", be.seed, "Instance seed");
  b->add_flag("--no-naive", be.no_naive, "Skip the quadratic optimizer");
  b->add_option("--budget-fraction", be.budget_fraction, "Budget position between all-lowest and all-highest");
  b->add_option("--out-dir", be.out_dir, "Output directory (default $TPEQ_OUT_DIR or .)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*g) return cmd_generate(gen);
    if (*t) return cmd_train(tr);
    if (*r) return cmd_run(ra);
    if (*p) return cmd_report(rep);
    if (*b) return cmd_bench(be);
  } catch (const UsageError& e) {
    std::cerr << "tpeq: " << e.what() << "\n";
    return kExitUsage;
  } catch (const SizeGuardError& e) {
    std::cerr << "tpeq: " << e.what() << "\n";
    return kExitGuard;
  } catch (const HashMismatchError& e) {
    std::cerr << "tpeq: " << e.what() << "\n";
    return kExitGuard;
  } catch (const ParseError& e) {
    std::cerr << "tpeq: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "tpeq: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "tpeq: " << e.what() << "\n";
    return 1;
  }
  return kExitUsage;
}
