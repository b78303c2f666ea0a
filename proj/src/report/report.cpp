#include "tpeq/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "tpeq/errors.hpp"
#include "tpeq/text.hpp"

namespace tpeq {

namespace {

std::string label(const RunSummary& s) { return s.oracle ? s.policy + "-oracle" : s.policy; }

}  // namespace

double geometric_mean(std::span<const double> values) {
  if (values.empty()) return 1.0;
  double log_sum = 0.0;
  for (const double v : values) {
    if (!(v > 0.0)) throw std::invalid_argument("geometric_mean: values must be positive");
    log_sum += std::log(v);
  }
  return std::exp(log_sum / static_cast<double>(values.size()));
}

Report build_report(std::span<const RunSummary> runs, std::string_view baseline) {
  std::map<std::string, std::vector<const RunSummary*>> by_workload;
  for (const auto& r : runs) by_workload[r.workload_name].push_back(&r);

  Report report;
  std::map<std::string, std::vector<double>> speedups;
  std::vector<std::string> policy_order;
  for (const auto& [name, group] : by_workload) {
    for (const auto* r : group) {
      if (r->workload_hash != group.front()->workload_hash) {
        throw HashMismatchError("runs of workload '" + name + "' come from different workload files (" +
                                group.front()->workload_hash + " vs " + r->workload_hash + ")");
      }
    }
    const RunSummary* base = nullptr;
    for (const auto* r : group) {
      if (label(*r) == baseline) {
        base = r;
        break;
      }
    }
    if (!base) throw std::invalid_argument("workload '" + name + "' has no '" + std::string(baseline) + "' run");
    for (const auto* r : group) {
      SpeedupRow row;
      row.workload = name;
      row.policy = label(*r);
      row.baseline = std::string(baseline);
      row.makespan = r->makespan_cycles;
      row.baseline_makespan = base->makespan_cycles;
      row.speedup = static_cast<double>(base->makespan_cycles) / static_cast<double>(r->makespan_cycles);
      row.stall_cycles = r->total_stall_cycles;
      row.baseline_stall_cycles = base->total_stall_cycles;
      row.stall_reduction = base->total_stall_cycles > 0
                                ? 1.0 - static_cast<double>(r->total_stall_cycles) /
                                            static_cast<double>(base->total_stall_cycles)
                                : 0.0;
      if (speedups.find(row.policy) == speedups.end()) policy_order.push_back(row.policy);
      speedups[row.policy].push_back(row.speedup);
      report.rows.push_back(row);
    }
  }
  for (const auto& p : policy_order) {
    report.means.push_back({p, geometric_mean(speedups[p]), speedups[p].size()});
  }
  return report;
}

std::string speedup_csv(const Report& report) {
  using text::format_real;
  std::string out = "workload,policy,baseline,makespan,baseline_makespan,speedup,stall_cycles,baseline_stall_cycles,stall_reduction\n";
  for (const auto& r : report.rows) {
    out += r.workload + "," + r.policy + "," + r.baseline + "," + std::to_string(r.makespan) + "," +
           std::to_string(r.baseline_makespan) + "," + format_real(r.speedup) + "," + std::to_string(r.stall_cycles) +
           "," + std::to_string(r.baseline_stall_cycles) + "," + format_real(r.stall_reduction) + "\n";
  }
  return out;
}

std::string means_csv(const Report& report) {
  std::string out = "policy,geomean_speedup,workloads\n";
  for (const auto& m : report.means) {
    out += m.policy + "," + text::format_real(m.geomean_speedup) + "," + std::to_string(m.workloads) + "\n";
  }
  return out;
}

std::string overshoot_csv(std::span<const RunSummary> runs) {
  using text::format_real;
  std::string out =
      "workload,policy,budget_w,mean_overshoot_w,max_overshoot_w,epochs_over_budget,max_consecutive_over_trigger,"
      "throttle_count,infeasible_epochs,epochs\n";
  for (const auto& r : runs) {
    out += r.workload_name + "," + label(r) + "," + format_real(r.budget_w) + "," +
           format_real(r.overshoot.mean_over_w) + "," + format_real(r.overshoot.max_over_w) + "," +
           std::to_string(r.overshoot.epochs_over_budget) + "," +
           std::to_string(r.overshoot.max_consecutive_over_trigger) + "," +
           std::to_string(r.overshoot.throttle_count) + "," + std::to_string(r.overshoot.infeasible_epochs) + "," +
           std::to_string(r.epochs) + "\n";
  }
  return out;
}

std::string progress_series_csv(std::span<const TelemetryRow> rows, std::int64_t epoch_cycles) {
  std::map<int, std::int64_t> cumulative;
  std::string out = "epoch,end_cycle,thread,cum_instr\n";
  for (const auto& r : rows) {
    auto& c = cumulative[r.thread];
    c += r.record.retired;
    out += std::to_string(r.epoch) + "," + std::to_string((static_cast<std::int64_t>(r.epoch) + 1) * epoch_cycles) +
           "," + std::to_string(r.thread) + "," + std::to_string(c) + "\n";
  }
  return out;
}

std::string config_histogram_csv(std::span<const TelemetryRow> rows, int n_configs) {
  std::map<int, std::vector<std::int64_t>> counts;
  for (const auto& r : rows) {
    if (r.record.config < 1 || r.record.config > n_configs) {
      throw std::invalid_argument("telemetry row has configuration " + std::to_string(r.record.config) +
                                  " outside [1, " + std::to_string(n_configs) + "]");
    }
    auto& v = counts[r.thread];
    v.resize(static_cast<std::size_t>(n_configs), 0);
    ++v[static_cast<std::size_t>(r.record.config - 1)];
  }
  std::string out = "thread";
  for (int j = 1; j <= n_configs; ++j) out += ",config_" + std::to_string(j);
  out += ",total\n";
  for (const auto& [thread, v] : counts) {
    std::int64_t total = 0;
    out += std::to_string(thread);
    for (const auto c : v) {
      out += "," + std::to_string(c);
      total += c;
    }
    out += "," + std::to_string(total) + "\n";
  }
  return out;
}

}  // namespace tpeq
