#include "tpeq/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "tpeq/optimizer.hpp"
#include "tpeq/predictors.hpp"
#include "tpeq/rng.hpp"

namespace tpeq {

namespace {

// Slack for cycle/instruction conversions so that exact products (30 x 2.0, 110 / 1.1)
// do not lose a cycle or an instruction to rounding.
double slack(double x) { return 1e-9 * std::max(1.0, std::abs(x)); }

std::int64_t floor_instr(double cycles, double cpi) {
  const double x = cycles / cpi;
  return static_cast<std::int64_t>(std::floor(x + slack(x)));
}

}  // namespace

std::int64_t cycles_to_finish(std::int64_t remaining, double cpi) {
  if (remaining <= 0) return 0;
  const double x = static_cast<double>(remaining) * cpi;
  return static_cast<std::int64_t>(std::ceil(x - slack(x)));
}

AdvanceResult advance_thread(std::int64_t remaining, double cpi, std::int64_t cycles, bool last_phase) {
  if (!(cpi > 0.0) || !std::isfinite(cpi)) throw std::invalid_argument("advance_thread: CPI must be positive");
  if (cycles <= 0) throw std::invalid_argument("advance_thread: cycles must be positive");
  const AdvanceEvent finished = last_phase ? AdvanceEvent::kWorkloadDone : AdvanceEvent::kBarrierReached;
  if (remaining <= 0) return {0, 0, finished};
  const std::int64_t need = cycles_to_finish(remaining, cpi);
  if (need <= cycles) return {remaining, need, finished};
  return {std::min(remaining - 1, floor_instr(static_cast<double>(cycles), cpi)), cycles, AdvanceEvent::kNone};
}

AdvanceResult advance_thread(const PhaseProfile& phase, std::int64_t retired_in_phase, int config,
                             double drift_factor, std::int64_t cycles, bool last_phase) {
  return advance_thread(phase.instr_count - retired_in_phase, phase.cpi_at(config, drift_factor), cycles, last_phase);
}

PowerAccount account_power(std::span<const double> active_power_w, std::span<const double> stalled_frac,
                           double idle_fraction) {
  if (active_power_w.size() != stalled_frac.size()) {
    throw std::invalid_argument("account_power: one stalled fraction per thread is required");
  }
  PowerAccount out;
  out.per_thread_w.reserve(active_power_w.size());
  for (std::size_t i = 0; i < active_power_w.size(); ++i) {
    const double s = std::clamp(stalled_frac[i], 0.0, 1.0);
    const double w = active_power_w[i] * ((1.0 - s) + s * idle_fraction);
    out.per_thread_w.push_back(w);
    out.total_w += w;
  }
  return out;
}

bool throttle_check(std::span<const double> history, double budget, const ThrottleRule& rule) {
  if (rule.consecutive_epochs <= 0) return false;
  const auto need = static_cast<std::size_t>(rule.consecutive_epochs);
  if (history.size() < need) return false;
  for (std::size_t i = history.size() - need; i < history.size(); ++i) {
    if (!(history[i] - budget > rule.overshoot_watts)) return false;
  }
  return true;
}

std::int64_t SimResult::total_stall_cycles() const {
  std::int64_t s = 0;
  for (const auto c : stall_cycles) s += c;
  return s;
}

std::vector<int> pareto_levels(const ConfigTable& table) {
  table.validate();
  std::vector<double> perf;
  std::vector<double> power;
  for (const auto& c : table.configs) {
    perf.push_back(c.anchor_ips());
    power.push_back(c.anchor_power_w);
  }
  return pareto_filter(perf, power).retained;
}

namespace {

struct TaskRef {
  int owner = -1;
  int phase = -1;
  bool valid() const { return owner >= 0; }
};

enum class Status { kRunning, kWaiting, kDone };

struct Lane {
  Status status = Status::kWaiting;
  TaskRef task;
  std::int64_t retired_in_task = 0;
  int next_phase = 0;  // own-phase categories: next phase to start
  DriftWalk walk;
  double drift = 1.0;  // factor for the rest of this epoch

  // Current segment: constant task, configuration and drift.
  std::int64_t seg_start = 0;
  std::int64_t seg_base = 0;  // retired_in_task at seg_start
  double cpi_own = 0.0;       // CPI in the core's own cycles
  double cpi_ref = 0.0;       // CPI in reference cycles
  std::int64_t finish = 0;

  TaskRef last_task;
  double last_drift = 1.0;
  std::int64_t wait_start = 0;
  int tasks_completed = 0;

  // Per-epoch accumulators.
  std::int64_t ep_retired = 0;
  std::int64_t ep_active = 0;
  std::int64_t ep_stall = 0;
  double ep_energy = 0.0;
  double ep_active_energy = 0.0;
  double ep_own_cycles = 0.0;
  std::array<double, kStackComponents> ep_stack{};
};

class Engine {
 public:
  Engine(const WorkloadSpec& w, Policy& policy, const SimConfig& sim, const ConfigTable& table)
      : w_(w), policy_(policy), sim_(sim), table_(table), rng_(mix64(sim.rng_seed, 0x73696dULL)) {
    w_.validate();
    table_.validate();
    if (w_.n_threads() != sim_.n_cores) {
      throw std::invalid_argument("workload has " + std::to_string(w_.n_threads()) + " threads but the machine has " +
                                  std::to_string(sim_.n_cores) + " cores");
    }
    if (w_.n_configs() != table_.size()) {
      throw std::invalid_argument("workload carries multipliers for " + std::to_string(w_.n_configs()) +
                                  " configurations, table has " + std::to_string(table_.size()));
    }
    if (sim_.epoch_cycles <= 0 || !(sim_.budget_watts > 0.0) || sim_.idle_power_fraction < 0.0 ||
        sim_.idle_power_fraction > 1.0 || sim_.controller_overhead_cycles < 0 ||
        sim_.controller_overhead_cycles >= sim_.epoch_cycles || sim_.measurement_noise < 0.0 ||
        sim_.max_epochs <= 0) {
      throw std::invalid_argument("invalid simulator configuration");
    }
    n_ = w_.n_threads();
    phases_ = w_.n_phases();
    levels_ = pareto_levels(table_);
    f_ref_ = table_.reference_freq_hz();
    barrier_ = is_barrier_category(w_.category);
    lanes_.resize(static_cast<std::size_t>(n_));
    states_.resize(static_cast<std::size_t>(n_));
    phase_done_.assign(static_cast<std::size_t>(phases_), 0);
    if (w_.category == Category::kPipeline) {
      stages_ = w_.n_stages;
      stage_done_.assign(static_cast<std::size_t>(stages_ * phases_), 0);
    }
  }

  SimResult run() {
    SimResult r;
    r.workload_name = w_.name;
    r.workload_hash = workload_hash(w_);
    r.policy = policy_.name();
    r.levels = levels_;
    r.epoch_cycles = sim_.epoch_cycles;
    r.stall_cycles.assign(static_cast<std::size_t>(n_), 0);
    r.retired.assign(static_cast<std::size_t>(n_), 0);

    // Every thread takes its first task at time zero.
    for (int t = 0; t < n_; ++t) try_start(t, 0, /*initial=*/true, r, 0);

    Assignment previous;
    bool have_previous = false;
    std::vector<double> history;
    std::vector<ActivityInterval> intervals;
    double cpi_err = 0.0;
    double power_err = 0.0;
    int consecutive_trigger = 0;
    std::int64_t clock = 0;

    for (int epoch = 0; !all_done(); ++epoch) {
      if (epoch >= sim_.max_epochs) {
        throw std::runtime_error("simulation exceeded " + std::to_string(sim_.max_epochs) + " epochs");
      }
      for (int t = 0; t < n_; ++t) {
        states_[static_cast<std::size_t>(t)].stalled = lanes_[static_cast<std::size_t>(t)].status != Status::kRunning;
      }
      const OracleView oracle = build_oracle();
      EpochView view;
      view.epoch = epoch;
      view.table = &table_;
      view.levels = levels_;
      view.budget_w = sim_.budget_watts;
      view.epoch_cycles = sim_.epoch_cycles;
      view.mode = table_.mode;
      view.epoch_seconds = static_cast<double>(sim_.epoch_cycles) / f_ref_;
      view.threads = states_;
      view.intervals = intervals;
      view.oracle = &oracle;
      view.previous = have_previous ? &previous : nullptr;

      PolicyDecision decision = policy_.decide(view);
      check_assignment(decision.assignment);

      EpochRecord rec;
      rec.epoch_index = epoch;
      rec.policy_fallback = decision.fallback;
      Assignment applied = decision.assignment;
      if (!applied.feasible) {
        rec.infeasible = true;
        rec.throttled = true;
        applied.configs.assign(static_cast<std::size_t>(n_), 1);
        ++r.overshoot.infeasible_epochs;
      } else if (throttle_check(history, sim_.budget_watts, sim_.throttle)) {
        rec.throttled = true;
        const std::vector<int>& base = have_previous ? previous.configs : applied.configs;
        applied.configs = base;
        for (auto& c : applied.configs) c = std::max(1, c - 1);
        ++r.overshoot.throttle_count;
      }
      for (int t = 0; t < n_; ++t) {
        states_[static_cast<std::size_t>(t)].current_config = applied.configs[static_cast<std::size_t>(t)];
      }

      const std::int64_t overhead = policy_.adaptive() ? sim_.controller_overhead_cycles : 0;
      intervals.clear();
      const std::int64_t length = run_epoch(epoch, applied.configs, overhead, intervals, r);
      rec.cycles = length;
      clock += length;

      rec.threads.resize(static_cast<std::size_t>(n_));
      for (int t = 0; t < n_; ++t) {
        Lane& lane = lanes_[static_cast<std::size_t>(t)];
        ThreadRuntimeState& st = states_[static_cast<std::size_t>(t)];
        ThreadEpochRecord& tr = rec.threads[static_cast<std::size_t>(t)];
        const int level = applied.configs[static_cast<std::size_t>(t)];
        tr.config = levels_[static_cast<std::size_t>(level - 1)];
        tr.retired = lane.ep_retired;
        tr.power_w = lane.ep_energy / static_cast<double>(length);
        tr.stalled_frac = static_cast<double>(lane.ep_stall) / static_cast<double>(length);
        if (lane.ep_retired > 0) {
          const double inv = 1.0 / static_cast<double>(lane.ep_retired);
          auto comps = lane.ep_stack;
          for (auto& c : comps) c *= inv;
          tr.stack = CpiStack::from_components(comps);
          tr.cpi = lane.ep_own_cycles * inv;
          CpiStack measured = tr.stack;
          if (sim_.measurement_noise > 0.0) {
            auto m = measured.components();
            for (auto& c : m) c *= std::max(0.0, 1.0 + sim_.measurement_noise * rng_.normal());
            measured = CpiStack::from_components(m);
          }
          if (measured.total() > 0.0) {
            st.last_stack = measured;
            st.stack_config = tr.config;
            st.has_stack = true;
          }
          if (decision.predicted_cpi.rows() == static_cast<std::size_t>(n_) && lane.ep_active > 0) {
            const double pc = decision.predicted_cpi(static_cast<std::size_t>(t), static_cast<std::size_t>(level - 1));
            const double pp =
                decision.predicted_power(static_cast<std::size_t>(t), static_cast<std::size_t>(level - 1));
            const double active_power = lane.ep_active_energy / static_cast<double>(lane.ep_active);
            cpi_err += std::abs(pc - tr.cpi) / tr.cpi;
            power_err += std::abs(pp - active_power) / active_power;
            ++r.predictions_scored;
          }
        }
        rec.total_power += tr.power_w;
        r.stall_cycles[static_cast<std::size_t>(t)] += lane.ep_stall;
        r.retired[static_cast<std::size_t>(t)] += lane.ep_retired;
        st.stall_cycles += lane.ep_stall;
      }

      // Overshoot statistics.
      const double over = rec.total_power - sim_.budget_watts;
      if (!within_budget(rec.total_power, sim_.budget_watts)) {
        ++r.overshoot.epochs_over_budget;
        r.overshoot.mean_over_w += over;
        r.overshoot.max_over_w = std::max(r.overshoot.max_over_w, over);
      }
      consecutive_trigger = over > sim_.throttle.overshoot_watts ? consecutive_trigger + 1 : 0;
      r.overshoot.max_consecutive_over_trigger = std::max(r.overshoot.max_consecutive_over_trigger, consecutive_trigger);
      history.push_back(rec.total_power);

      previous = applied;
      previous.total_power = decision.assignment.total_power;
      have_previous = true;
      r.epochs.push_back(std::move(rec));
    }
    if (r.overshoot.epochs_over_budget > 0) r.overshoot.mean_over_w /= r.overshoot.epochs_over_budget;
    if (r.predictions_scored > 0) {
      r.cpi_prediction_mare = cpi_err / static_cast<double>(r.predictions_scored);
      r.power_prediction_mare = power_err / static_cast<double>(r.predictions_scored);
    }
    r.total_cycles = clock;
    return r;
  }

 private:
  const PhaseProfile& profile(const TaskRef& ref) const {
    return w_.threads[static_cast<std::size_t>(ref.owner)][static_cast<std::size_t>(ref.phase)];
  }

  int table_config(int level) const { return levels_[static_cast<std::size_t>(level - 1)]; }

  double freq(int config) const { return table_.at(config).nominal_freq_hz; }

  int stage_of(int t) const { return static_cast<int>(static_cast<std::int64_t>(t) * stages_ / n_); }

  int stage_size(int s) const {
    int count = 0;
    for (int t = 0; t < n_; ++t) count += stage_of(t) == s ? 1 : 0;
    return count;
  }

  bool all_done() const {
    for (const auto& l : lanes_) {
      if (l.status != Status::kDone) return false;
    }
    return true;
  }

  void check_assignment(const Assignment& a) const {
    if (a.configs.size() != static_cast<std::size_t>(n_)) {
      throw std::runtime_error("policy '" + policy_.name() + "' returned " + std::to_string(a.configs.size()) +
                               " configurations for " + std::to_string(n_) + " threads");
    }
    for (const int c : a.configs) {
      if (c < 1 || c > static_cast<int>(levels_.size())) {
        throw std::runtime_error("policy '" + policy_.name() + "' returned level " + std::to_string(c) +
                                 " outside [1, " + std::to_string(levels_.size()) + "]");
      }
    }
  }

  // Next task for thread t, if one is available now.
  TaskRef available_task(int t) {
    Lane& lane = lanes_[static_cast<std::size_t>(t)];
    if (w_.category == Category::kThreadPool) {
      if (queue_next_ >= n_ * phases_) return {};
      const int batch = queue_next_ / n_;
      if (batch > 0 && phase_done_[static_cast<std::size_t>(batch - 1)] < n_) return {};
      const TaskRef ref{queue_next_ % n_, batch};
      ++queue_next_;
      return ref;
    }
    const int p = lane.next_phase;
    if (p >= phases_) return {};
    if (p > 0 && barrier_ && phase_done_[static_cast<std::size_t>(p - 1)] < n_) return {};
    if (w_.category == Category::kPipeline) {
      const int s = stage_of(t);
      if (s > 0 && stage_done_[static_cast<std::size_t>((s - 1) * phases_ + p)] < stage_size(s - 1)) return {};
    }
    ++lane.next_phase;
    return {t, p};
  }

  bool no_more_tasks(int t) const {
    if (w_.category == Category::kThreadPool) return queue_next_ >= n_ * phases_;
    return lanes_[static_cast<std::size_t>(t)].next_phase >= phases_;
  }

  // Starts a segment for a lane that holds a task, beginning at `now`.
  void begin_segment(Lane& lane, int level, std::int64_t now) {
    const int config = table_config(level);
    lane.seg_start = now;
    lane.seg_base = lane.retired_in_task;
    lane.cpi_own = profile(lane.task).cpi_at(config, lane.drift);
    lane.cpi_ref = lane.cpi_own * f_ref_ / freq(config);
    lane.finish = now + cycles_to_finish(profile(lane.task).instr_count - lane.retired_in_task, lane.cpi_ref);
  }

  // Moves a waiting lane onto its next task when one is available.
  void try_start(int t, std::int64_t now, bool initial, SimResult& r, int epoch) {
    Lane& lane = lanes_[static_cast<std::size_t>(t)];
    const TaskRef next = available_task(t);
    if (!next.valid()) {
      if (no_more_tasks(t)) lane.status = Status::kDone;
      return;
    }
    const std::int64_t waited = now - lane.wait_start;
    lane.ep_stall += initial ? 0 : waited;
    ThreadRuntimeState& st = states_[static_cast<std::size_t>(t)];
    // Barrier workloads: every phase transition is the exit of a barrier wait, even a
    // zero-length one for the last arriver. Queue workloads: only an actual wait on an
    // empty queue counts.
    const bool sync_exit = !initial && (barrier_ || waited > 0);
    if (sync_exit) {
      update_weight_on_stall_exit(st);
      r.weight_log.push_back({epoch, t, lane.tasks_completed, st.weight});
    }
    lane.status = Status::kRunning;
    lane.task = next;
    lane.retired_in_task = 0;
    lane.walk = DriftWalk(profile(next).drift);
    lane.drift = lane.walk.factor();
    if (!initial) begin_segment(lane, st.current_config, now);
  }

  void mark_complete(const TaskRef& ref, int t) {
    phase_done_[static_cast<std::size_t>(ref.phase)] += 1;
    if (w_.category == Category::kPipeline) {
      stage_done_[static_cast<std::size_t>(stage_of(t) * phases_ + ref.phase)] += 1;
    }
  }

  // Accounts `cycles` of active execution at the segment's rate.
  void charge_active(Lane& lane, int level, std::int64_t cycles, std::int64_t retired) {
    if (cycles <= 0 && retired <= 0) return;
    const int config = table_config(level);
    const double watts = table_.at(config).truth_power(lane.cpi_own);
    const double energy = watts * static_cast<double>(cycles);
    lane.ep_energy += energy;
    lane.ep_active_energy += energy;
    lane.ep_active += cycles;
    lane.ep_retired += retired;
    lane.ep_own_cycles += static_cast<double>(retired) * lane.cpi_own;
    const auto comps = profile(lane.task).stack_at(config, lane.drift).components();
    for (int c = 0; c < kStackComponents; ++c) {
      lane.ep_stack[static_cast<std::size_t>(c)] += comps[static_cast<std::size_t>(c)] * static_cast<double>(retired);
    }
  }

  // Power of a lane that is not executing: spinning at its last task's rate.
  double idle_watts(const Lane& lane, int level) const {
    const int config = table_config(level);
    double cpi = 1.0 / table_.at(config).anchor_ipc;
    if (lane.last_task.valid()) cpi = profile(lane.last_task).cpi_at(config, lane.last_drift);
    else if (lane.task.valid()) cpi = profile(lane.task).cpi_at(config, lane.drift);
    return sim_.idle_power_fraction * table_.at(config).truth_power(cpi);
  }

  std::int64_t run_epoch(int epoch, const std::vector<int>& configs, std::int64_t overhead,
                         std::vector<ActivityInterval>& intervals, SimResult& r) {
    const std::int64_t end = sim_.epoch_cycles;
    for (int t = 0; t < n_; ++t) {
      Lane& lane = lanes_[static_cast<std::size_t>(t)];
      lane.ep_retired = lane.ep_active = lane.ep_stall = 0;
      lane.ep_energy = lane.ep_active_energy = lane.ep_own_cycles = 0.0;
      lane.ep_stack = {};
      const int level = configs[static_cast<std::size_t>(t)];
      if (lane.status == Status::kRunning) {
        begin_segment(lane, level, overhead);
        // The controller runs on every core at the start of the epoch.
        const int config = table_config(level);
        lane.ep_energy += table_.at(config).truth_power(lane.cpi_own) * static_cast<double>(overhead);
      } else {
        lane.wait_start = 0;
      }
    }

    std::int64_t now = overhead;
    for (;;) {
      std::int64_t next = std::numeric_limits<std::int64_t>::max();
      for (const auto& lane : lanes_) {
        if (lane.status == Status::kRunning) next = std::min(next, lane.finish);
      }
      const std::int64_t stop = std::min(next, end);
      if (stop > now) {
        ActivityInterval iv;
        iv.cycles = stop - now;
        for (int t = 0; t < n_; ++t) {
          if (lanes_[static_cast<std::size_t>(t)].status == Status::kRunning) iv.active.push_back(t);
        }
        intervals.push_back(std::move(iv));
      }
      if (next > end) break;
      now = next;

      // Completions at `now`, in thread order, then releases.
      for (int t = 0; t < n_; ++t) {
        Lane& lane = lanes_[static_cast<std::size_t>(t)];
        if (lane.status != Status::kRunning || lane.finish != now) continue;
        const int level = configs[static_cast<std::size_t>(t)];
        const std::int64_t remaining = profile(lane.task).instr_count - lane.retired_in_task;
        charge_active(lane, level, now - lane.seg_start, remaining);
        ThreadRuntimeState& st = states_[static_cast<std::size_t>(t)];
        st.cum_instr += remaining;
        st.instr_in_interval += remaining;
        lane.retired_in_task += remaining;
        mark_complete(lane.task, t);
        ++lane.tasks_completed;
        lane.last_task = lane.task;
        lane.last_drift = lane.drift;
        lane.task = {};
        lane.status = Status::kWaiting;
        lane.wait_start = now;
      }
      for (int t = 0; t < n_; ++t) {
        if (lanes_[static_cast<std::size_t>(t)].status == Status::kWaiting) try_start(t, now, false, r, epoch);
      }
      if (all_done()) break;
    }

    const std::int64_t length = all_done() ? std::max<std::int64_t>(now, 1) : end;
    for (int t = 0; t < n_; ++t) {
      Lane& lane = lanes_[static_cast<std::size_t>(t)];
      const int level = configs[static_cast<std::size_t>(t)];
      if (lane.status == Status::kRunning) {
        const std::int64_t cycles = length - lane.seg_start;
        const std::int64_t remaining = profile(lane.task).instr_count - lane.retired_in_task;
        const std::int64_t retired =
            std::clamp<std::int64_t>(floor_instr(static_cast<double>(cycles), lane.cpi_ref), 0, remaining - 1);
        charge_active(lane, level, cycles, retired);
        lane.retired_in_task += retired;
        ThreadRuntimeState& st = states_[static_cast<std::size_t>(t)];
        st.cum_instr += retired;
        st.instr_in_interval += retired;
        lane.walk.step();
        lane.drift = lane.walk.factor();
      } else {
        const std::int64_t stalled = length - lane.wait_start;
        lane.ep_stall += stalled;
      }
      lane.ep_energy += idle_watts(lane, level) * static_cast<double>(lane.ep_stall);
    }
    return length;
  }

  // Ground truth for oracle policies. Power is the largest over every task the thread
  // can touch during the coming epoch, so a budget met on these values is met by the
  // recorded power.
  OracleView build_oracle() const {
    const std::size_t m = levels_.size();
    OracleView o;
    o.cpi = Matrix(static_cast<std::size_t>(n_), m);
    o.power = Matrix(static_cast<std::size_t>(n_), m);
    o.weights.resize(static_cast<std::size_t>(n_));
    o.instr_count.resize(static_cast<std::size_t>(n_));
    for (int t = 0; t < n_; ++t) {
      const Lane& lane = lanes_[static_cast<std::size_t>(t)];
      const auto ti = static_cast<std::size_t>(t);
      const bool running = lane.status == Status::kRunning;
      const TaskRef cur = running ? lane.task : lane.last_task;
      const double cur_drift = running ? lane.drift : lane.last_drift;
      if (cur.valid()) {
        o.weights[ti] = static_cast<double>(profile(cur).instr_count);
        o.instr_count[ti] = running ? static_cast<double>(lane.retired_in_task) : o.weights[ti];
      } else {
        o.weights[ti] = 1.0;
        o.instr_count[ti] = 0.0;
      }
      for (std::size_t l = 0; l < m; ++l) {
        const int config = levels_[l];
        const CoreConfig& cc = table_.at(config);
        double cpi = cur.valid() ? profile(cur).cpi_at(config, cur_drift) : 1.0 / cc.anchor_ipc;
        o.cpi(ti, l) = cpi;
        double watts = cc.truth_power(cpi);
        if (lane.last_task.valid()) {
          watts = std::max(watts, cc.truth_power(profile(lane.last_task).cpi_at(config, lane.last_drift)));
        }
        // Budget of reference cycles the thread could spend on later tasks.
        double budget = static_cast<double>(sim_.epoch_cycles);
        if (running) {
          budget -= static_cast<double>(profile(cur).instr_count - lane.retired_in_task) * cpi * f_ref_ /
                    cc.nominal_freq_hz;
        }
        for (const TaskRef& ref : reachable(t)) {
          if (budget <= 0.0) break;
          const double c = profile(ref).cpi_at(config, 1.0);
          watts = std::max(watts, cc.truth_power(c));
          if (w_.category != Category::kThreadPool) {
            budget -= static_cast<double>(profile(ref).instr_count) * c * f_ref_ / cc.nominal_freq_hz;
          }
        }
        o.power(ti, l) = watts;
      }
    }
    return o;
  }

  // Tasks thread t could start after its current one, in order.
  std::vector<TaskRef> reachable(int t) const {
    std::vector<TaskRef> out;
    if (w_.category == Category::kThreadPool) {
      const int first_batch = queue_next_ / n_;
      for (int q = queue_next_; q < n_ * phases_ && q / n_ <= first_batch + 1; ++q) out.push_back({q % n_, q / n_});
      return out;
    }
    for (int p = lanes_[static_cast<std::size_t>(t)].next_phase; p < phases_; ++p) out.push_back({t, p});
    return out;
  }

  const WorkloadSpec& w_;
  Policy& policy_;
  const SimConfig& sim_;
  const ConfigTable& table_;
  Rng rng_;
  int n_ = 0;
  int phases_ = 0;
  int stages_ = 1;
  bool barrier_ = true;
  double f_ref_ = 0.0;
  std::vector<int> levels_;
  std::vector<Lane> lanes_;
  std::vector<ThreadRuntimeState> states_;
  std::vector<int> phase_done_;  // completions per phase (all categories)
  std::vector<int> stage_done_;  // pipeline: completions per (stage, phase)
  int queue_next_ = 0;           // thread pool: next unclaimed task
};

}  // namespace

SimResult run(const WorkloadSpec& workload, Policy& policy, const SimConfig& sim, const ConfigTable& table) {
  Engine engine(workload, policy, sim, table);
  return engine.run();
}

}  // namespace tpeq
