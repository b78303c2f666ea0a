#include "tpeq/policies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "tpeq/errors.hpp"
#include "tpeq/optimizer.hpp"
#include "tpeq/predictors.hpp"

namespace tpeq {

namespace {

struct KindName {
  PolicyKind kind;
  std::string_view name;
};

constexpr KindName kKindNames[] = {
    {PolicyKind::kTpeq, "tpeq"},
    {PolicyKind::kTpeqW, "tpeq-w"},
    {PolicyKind::kCriticalityStacks, "cs"},
    {PolicyKind::kMaxBipsExact, "maxbips"},
    {PolicyKind::kMaxBipsHeuristic, "maxbips-heuristic"},
    {PolicyKind::kStatic, "static"},
};

void check_shapes(const Matrix& cpi, const Matrix& power, std::span<const double> freq_hz) {
  if (cpi.rows() == 0 || cpi.cols() == 0 || cpi.rows() != power.rows() || cpi.cols() != power.cols() ||
      freq_hz.size() != cpi.cols()) {
    throw std::invalid_argument("CPI, power and frequency shapes disagree");
  }
}

double total_of(const Matrix& power, std::span<const int> configs) {
  double s = 0.0;
  for (std::size_t i = 0; i < configs.size(); ++i) s += power(i, static_cast<std::size_t>(configs[i] - 1));
  return s;
}

Assignment all_lowest(const Matrix& power, double budget) {
  Assignment a;
  a.configs.assign(power.rows(), 1);
  a.total_power = total_of(power, a.configs);
  a.feasible = within_budget(a.total_power, budget);
  return a;
}

}  // namespace

std::string_view to_string(PolicyKind kind) {
  for (const auto& k : kKindNames) {
    if (k.kind == kind) return k.name;
  }
  return "unknown";
}

PolicyKind policy_kind_from_string(std::string_view s) {
  for (const auto& k : kKindNames) {
    if (k.name == s) return k.kind;
  }
  throw std::invalid_argument("unknown policy '" + std::string(s) +
                              "' (tpeq, tpeq-w, cs, maxbips, maxbips-heuristic, static)");
}

Predictions predict_matrices(const EpochView& view, const PredictorCoefficients& coeffs) {
  if (coeffs.n_configs() != view.table->size()) {
    throw std::invalid_argument("coefficients cover " + std::to_string(coeffs.n_configs()) +
                                " configurations, the table has " + std::to_string(view.table->size()));
  }
  const auto n = static_cast<std::size_t>(view.n_threads());
  const auto m = static_cast<std::size_t>(view.n_levels());
  Predictions p{Matrix(n, m), Matrix(n, m), 0};
  for (std::size_t i = 0; i < n; ++i) {
    const ThreadRuntimeState& st = view.threads[i];
    for (std::size_t l = 0; l < m; ++l) {
      const int config = view.levels[l];
      double cpi = last_value_cpi(std::nullopt);
      if (st.has_stack) {
        const CpiPrediction pred = cross_config_cpi(st.last_stack, st.stack_config, config, coeffs);
        cpi = pred.cpi;
        p.clamped += pred.clamped ? 1 : 0;
      }
      p.cpi(i, l) = cpi;
      p.power(i, l) = predict_power(cpi, config, coeffs);
    }
  }
  return p;
}

double sum_ips(const Matrix& cpi, std::span<const double> freq_hz, std::span<const int> configs) {
  double s = 0.0;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const auto l = static_cast<std::size_t>(configs[i] - 1);
    s += freq_hz[l] / cpi(i, l);
  }
  return s;
}

namespace {

// One step along a thread's upper concave hull of (power, IPS) points.
struct Segment {
  double slope;
  double cost;
  double gain;
  std::size_t thread;
};

class MaxBipsSearch {
 public:
  MaxBipsSearch(const Matrix& cpi, const Matrix& power, std::span<const double> freq_hz, double budget)
      : power_(power), budget_(budget), n_(cpi.rows()), m_(cpi.cols()), value_(n_, m_), min_cost_(n_) {
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < m_; ++j) value_(i, j) = freq_hz[j] / cpi(i, j);
    }
    // Suffix sums of each thread's cheapest option bound feasibility.
    suffix_min_cost_.assign(n_ + 1, 0.0);
    for (std::size_t i = n_; i-- > 0;) {
      double c = std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t j = 0; j < m_; ++j) {
        if (power(i, j) < c) {
          c = power(i, j);
          arg = j;
        }
      }
      min_cost_[i] = arg;
      suffix_min_cost_[i] = suffix_min_cost_[i + 1] + c;
    }
    for (std::size_t i = 0; i < n_; ++i) add_hull(i);
    std::stable_sort(segments_.begin(), segments_.end(),
                     [](const Segment& a, const Segment& b) { return a.slope > b.slope; });
  }

  Assignment solve(const Assignment& incumbent) {
    current_.assign(n_, 1);
    best_value_ = -std::numeric_limits<double>::infinity();
    floor_ = incumbent.feasible ? sum_value(incumbent.configs) : -std::numeric_limits<double>::infinity();
    found_ = false;
    dfs(0, 0.0, 0.0);
    Assignment a;
    a.configs = found_ ? best_ : incumbent.configs;
    a.total_power = total_of(power_, a.configs);
    a.feasible = true;
    return a;
  }

 private:
  double sum_value(std::span<const int> c) const {
    double s = 0.0;
    for (std::size_t i = 0; i < n_; ++i) s += value_(i, static_cast<std::size_t>(c[i] - 1));
    return s;
  }

  void add_hull(std::size_t i) {
    std::vector<std::size_t> order(m_);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (power_(i, a) != power_(i, b)) return power_(i, a) < power_(i, b);
      return value_(i, a) > value_(i, b);
    });
    std::vector<std::size_t> hull;
    for (const std::size_t j : order) {
      if (!hull.empty() && value_(i, j) <= value_(i, hull.back())) continue;
      while (hull.size() >= 2) {
        const std::size_t a = hull[hull.size() - 2];
        const std::size_t b = hull.back();
        const double s_ab = (value_(i, b) - value_(i, a)) / (power_(i, b) - power_(i, a));
        const double s_bj = (value_(i, j) - value_(i, b)) / (power_(i, j) - power_(i, b));
        if (s_bj >= s_ab) hull.pop_back();
        else break;
      }
      hull.push_back(j);
    }
    for (std::size_t k = 1; k < hull.size(); ++k) {
      const double cost = power_(i, hull[k]) - power_(i, hull[k - 1]);
      const double gain = value_(i, hull[k]) - value_(i, hull[k - 1]);
      segments_.push_back({gain / cost, cost, gain, i});
    }
    hull_base_value_.push_back(hull.empty() ? 0.0 : value_(i, hull.front()));
  }

  // LP relaxation over threads depth..n-1 with `room` watts beyond their cheapest options.
  double relaxation(std::size_t depth, double room) const {
    double v = 0.0;
    for (std::size_t i = depth; i < n_; ++i) v += hull_base_value_[i];
    for (const Segment& s : segments_) {
      if (room <= 0.0) break;
      if (s.thread < depth) continue;
      if (s.cost <= room) {
        v += s.gain;
        room -= s.cost;
      } else {
        v += s.gain * room / s.cost;
        room = 0.0;
      }
    }
    return v;
  }

  void dfs(std::size_t depth, double cost, double value) {
    if (depth == n_) {
      if (!within_budget(cost, budget_)) return;
      if (value < floor_) return;
      if (!found_ || value > best_value_) {
        best_value_ = value;
        best_ = current_;
        found_ = true;
      }
      return;
    }
    const double room = budget_ - cost - suffix_min_cost_[depth];
    if (room < -kRelativeTolerance * std::abs(budget_)) return;
    const double bound = value + relaxation(depth, std::max(0.0, room));
    const double bound_slack = 1e-9 * std::max(1.0, std::abs(bound));
    if (bound + bound_slack < floor_) return;
    if (found_ && bound + bound_slack <= best_value_) return;
    for (std::size_t j = 0; j < m_; ++j) {
      current_[depth] = static_cast<int>(j + 1);
      dfs(depth + 1, cost + power_(depth, j), value + value_(depth, j));
    }
    current_[depth] = 1;
  }

  const Matrix& power_;
  double budget_;
  std::size_t n_;
  std::size_t m_;
  Matrix value_;
  std::vector<std::size_t> min_cost_;
  std::vector<double> suffix_min_cost_;
  std::vector<double> hull_base_value_;
  std::vector<Segment> segments_;
  std::vector<int> current_;
  std::vector<int> best_;
  double best_value_ = 0.0;
  double floor_ = 0.0;
  bool found_ = false;
};

}  // namespace

Assignment maxbips_exact(const Matrix& cpi, const Matrix& power, std::span<const double> freq_hz, double budget,
                         int max_threads) {
  check_shapes(cpi, power, freq_hz);
  if (cpi.rows() > static_cast<std::size_t>(std::max(0, max_threads))) {
    throw SizeGuardError("maxbips_exact: " + std::to_string(cpi.rows()) + " threads exceed the exact-search guard of " +
                         std::to_string(max_threads));
  }
  Assignment lowest = all_lowest(power, budget);
  if (!lowest.feasible) return lowest;
  MaxBipsSearch search(cpi, power, freq_hz, budget);
  return search.solve(maxbips_heuristic(cpi, power, freq_hz, budget));
}

Assignment maxbips_heuristic(const Matrix& cpi, const Matrix& power, std::span<const double> freq_hz, double budget) {
  check_shapes(cpi, power, freq_hz);
  Assignment a = all_lowest(power, budget);
  if (!a.feasible) return a;
  const std::size_t n = cpi.rows();
  const int top = static_cast<int>(cpi.cols());
  double running = a.total_power;
  std::vector<char> blocked(n, 0);
  for (;;) {
    std::size_t pick = n;
    double pick_ratio = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (blocked[i] || a.configs[i] >= top) continue;
      const auto l = static_cast<std::size_t>(a.configs[i] - 1);
      const double d_power = power(i, l + 1) - power(i, l);
      if (!within_budget(running + d_power, budget)) {
        blocked[i] = 1;  // the remaining budget only shrinks
        continue;
      }
      const double d_ips = freq_hz[l + 1] / cpi(i, l + 1) - freq_hz[l] / cpi(i, l);
      const double ratio = d_power <= 0.0 ? std::numeric_limits<double>::infinity() : d_ips / d_power;
      if (pick == n || ratio > pick_ratio) {
        pick = i;
        pick_ratio = ratio;
      }
    }
    if (pick == n) break;
    const auto l = static_cast<std::size_t>(a.configs[pick] - 1);
    running += power(pick, l + 1) - power(pick, l);
    ++a.configs[pick];
  }
  a.total_power = total_of(power, a.configs);
  return a;
}

std::vector<double> criticality(std::span<const ActivityInterval> intervals, int n_threads) {
  std::vector<double> crit(static_cast<std::size_t>(n_threads), 0.0);
  double total = 0.0;
  for (const auto& iv : intervals) total += static_cast<double>(iv.cycles);
  if (!(total > 0.0)) {
    std::fill(crit.begin(), crit.end(), 1.0);
    return crit;
  }
  for (const auto& iv : intervals) {
    if (iv.active.empty()) continue;
    const double share = static_cast<double>(iv.cycles) / static_cast<double>(iv.active.size());
    for (const int t : iv.active) crit.at(static_cast<std::size_t>(t)) += share;
  }
  const double scale = static_cast<double>(n_threads) / total;
  for (auto& c : crit) c *= scale;
  return crit;
}

int update_accelerated_thread(int current, std::span<const double> crit) {
  if (crit.empty()) return -1;
  int best = 0;
  for (int i = 1; i < static_cast<int>(crit.size()); ++i) {
    if (crit[static_cast<std::size_t>(i)] > crit[static_cast<std::size_t>(best)]) best = i;
  }
  if (current >= 0 && current < static_cast<int>(crit.size())) {
    if (crit[static_cast<std::size_t>(current)] < kCsReleaseThreshold) current = -1;
    else if (best != current && crit[static_cast<std::size_t>(best)] > kCsAccelerateThreshold) return best;
    else return current;
  }
  return crit[static_cast<std::size_t>(best)] > kCsAccelerateThreshold ? best : -1;
}

Assignment criticality_stacks_assign(std::span<const double> crit, int accelerated, const Matrix& power,
                                     double budget) {
  const std::size_t n = power.rows();
  const int top = static_cast<int>(power.cols());
  if (crit.size() != n) throw std::invalid_argument("criticality_stacks_assign: one criticality per thread");
  Assignment a = all_lowest(power, budget);
  if (!a.feasible) return a;
  const bool has_acc = accelerated >= 0 && static_cast<std::size_t>(accelerated) < n;

  auto fits = [&](const std::vector<int>& c) { return within_budget(total_of(power, c), budget); };

  std::vector<int> c(n, 1);
  if (has_acc) {
    // The critical thread gets the highest level that still leaves room for the rest at level 1.
    int acc_level = top;
    for (; acc_level > 1; --acc_level) {
      c[static_cast<std::size_t>(accelerated)] = acc_level;
      if (fits(c)) break;
    }
    c[static_cast<std::size_t>(accelerated)] = acc_level;
  }
  // Highest homogeneous level for everyone else.
  for (int h = top; h >= 1; --h) {
    std::vector<int> trial = c;
    for (std::size_t i = 0; i < n; ++i) {
      if (!has_acc || static_cast<int>(i) != accelerated) trial[i] = h;
    }
    if (fits(trial)) {
      c = trial;
      break;
    }
  }
  // Residual power in decreasing criticality, ties to the lower index.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return crit[x] > crit[y]; });
  for (const std::size_t i : order) {
    while (c[i] < top) {
      ++c[i];
      if (!fits(c)) {
        --c[i];
        break;
      }
    }
  }
  a.configs = c;
  a.total_power = total_of(power, c);
  a.feasible = true;
  return a;
}

int max_feasible_static_level(const WorkloadSpec& workload, const ConfigTable& table, std::span<const int> levels,
                              double budget) {
  for (int level = static_cast<int>(levels.size()); level >= 1; --level) {
    const int config = levels[static_cast<std::size_t>(level - 1)];
    const CoreConfig& cc = table.at(config);
    double total = 0.0;
    for (const auto& phases : workload.threads) {
      double worst = 0.0;
      for (const auto& ph : phases) {
        worst = std::max(worst, cc.truth_power(ph.cpi_at(config, 1.0 - ph.drift.amplitude)));
      }
      total += worst;
    }
    if (within_budget(total, budget)) return level;
  }
  return 1;
}

namespace {

std::vector<double> level_frequencies(const EpochView& view) {
  std::vector<double> f;
  for (int l = 1; l <= view.n_levels(); ++l) f.push_back(view.level_freq_hz(l));
  return f;
}

PolicyDecision fallback_decision(const EpochView& view) {
  PolicyDecision d;
  d.fallback = true;
  if (view.previous && view.previous->configs.size() == static_cast<std::size_t>(view.n_threads())) {
    d.assignment = *view.previous;
  } else {
    d.assignment.configs.assign(static_cast<std::size_t>(view.n_threads()), 1);
  }
  d.assignment.feasible = true;
  return d;
}

// Shared plumbing: ground truth or predictions for every (thread, level).
class PredictingPolicy : public Policy {
 public:
  explicit PredictingPolicy(const PolicyHandle& h) : handle_(h) {}

 protected:
  // Fills cpi/power; returns false when predictions could not be formed.
  bool inputs(const EpochView& view, Matrix& cpi, Matrix& power, PolicyDecision& d) const {
    if (handle_.oracle_mode) {
      if (!view.oracle) return false;
      cpi = view.oracle->cpi;
      power = view.oracle->power;
      return true;
    }
    try {
      Predictions p = predict_matrices(view, *handle_.coeffs);
      cpi = p.cpi;
      power = p.power;
      d.clamped_predictions = p.clamped;
      d.predicted_cpi = p.cpi;
      d.predicted_power = p.power;
      return true;
    } catch (const std::exception&) {
      return false;
    }
  }

  PolicyHandle handle_;
};

class TpeqPolicy final : public PredictingPolicy {
 public:
  TpeqPolicy(const PolicyHandle& h, bool weighted) : PredictingPolicy(h), weighted_(weighted) {}

  PolicyDecision decide(const EpochView& view) override {
    PolicyDecision d;
    OptimizerInput in;
    if (!inputs(view, in.cpi, in.power, d)) return fallback_decision(view);
    const auto n = static_cast<std::size_t>(view.n_threads());
    in.weights.assign(n, 1.0);
    in.instr_count.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (handle_.oracle_mode) {
        if (weighted_) in.weights[i] = view.oracle->weights[i];
        in.instr_count[i] = view.oracle->instr_count[i];
      } else {
        if (weighted_) in.weights[i] = view.threads[i].weight;
        in.instr_count[i] = static_cast<double>(view.threads[i].instr_in_interval);
      }
    }
    in.budget = view.budget_w;
    if (view.mode == AdaptationMode::kDvfs) {
      in.mode = ProgressMode::kDvfs;
      in.epoch_length = view.epoch_seconds;
      in.freq_hz = level_frequencies(view);
    } else {
      in.epoch_length = static_cast<double>(view.epoch_cycles);
    }
    try {
      d.assignment = tpeq_assign_heap(in);
    } catch (const std::invalid_argument&) {
      PolicyDecision f = fallback_decision(view);
      f.predicted_cpi = d.predicted_cpi;
      f.predicted_power = d.predicted_power;
      return f;
    }
    return d;
  }

  std::string name() const override { return std::string(to_string(weighted_ ? PolicyKind::kTpeq : PolicyKind::kTpeqW)); }

 private:
  bool weighted_;
};

class CriticalityStacksPolicy final : public PredictingPolicy {
 public:
  using PredictingPolicy::PredictingPolicy;

  PolicyDecision decide(const EpochView& view) override {
    PolicyDecision d;
    Matrix cpi;
    Matrix power;
    if (!inputs(view, cpi, power, d)) return fallback_decision(view);
    const std::vector<double> crit = criticality(view.intervals, view.n_threads());
    accelerated_ = update_accelerated_thread(accelerated_, crit);
    d.assignment = criticality_stacks_assign(crit, accelerated_, power, view.budget_w);
    return d;
  }

  std::string name() const override { return std::string(to_string(PolicyKind::kCriticalityStacks)); }

 private:
  int accelerated_ = -1;
};

class MaxBipsPolicy final : public PredictingPolicy {
 public:
  MaxBipsPolicy(const PolicyHandle& h, bool exact) : PredictingPolicy(h), exact_(exact) {}

  PolicyDecision decide(const EpochView& view) override {
    PolicyDecision d;
    Matrix cpi;
    Matrix power;
    if (!inputs(view, cpi, power, d)) return fallback_decision(view);
    const std::vector<double> freq = level_frequencies(view);
    d.assignment = exact_ ? maxbips_exact(cpi, power, freq, view.budget_w)
                          : maxbips_heuristic(cpi, power, freq, view.budget_w);
    return d;
  }

  std::string name() const override {
    return std::string(to_string(exact_ ? PolicyKind::kMaxBipsExact : PolicyKind::kMaxBipsHeuristic));
  }

 private:
  bool exact_;
};

class StaticPolicy final : public Policy {
 public:
  explicit StaticPolicy(int level) : level_(level) {}

  PolicyDecision decide(const EpochView& view) override {
    PolicyDecision d;
    d.assignment.configs.assign(static_cast<std::size_t>(view.n_threads()), level_);
    d.assignment.feasible = true;
    return d;
  }

  std::string name() const override { return std::string(to_string(PolicyKind::kStatic)); }
  bool adaptive() const override { return false; }

 private:
  int level_;
};

}  // namespace

std::unique_ptr<Policy> make_policy(const PolicyHandle& handle) {
  if (handle.kind == PolicyKind::kStatic) {
    if (handle.static_level < 1) throw std::invalid_argument("static level must be >= 1");
    return std::make_unique<StaticPolicy>(handle.static_level);
  }
  if (!handle.oracle_mode && !handle.coeffs) {
    throw std::invalid_argument("policy '" + std::string(to_string(handle.kind)) +
                                "' needs predictor coefficients unless it runs in oracle mode");
  }
  switch (handle.kind) {
    case PolicyKind::kTpeq:
      return std::make_unique<TpeqPolicy>(handle, true);
    case PolicyKind::kTpeqW:
      return std::make_unique<TpeqPolicy>(handle, false);
    case PolicyKind::kCriticalityStacks:
      return std::make_unique<CriticalityStacksPolicy>(handle);
    case PolicyKind::kMaxBipsExact:
      return std::make_unique<MaxBipsPolicy>(handle, true);
    case PolicyKind::kMaxBipsHeuristic:
      return std::make_unique<MaxBipsPolicy>(handle, false);
    case PolicyKind::kStatic:
      break;
  }
  throw std::invalid_argument("unhandled policy kind");
}

}  // namespace tpeq
