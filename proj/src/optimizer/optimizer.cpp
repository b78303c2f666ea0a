#include "tpeq/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "tpeq/errors.hpp"

namespace tpeq {

bool within_budget(double total_power, double budget) {
  return total_power <= budget + kRelativeTolerance * std::abs(budget);
}

ParetoResult pareto_filter(std::span<const double> performance, std::span<const double> power) {
  if (performance.size() != power.size() || performance.empty()) {
    throw std::invalid_argument("pareto_filter: performance and power must be non-empty and equally sized");
  }
  for (std::size_t j = 0; j < power.size(); ++j) {
    if (!std::isfinite(performance[j]) || !std::isfinite(power[j])) {
      throw std::invalid_argument("pareto_filter: non-finite proxy at configuration " + std::to_string(j + 1));
    }
    if (j > 0 && !(power[j] > power[j - 1])) {
      throw std::invalid_argument("pareto_filter: configurations must be sorted by strictly ascending power");
    }
  }
  ParetoResult r;
  r.retained.push_back(1);
  double best = performance[0];
  for (std::size_t j = 1; j < performance.size(); ++j) {
    if (performance[j] > best) {
      r.retained.push_back(static_cast<int>(j + 1));
      best = performance[j];
    } else {
      r.discarded.push_back(static_cast<int>(j + 1));
    }
  }
  r.all_dominated = performance.size() > 1 && r.retained.size() == 1;
  return r;
}

double epoch_progress(double instr_count, double weight, double cpi, double epoch_length, ProgressMode mode,
                      double freq_hz) {
  if (!(cpi > 0.0) || !std::isfinite(cpi)) throw std::invalid_argument("epoch_progress: CPI must be positive");
  if (!(weight > 0.0) || !std::isfinite(weight)) throw std::invalid_argument("epoch_progress: weight must be positive");
  const double cycles = mode == ProgressMode::kDvfs ? epoch_length * freq_hz : epoch_length;
  return instr_count / weight + cycles / (weight * cpi);
}

double epoch_progress(const ThreadRuntimeState& state, double cpi, double epoch_length, ProgressMode mode,
                      double freq_hz) {
  return epoch_progress(static_cast<double>(state.instr_in_interval), state.weight, cpi, epoch_length, mode, freq_hz);
}

double OptimizerInput::progress(std::size_t thread, std::size_t level) const {
  const double w = weights[thread];
  const double c = cpi(thread, level);
  if (epoch_length == 0.0) return 1.0 / (w * c);
  const double instr = instr_count.empty() ? 0.0 : instr_count[thread];
  return epoch_progress(instr, w, c, epoch_length, mode, mode == ProgressMode::kDvfs ? freq_hz[level] : 0.0);
}

void OptimizerInput::validate() const {
  const std::size_t n = weights.size();
  if (n == 0) throw std::invalid_argument("optimizer: no threads");
  if (cpi.rows() != n || power.rows() != n || cpi.cols() != power.cols() || cpi.cols() == 0) {
    throw std::invalid_argument("optimizer: CPI and power must both be N x M with M >= 1");
  }
  if (!(budget > 0.0) || !std::isfinite(budget)) throw std::invalid_argument("optimizer: budget must be positive");
  if (!instr_count.empty() && instr_count.size() != n) {
    throw std::invalid_argument("optimizer: instr_count must be empty or length N");
  }
  if (epoch_length < 0.0 || !std::isfinite(epoch_length)) {
    throw std::invalid_argument("optimizer: epoch length must be finite and non-negative");
  }
  if (mode == ProgressMode::kDvfs && epoch_length > 0.0 && freq_hz.size() != cpi.cols()) {
    throw std::invalid_argument("optimizer: DVFS mode needs one frequency per level");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(weights[i] > 0.0) || !std::isfinite(weights[i])) {
      throw std::invalid_argument("optimizer: weight of thread " + std::to_string(i) + " must be positive");
    }
    if (!instr_count.empty() && (!(instr_count[i] >= 0.0) || !std::isfinite(instr_count[i]))) {
      throw std::invalid_argument("optimizer: instr_count must be finite and non-negative");
    }
    for (std::size_t j = 0; j < cpi.cols(); ++j) {
      const double c = cpi(i, j);
      const double p = power(i, j);
      if (!(c > 0.0) || !std::isfinite(c) || !(p > 0.0) || !std::isfinite(p)) {
        throw std::invalid_argument("optimizer: CPI and power entries must be finite and positive (thread " +
                                    std::to_string(i) + ", level " + std::to_string(j + 1) + ")");
      }
    }
  }
}

double min_progress(const OptimizerInput& in, std::span<const int> configs) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < configs.size(); ++i) {
    m = std::min(m, in.progress(i, static_cast<std::size_t>(configs[i] - 1)));
  }
  return m;
}

double total_power(const OptimizerInput& in, std::span<const int> configs) {
  double s = 0.0;
  for (std::size_t i = 0; i < configs.size(); ++i) s += in.power(i, static_cast<std::size_t>(configs[i] - 1));
  return s;
}

namespace {

struct Candidate {
  double progress;
  std::size_t thread;
};

// True when `a` lags `b`: strictly lower progress beyond the relative tolerance,
// or a tie broken toward the lower thread index.
bool lags(const Candidate& a, const Candidate& b) {
  const double scale = std::max(std::abs(a.progress), std::abs(b.progress));
  const double diff = a.progress - b.progress;
  if (std::abs(diff) <= kRelativeTolerance * scale) return a.thread < b.thread;
  return diff < 0.0;
}

// Common set-up for both greedy variants. Returns false when even the all-lowest
// assignment busts the budget.
bool start(const OptimizerInput& in, Assignment& out, double& running) {
  in.validate();
  const std::size_t n = in.n_threads();
  out.configs.assign(n, 1);
  running = total_power(in, out.configs);
  out.total_power = running;
  out.feasible = within_budget(running, in.budget);
  return out.feasible;
}

// Tries to raise `thread` one level. Returns false when the raise does not fit.
bool try_raise(const OptimizerInput& in, Assignment& out, double& running, std::size_t thread) {
  const auto level = static_cast<std::size_t>(out.configs[thread] - 1);
  const double next = running - in.power(thread, level) + in.power(thread, level + 1);
  if (!within_budget(next, in.budget)) return false;
  running = next;
  ++out.configs[thread];
  return true;
}

// Four-ary min-heap ordered by `lags`. Shallower than a binary heap, and a raise
// needs one sift-down instead of a pop and a push.
class LagHeap {
 public:
  explicit LagHeap(std::vector<Candidate> items) : h_(std::move(items)) {
    if (h_.size() < 2) return;
    for (std::size_t i = (h_.size() - 2) / kArity + 1; i-- > 0;) sift_down(i);
  }

  bool empty() const { return h_.empty(); }
  const Candidate& top() const { return h_.front(); }

  void pop() {
    h_.front() = h_.back();
    h_.pop_back();
    if (!h_.empty()) sift_down(0);
  }

  void replace_top(double progress) {
    h_.front().progress = progress;
    sift_down(0);
  }

 private:
  static constexpr std::size_t kArity = 4;

  void sift_down(std::size_t i) {
    const Candidate item = h_[i];
    const std::size_t n = h_.size();
    for (;;) {
      const std::size_t first = i * kArity + 1;
      if (first >= n) break;
      const std::size_t last = std::min(first + kArity, n);
      std::size_t best = first;
      for (std::size_t c = first + 1; c < last; ++c) {
        if (lags(h_[c], h_[best])) best = c;
      }
      if (!lags(h_[best], item)) break;
      h_[i] = h_[best];
      i = best;
    }
    h_[i] = item;
  }

  std::vector<Candidate> h_;
};

}  // namespace

Assignment tpeq_assign(const OptimizerInput& in) {
  Assignment out;
  double running = 0.0;
  if (!start(in, out, running)) return out;
  const std::size_t n = in.n_threads();
  const int top = static_cast<int>(in.n_levels());
  std::vector<char> candidate(n, top > 1 ? 1 : 0);
  std::vector<double> progress(n);
  for (std::size_t i = 0; i < n; ++i) progress[i] = in.progress(i, 0);
  for (;;) {
    bool found = false;
    Candidate best{0.0, 0};
    for (std::size_t i = 0; i < n; ++i) {
      if (!candidate[i]) continue;
      const Candidate c{progress[i], i};
      if (!found || lags(c, best)) {
        best = c;
        found = true;
      }
    }
    if (!found) break;
    const std::size_t t = best.thread;
    if (!try_raise(in, out, running, t)) {
      candidate[t] = 0;
      continue;
    }
    if (out.configs[t] == top) {
      candidate[t] = 0;
    } else {
      progress[t] = in.progress(t, static_cast<std::size_t>(out.configs[t] - 1));
    }
  }
  out.total_power = total_power(in, out.configs);
  return out;
}

Assignment tpeq_assign_heap(const OptimizerInput& in) {
  Assignment out;
  double running = 0.0;
  if (!start(in, out, running)) return out;
  const std::size_t n = in.n_threads();
  const int top = static_cast<int>(in.n_levels());
  if (top == 1) return out;
  std::vector<Candidate> items;
  items.reserve(n);
  for (std::size_t i = 0; i < n; ++i) items.push_back({in.progress(i, 0), i});
  LagHeap heap(std::move(items));
  // Once even the cheapest step anywhere overshoots, every remaining attempt fails.
  // The margin keeps rounding in try_raise from ever disagreeing with this test.
  double min_step = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 1; j < in.n_levels(); ++j) min_step = std::min(min_step, in.power(i, j) - in.power(i, j - 1));
  }
  const auto exhausted = [&] {
    const double margin = 1e-9 * (std::abs(running) + std::abs(in.budget));
    return running + min_step > in.budget + kRelativeTolerance * std::abs(in.budget) + margin;
  };
  while (!heap.empty() && !exhausted()) {
    const std::size_t t = heap.top().thread;
    if (!try_raise(in, out, running, t) || out.configs[t] == top) {
      heap.pop();
      continue;
    }
    // A raised thread only gains progress, so it can only sink.
    heap.replace_top(in.progress(t, static_cast<std::size_t>(out.configs[t] - 1)));
  }
  out.total_power = total_power(in, out.configs);
  return out;
}

Assignment brute_force_assign(const OptimizerInput& in, std::uint64_t limit) {
  in.validate();
  const std::size_t n = in.n_threads();
  const std::size_t m = in.n_levels();
  std::uint64_t space = 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (space > limit / m) {
      throw SizeGuardError("brute_force_assign: " + std::to_string(m) + "^" + std::to_string(n) +
                           " assignments exceed the limit of " + std::to_string(limit));
    }
    space *= m;
  }
  if (space > limit) throw SizeGuardError("brute_force_assign: search space exceeds limit");

  Matrix progress(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) progress(i, j) = in.progress(i, j);
  }

  Assignment best;
  best.configs.assign(n, 1);
  best.feasible = false;
  double best_min = -std::numeric_limits<double>::infinity();
  std::vector<int> c(n, 1);
  for (;;) {
    double power = 0.0;
    double lowest = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = static_cast<std::size_t>(c[i] - 1);
      power += in.power(i, j);
      lowest = std::min(lowest, progress(i, j));
    }
    if (within_budget(power, in.budget) && (!best.feasible || lowest > best_min)) {
      best.configs = c;
      best.feasible = true;
      best_min = lowest;
    }
    // Odometer in lexicographic order: the last thread turns fastest.
    std::size_t k = n;
    while (k > 0) {
      --k;
      if (c[k] < static_cast<int>(m)) {
        ++c[k];
        break;
      }
      c[k] = 1;
      if (k == 0) {
        k = n + 1;
        break;
      }
    }
    if (k == n + 1 || n == 0) break;
  }
  best.total_power = total_power(in, best.configs);
  return best;
}

}  // namespace tpeq
