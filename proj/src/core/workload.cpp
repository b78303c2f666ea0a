#include "tpeq/workload.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "tpeq/errors.hpp"
#include "tpeq/rng.hpp"
#include "tpeq/text.hpp"

namespace tpeq {

namespace {

constexpr std::string_view kHeader = "tpeq-workload v1";
constexpr std::string_view kHashKey = "content-hash:";

struct CategoryName {
  Category category;
  std::string_view name;
};

constexpr CategoryName kCategoryNames[] = {
    {Category::kHomogeneous, "homogeneous"},
    {Category::kHeterogeneous, "heterogeneous"},
    {Category::kThreadPool, "thread-pool"},
    {Category::kPipeline, "pipeline"},
};

double walk_step(const DriftParams& p, int epoch) {
  const std::uint64_t bits = mix64(p.seed, static_cast<std::uint64_t>(epoch));
  const double u = static_cast<double>(bits >> 11) * 0x1.0p-53;  // [0, 1)
  return p.step * (2.0 * u - 1.0);
}

std::string body_text(const WorkloadSpec& w) {
  using text::format_real;
  std::string out;
  out.reserve(256 + static_cast<std::size_t>(w.n_threads() * w.n_phases()) * 320);
  out += "name: " + w.name + "\n";
  out += "category: " + std::string(to_string(w.category)) + "\n";
  out += "seed: " + std::to_string(w.seed) + "\n";
  out += "stages: " + std::to_string(w.n_stages) + "\n";
  out += "threads: " + std::to_string(w.n_threads()) + "\n";
  out += "phases: " + std::to_string(w.n_phases()) + "\n";
  out += "configs: " + std::to_string(w.n_configs()) + "\n";
  for (int t = 0; t < w.n_threads(); ++t) {
    out += "thread " + std::to_string(t) + "\n";
    const auto& phases = w.threads[static_cast<std::size_t>(t)];
    for (std::size_t p = 0; p < phases.size(); ++p) {
      const PhaseProfile& ph = phases[p];
      out += "  phase " + std::to_string(p) + "\n";
      out += "    instr: " + std::to_string(ph.instr_count) + "\n";
      out += "    stack: " + format_real(ph.base_stack.compute) + " " + format_real(ph.base_stack.memory) + " " +
             format_real(ph.base_stack.branch) + " " + format_real(ph.base_stack.synch) + "\n";
      out += "    drift: " + format_real(ph.drift.amplitude) + " " + format_real(ph.drift.step) + " " +
             std::to_string(ph.drift.seed) + "\n";
      for (std::size_t j = 0; j < ph.scaling.size(); ++j) {
        const auto& s = ph.scaling[j];
        out += "    scale " + std::to_string(j + 1) + ": " + format_real(s[0]) + " " + format_real(s[1]) + " " +
               format_real(s[2]) + " " + format_real(s[3]) + "\n";
      }
    }
  }
  return out;
}

// Line cursor over the workload text.
class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  // Next non-blank, non-comment line, trimmed.
  std::string_view next() {
    while (pos_ < text_.size()) {
      const auto eol = text_.find('\n', pos_);
      const auto end = eol == std::string_view::npos ? text_.size() : eol;
      const std::string_view raw = text_.substr(pos_, end - pos_);
      pos_ = end == text_.size() ? end : end + 1;
      ++line_;
      const std::string_view t = text::trim(raw);
      if (t.empty() || t.front() == '#') continue;
      return t;
    }
    ++line_;
    throw ParseError("unexpected end of file", line_);
  }

  bool at_end() {
    std::size_t probe = pos_;
    while (probe < text_.size()) {
      const auto eol = text_.find('\n', probe);
      const auto end = eol == std::string_view::npos ? text_.size() : eol;
      const auto t = text::trim(text_.substr(probe, end - probe));
      if (!t.empty() && t.front() != '#') return false;
      probe = end == text_.size() ? end : end + 1;
    }
    return true;
  }

  // Value after "key:".
  std::string_view value(std::string_view key) {
    const std::string_view line = next();
    if (line.substr(0, key.size()) != key || line.size() <= key.size() || line[key.size()] != ':') {
      throw ParseError("expected '" + std::string(key) + ":', found '" + std::string(line) + "'", line_);
    }
    return text::trim(line.substr(key.size() + 1));
  }

  std::int64_t int_value(std::string_view key) {
    const auto v = value(key);
    return text::parse_int(v, line_);
  }

  std::size_t line() const { return line_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 0;
};

std::vector<double> reals(std::string_view v, std::size_t expected, std::size_t line) {
  const auto tokens = text::split_ws(v);
  if (tokens.size() != expected) {
    throw ParseError("expected " + std::to_string(expected) + " values, found " + std::to_string(tokens.size()),
                     line);
  }
  std::vector<double> out;
  out.reserve(expected);
  for (const auto tok : tokens) out.push_back(text::parse_real(tok, line));
  return out;
}

}  // namespace

std::string_view to_string(Category c) {
  for (const auto& entry : kCategoryNames) {
    if (entry.category == c) return entry.name;
  }
  return "unknown";
}

Category category_from_string(std::string_view s) {
  for (const auto& entry : kCategoryNames) {
    if (entry.name == s) return entry.category;
  }
  throw std::invalid_argument("unknown workload category '" + std::string(s) +
                              "' (homogeneous, heterogeneous, thread-pool, pipeline)");
}

void DriftWalk::step() {
  walk_ = std::clamp(walk_ + walk_step(params_, epochs_), -1.0, 1.0);
  ++epochs_;
}

double drift_factor(const DriftParams& params, int epochs) {
  DriftWalk walk(params);
  for (int e = 0; e < epochs; ++e) walk.step();
  return walk.factor();
}

CpiStack PhaseProfile::stack_at(int config, double drift_factor) const {
  if (config < 1 || static_cast<std::size_t>(config) > scaling.size()) {
    throw std::out_of_range("configuration " + std::to_string(config) + " has no CPI multipliers");
  }
  const auto& s = scaling[static_cast<std::size_t>(config - 1)];
  return {base_stack.compute * s[0] * drift_factor, base_stack.memory * s[1] * drift_factor,
          base_stack.branch * s[2] * drift_factor, base_stack.synch * s[3] * drift_factor};
}

int WorkloadSpec::n_configs() const {
  if (threads.empty() || threads.front().empty()) return 0;
  return static_cast<int>(threads.front().front().scaling.size());
}

std::int64_t WorkloadSpec::total_instructions(int thread) const {
  std::int64_t sum = 0;
  for (const auto& p : threads.at(static_cast<std::size_t>(thread))) sum += p.instr_count;
  return sum;
}

void WorkloadSpec::validate() const {
  if (threads.empty()) throw std::invalid_argument("workload has no threads");
  const int phases = n_phases();
  const int configs = n_configs();
  if (phases <= 0) throw std::invalid_argument("workload has no phases");
  if (configs <= 0) throw std::invalid_argument("workload phases carry no configuration multipliers");
  if (n_stages < 1 || n_stages > n_threads()) throw std::invalid_argument("stage count must be in [1, threads]");
  for (int t = 0; t < n_threads(); ++t) {
    const auto& list = threads[static_cast<std::size_t>(t)];
    if (static_cast<int>(list.size()) != phases) {
      throw std::invalid_argument("thread " + std::to_string(t) + " has " + std::to_string(list.size()) +
                                  " phases, expected " + std::to_string(phases));
    }
    for (int p = 0; p < phases; ++p) {
      const PhaseProfile& ph = list[static_cast<std::size_t>(p)];
      const std::string where = "thread " + std::to_string(t) + " phase " + std::to_string(p);
      if (ph.instr_count <= 0) throw std::invalid_argument(where + ": instruction count must be positive");
      if (!ph.base_stack.valid()) throw std::invalid_argument(where + ": stack components must be finite and >= 0");
      if (!(ph.drift.amplitude >= 0.0 && ph.drift.amplitude < 1.0)) {
        throw std::invalid_argument(where + ": drift amplitude must be in [0, 1)");
      }
      if (static_cast<int>(ph.scaling.size()) != configs) {
        throw std::invalid_argument(where + ": wrong number of configuration multipliers");
      }
      for (const auto& s : ph.scaling) {
        for (const double v : s) {
          if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(where + ": multipliers must be positive");
        }
      }
      // Lowest possible CPI must stay positive at every configuration.
      for (int j = 1; j <= configs; ++j) {
        if (!(ph.cpi_at(j, 1.0 - ph.drift.amplitude) > 0.0)) {
          throw std::invalid_argument(where + ": ground-truth CPI must be positive");
        }
      }
    }
  }
}

std::string workload_hash(const WorkloadSpec& w) { return text::hex64(fnv1a64(body_text(w))); }

std::string serialize_workload(const WorkloadSpec& w) {
  const std::string body = body_text(w);
  std::string out;
  out.reserve(body.size() + 64);
  out += kHeader;
  out += "\n";
  out += kHashKey;
  out += " " + text::hex64(fnv1a64(body)) + "\n";
  out += body;
  return out;
}

WorkloadSpec parse_workload(std::string_view content) {
  Reader r(content);
  if (r.next() != kHeader) throw ParseError("missing '" + std::string(kHeader) + "' header", r.line());
  const std::string stored_hash(r.value("content-hash"));
  const std::size_t hash_line = r.line();

  WorkloadSpec w;
  w.name = std::string(r.value("name"));
  try {
    w.category = category_from_string(r.value("category"));
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what(), r.line());
  }
  const auto seed = r.value("seed");
  w.seed = text::parse_uint(seed, r.line());
  w.n_stages = static_cast<int>(r.int_value("stages"));
  const auto n_threads = r.int_value("threads");
  const auto n_phases = r.int_value("phases");
  const auto n_configs = r.int_value("configs");
  if (n_threads <= 0 || n_phases <= 0 || n_configs <= 0) {
    throw ParseError("thread, phase and configuration counts must be positive", r.line());
  }

  w.threads.resize(static_cast<std::size_t>(n_threads));
  for (std::int64_t t = 0; t < n_threads; ++t) {
    const auto head = text::split_ws(r.next());
    if (head.size() != 2 || head[0] != "thread" || text::parse_int(head[1], r.line()) != t) {
      throw ParseError("expected 'thread " + std::to_string(t) + "'", r.line());
    }
    auto& phases = w.threads[static_cast<std::size_t>(t)];
    phases.resize(static_cast<std::size_t>(n_phases));
    for (std::int64_t p = 0; p < n_phases; ++p) {
      const auto ph_head = text::split_ws(r.next());
      if (ph_head.size() != 2 || ph_head[0] != "phase" || text::parse_int(ph_head[1], r.line()) != p) {
        throw ParseError("expected 'phase " + std::to_string(p) + "'", r.line());
      }
      PhaseProfile& ph = phases[static_cast<std::size_t>(p)];
      ph.instr_count = r.int_value("instr");
      const auto stack_text = r.value("stack");
      const auto stack = reals(stack_text, 4, r.line());
      ph.base_stack = {stack[0], stack[1], stack[2], stack[3]};
      const auto drift = text::split_ws(r.value("drift"));
      if (drift.size() != 3) throw ParseError("drift needs amplitude, step and seed", r.line());
      ph.drift.amplitude = text::parse_real(drift[0], r.line());
      ph.drift.step = text::parse_real(drift[1], r.line());
      ph.drift.seed = text::parse_uint(drift[2], r.line());
      ph.scaling.resize(static_cast<std::size_t>(n_configs));
      for (std::int64_t j = 1; j <= n_configs; ++j) {
        const auto scale_text = r.value("scale " + std::to_string(j));
        const auto v = reals(scale_text, 4, r.line());
        ph.scaling[static_cast<std::size_t>(j - 1)] = {v[0], v[1], v[2], v[3]};
      }
    }
  }
  if (!r.at_end()) throw ParseError("trailing content after the last thread", r.line() + 1);

  if (workload_hash(w) != stored_hash) {
    throw ParseError("content hash mismatch: file says " + stored_hash + ", content hashes to " + workload_hash(w),
                     hash_line);
  }
  try {
    w.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("invalid workload: ") + e.what(), 0);
  }
  return w;
}

WorkloadSpec load_workload(const std::string& path) {
  try {
    return parse_workload(text::read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), 0);
  }
}

void save_workload(const WorkloadSpec& w, const std::string& path) {
  text::write_file_atomic(path, serialize_workload(w));
}

}  // namespace tpeq
