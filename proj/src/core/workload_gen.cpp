#include "tpeq/workload_gen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "tpeq/rng.hpp"

namespace tpeq {

namespace {

void check(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("generator: " + what);
}

void validate(const GeneratorParams& p, const ConfigTable& table) {
  table.validate();
  check(p.n_threads >= 1, "n_threads must be >= 1");
  check(p.n_phases >= 1, "n_phases must be >= 1");
  check(p.phase_instr >= 1000, "phase_instr must be >= 1000");
  check(p.phase_length_spread >= 0.0 && p.phase_length_spread < 1.0, "phase_length_spread must be in [0, 1)");
  check(p.cpi_spread >= 0.0 && p.cpi_spread <= 10.0, "cpi_spread must be in [0, 10]");
  check(p.weight_ratio_max >= 1.0 && p.weight_ratio_max <= 10.0, "weight_ratio_max must be in [1, 10]");
  check(p.phase_noise >= 0.0 && p.phase_noise <= 0.5, "phase_noise must be in [0, 0.5]");
  check(p.drift_amplitude >= 0.0 && p.drift_amplitude <= 0.5, "drift_amplitude must be in [0, 0.5]");
  check(p.scaling_jitter >= 0.0 && p.scaling_jitter <= 0.3, "scaling_jitter must be in [0, 0.3]");
  check(p.n_stages >= 1 && p.n_stages <= p.n_threads, "n_stages must be in [1, n_threads]");
  check(p.hot_thread >= 0 && p.hot_thread < p.n_threads, "hot_thread out of range");
  check(p.category != Category::kHomogeneous || p.weight_ratio_max == 1.0,
        "homogeneous workloads have no instruction count heterogeneity (weight_ratio_max must be 1)");
}

struct ThreadTraits {
  CpiStack stack;  // micro-architectural configuration-1 terms
  double work_ratio = 1.0;
  std::vector<std::array<double, kStackComponents>> scaling;
};

}  // namespace

WorkloadSpec generate_workload(const GeneratorParams& p, const ConfigTable& table) {
  validate(p, table);
  Rng rng(mix64(p.seed, 0x7470657157ULL));
  const int n = p.n_threads;
  const int m = table.size();

  // Work ratios: an exact spread from 1 to weight_ratio_max over a random permutation.
  std::vector<double> ratio(static_cast<std::size_t>(n), 1.0);
  if (p.category != Category::kHomogeneous && p.weight_ratio_max > 1.0) {
    if (p.work_profile == WorkProfile::kSingleHot) {
      ratio[static_cast<std::size_t>(p.hot_thread)] = p.weight_ratio_max;
    } else {
      std::vector<int> order(static_cast<std::size_t>(n));
      std::iota(order.begin(), order.end(), 0);
      for (int i = n - 1; i > 0; --i) {
        const auto j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i + 1)));
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
      }
      for (int i = 0; i < n; ++i) {
        const double pos = n == 1 ? 1.0 : static_cast<double>(i) / (n - 1);
        ratio[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 1.0 + (p.weight_ratio_max - 1.0) * pos;
      }
    }
  }

  std::vector<ThreadTraits> traits(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) {
    ThreadTraits& tr = traits[static_cast<std::size_t>(t)];
    tr.work_ratio = ratio[static_cast<std::size_t>(t)];
    tr.stack.compute = 1.30 * std::max(0.5, 1.0 + 0.08 * rng.normal());
    tr.stack.memory = 0.15 + p.cpi_spread * rng.uniform();
    tr.stack.branch = 0.07 * rng.uniform(0.6, 1.4);
    tr.stack.synch = 0.02 * rng.uniform(0.5, 1.5);
    tr.scaling.resize(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) {
      auto s = table.configs[static_cast<std::size_t>(j)].scaling;
      if (j > 0) {
        for (int c = 0; c < kStackComponents; ++c) {
          s[static_cast<std::size_t>(c)] *= std::exp(p.scaling_jitter * rng.normal());
          // Faster configurations never raise a component.
          s[static_cast<std::size_t>(c)] =
              std::min(s[static_cast<std::size_t>(c)], tr.scaling[static_cast<std::size_t>(j - 1)][static_cast<std::size_t>(c)]);
        }
      }
      tr.scaling[static_cast<std::size_t>(j)] = s;
    }
  }

  std::vector<double> phase_length(static_cast<std::size_t>(p.n_phases));
  for (auto& len : phase_length) len = 1.0 + p.phase_length_spread * rng.uniform(-1.0, 1.0);

  WorkloadSpec w;
  w.name = p.name;
  w.category = p.category;
  w.seed = p.seed;
  w.n_stages = p.category == Category::kPipeline ? p.n_stages : 1;
  w.threads.resize(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) {
    const ThreadTraits& tr = traits[static_cast<std::size_t>(t)];
    auto& phases = w.threads[static_cast<std::size_t>(t)];
    phases.resize(static_cast<std::size_t>(p.n_phases));
    for (int ph = 0; ph < p.n_phases; ++ph) {
      PhaseProfile& prof = phases[static_cast<std::size_t>(ph)];
      double count = static_cast<double>(p.phase_instr) * phase_length[static_cast<std::size_t>(ph)] * tr.work_ratio;
      if (p.category != Category::kHomogeneous && p.phase_noise > 0.0) {
        count *= std::max(0.5, 1.0 + p.phase_noise * rng.normal());
      }
      prof.instr_count = std::max<std::int64_t>(1, std::llround(count));
      CpiStack s = tr.stack;
      s.compute *= std::max(0.8, 1.0 + 0.04 * rng.normal());
      s.memory *= std::max(0.7, 1.0 + 0.06 * rng.normal());
      s.branch *= std::max(0.7, 1.0 + 0.06 * rng.normal());
      s.synch *= std::max(0.7, 1.0 + 0.06 * rng.normal());
      prof.base_stack = to_level_one(s, table);
      prof.scaling = tr.scaling;
      prof.drift = {p.drift_amplitude, 0.25, mix64(p.seed, (static_cast<std::uint64_t>(t) << 32) | static_cast<std::uint64_t>(ph))};
    }
  }
  w.validate();
  return w;
}

std::vector<GeneratorParams> corpus_presets() {
  std::vector<GeneratorParams> out;
  auto homogeneous = [&](const char* name, std::uint64_t seed, int phases, std::int64_t instr, double cpi_spread) {
    GeneratorParams g;
    g.name = name;
    g.category = Category::kHomogeneous;
    g.seed = seed;
    g.n_phases = phases;
    g.phase_instr = instr;
    g.cpi_spread = cpi_spread;
    out.push_back(g);
  };
  auto heterogeneous = [&](const char* name, std::uint64_t seed, int phases, std::int64_t instr, double cpi_spread,
                           double ratio) {
    GeneratorParams g;
    g.name = name;
    g.category = Category::kHeterogeneous;
    g.seed = seed;
    g.n_phases = phases;
    g.phase_instr = instr;
    g.cpi_spread = cpi_spread;
    g.weight_ratio_max = ratio;
    g.phase_noise = 0.04;
    out.push_back(g);
  };
  homogeneous("blackscholes_like", 101, 6, 24'000'000, 0.4);
  homogeneous("canneal_like", 102, 8, 16'000'000, 1.6);
  homogeneous("fft_like", 103, 8, 20'000'000, 1.0);
  homogeneous("ocean_like", 104, 14, 12'000'000, 1.2);
  homogeneous("radix_like", 105, 10, 14'000'000, 0.8);
  homogeneous("streamcluster_like", 106, 12, 12'000'000, 1.4);
  homogeneous("swaptions_like", 107, 6, 28'000'000, 0.3);

  heterogeneous("barnes_like", 201, 10, 16'000'000, 0.8, 1.35);
  {
    GeneratorParams g;
    g.name = "fluidanimate_like";
    g.category = Category::kHeterogeneous;
    g.seed = 202;
    g.n_phases = 10;
    g.phase_instr = 16'000'000;
    g.cpi_spread = 0.6;
    g.weight_ratio_max = 1.6;
    g.work_profile = WorkProfile::kSingleHot;
    g.hot_thread = 10;
    g.phase_noise = 0.04;
    out.push_back(g);
  }
  heterogeneous("lu_cont_like", 203, 12, 12'000'000, 0.6, 1.5);
  heterogeneous("lu_ncont_like", 204, 12, 12'000'000, 1.0, 1.45);
  heterogeneous("water_nsq_like", 205, 10, 18'000'000, 0.8, 1.3);
  heterogeneous("water_sp_like", 206, 10, 18'000'000, 0.6, 1.4);
  heterogeneous("bodytrack_like", 207, 12, 14'000'000, 1.0, 1.35);
  heterogeneous("kmeans_like", 208, 10, 16'000'000, 0.5, 1.5);
  return out;
}

GeneratorParams corpus_preset(const std::string& name) {
  for (auto& g : corpus_presets()) {
    if (g.name == name) return g;
  }
  throw std::invalid_argument("no corpus preset named '" + name + "'");
}

}  // namespace tpeq
