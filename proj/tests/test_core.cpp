#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>

#include "tpeq/errors.hpp"
#include "tpeq/text.hpp"
#include "tpeq/workload.hpp"
#include "tpeq/workload_gen.hpp"

using namespace tpeq;

namespace {

WorkloadSpec small_workload() {
  GeneratorParams p;
  p.name = "small";
  p.category = Category::kHeterogeneous;
  p.n_threads = 3;
  p.n_phases = 2;
  p.phase_instr = 1000;
  p.weight_ratio_max = 1.3;
  p.phase_noise = 0.04;
  p.seed = 11;
  return generate_workload(p, default_config_table());
}

std::string replace_line(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  text.replace(pos, from.size(), to);
  return text;
}

}  // namespace

TEST_CASE("default configuration table") {
  const ConfigTable t = default_config_table();
  REQUIRE(t.size() == 5);
  CHECK_NOTHROW(t.validate());

  const CoreConfig& c1 = t.at(1);
  CHECK(c1.dispatch_width == 1);
  CHECK(c1.rob_size == 16);
  CHECK(c1.int_alus == 1);
  CHECK(c1.anchor_ipc == 0.65);
  CHECK(c1.anchor_power_w == 3.93);

  const CoreConfig& c5 = t.at(5);
  CHECK(c5.dispatch_width == 4);
  CHECK(c5.rob_size == 128);
  CHECK(c5.int_alus == 6);
  CHECK(c5.anchor_ipc == 1.36);
  CHECK(c5.anchor_power_w == 6.69);

  const double expected_power[] = {3.93, 5.43, 5.56, 6.51, 6.69};
  for (int j = 1; j <= 5; ++j) {
    CHECK(t.at(j).index == j);
    CHECK(t.at(j).anchor_power_w == expected_power[j - 1]);
    CHECK(t.at(j).nominal_freq_hz == 3.5e9);
    if (j > 1) CHECK(t.at(j).anchor_power_w > t.at(j - 1).anchor_power_w);
  }
  CHECK_THROWS_AS(t.at(0), std::out_of_range);
  CHECK_THROWS_AS(t.at(6), std::out_of_range);
}

TEST_CASE("ground truth reproduces the calibration anchors") {
  const ConfigTable t = default_config_table();
  const CpiStack s = anchor_stack();
  for (int j = 1; j <= t.size(); ++j) {
    const auto& scale = t.at(j).scaling;
    CpiStack at_j{s.compute * scale[0], s.memory * scale[1], s.branch * scale[2], s.synch * scale[3]};
    CHECK(at_j.total() == doctest::Approx(t.at(j).anchor_cpi()).epsilon(1e-9));
    CHECK(t.at(j).truth_power(at_j.total()) == doctest::Approx(t.at(j).anchor_power_w).epsilon(1e-9));
  }
  CHECK(to_level_one(s, t) == s);
}

TEST_CASE("DVFS table") {
  const ConfigTable t = dvfs_config_table();
  CHECK(t.mode == AdaptationMode::kDvfs);
  CHECK_NOTHROW(t.validate());
  CHECK(t.at(1).nominal_freq_hz == 2.5e9);
  CHECK(t.at(t.size()).nominal_freq_hz == 3.5e9);
  CHECK(t.reference_freq_hz() == 3.5e9);
}

TEST_CASE("table validation rejects broken invariants") {
  ConfigTable t = default_config_table();
  std::swap(t.configs[1], t.configs[2]);
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);

  t = default_config_table();
  t.configs[2].rob_size = 0;
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);

  t = default_config_table();
  t.configs[3].anchor_power_w = t.configs[2].anchor_power_w;
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
}

TEST_CASE("CPI stack") {
  const CpiStack s{1.0, 0.5, 0.25, 0.125};
  CHECK(s.total() == 1.875);
  for (const double c : s.components()) CHECK(s.total() >= c);
  CHECK(CpiStack::from_components(s.components()) == s);
  CHECK(s.scaled(2.0).total() == 3.75);
  CHECK(s.valid());
  CHECK_FALSE(CpiStack{-0.1, 0, 0, 0}.valid());
  CHECK_FALSE(CpiStack{NAN, 0, 0, 0}.valid());
}

TEST_CASE("drift walk stays bounded and is reproducible") {
  const DriftParams d{0.2, 0.5, 99};
  DriftWalk walk(d);
  for (int e = 1; e <= 500; ++e) {
    walk.step();
    CHECK(walk.factor() >= 0.8 - 1e-15);
    CHECK(walk.factor() <= 1.2 + 1e-15);
    if (e % 97 == 0) CHECK(drift_factor(d, e) == walk.factor());
  }
  CHECK(drift_factor(d, 0) == 1.0);
  CHECK(drift_factor(DriftParams{0.0, 0.5, 1}, 40) == 1.0);
}

TEST_CASE("workload text round trip") {
  const WorkloadSpec w = small_workload();
  const std::string text = serialize_workload(w);
  const WorkloadSpec back = parse_workload(text);
  CHECK(back == w);
  CHECK(serialize_workload(back) == text);
  CHECK(workload_hash(back) == workload_hash(w));

  for (const Category c : {Category::kHomogeneous, Category::kHeterogeneous, Category::kThreadPool,
                           Category::kPipeline}) {
    CHECK(category_from_string(to_string(c)) == c);
  }
  CHECK_THROWS_AS(category_from_string("mapreduce-ish"), std::invalid_argument);
}

TEST_CASE("workload parse errors carry line numbers") {
  const std::string text = serialize_workload(small_workload());

  SUBCASE("bad header") {
    try {
      parse_workload("tpeq-workload v2\n" + text.substr(text.find('\n') + 1));
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 1);
    }
  }
  SUBCASE("malformed number") {
    const auto pos = text.find("instr: ");
    const auto line = static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(pos), '\n')) + 1;
    std::string bad = text;
    bad.replace(pos, 7, "instr: x");
    try {
      parse_workload(bad);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == line);
    }
  }
  SUBCASE("tampered content fails the hash check") {
    const auto pos = text.find("instr: ");
    const auto eol = text.find('\n', pos);
    std::string bad = text;
    bad.replace(pos, eol - pos, "instr: 12345");
    CHECK_THROWS_AS(parse_workload(bad), ParseError);
  }
  SUBCASE("truncated file") {
    CHECK_THROWS_AS(parse_workload(text.substr(0, text.size() / 2)), ParseError);
  }
  SUBCASE("unknown category") {
    CHECK_THROWS_AS(parse_workload(replace_line(text, "category: heterogeneous", "category: bogus")), ParseError);
  }
}

TEST_CASE("workload files") {
  const auto dir = std::filesystem::temp_directory_path() / "tpeq_test_core";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "w.tpw").string();
  const WorkloadSpec w = small_workload();
  save_workload(w, path);
  CHECK(load_workload(path) == w);
  CHECK_THROWS_AS(load_workload((dir / "missing.tpw").string()), std::runtime_error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("workload validation") {
  WorkloadSpec w = small_workload();
  w.threads[1][0].instr_count = 0;
  CHECK_THROWS_AS(w.validate(), std::invalid_argument);

  w = small_workload();
  w.threads[2].pop_back();
  CHECK_THROWS_AS(w.validate(), std::invalid_argument);

  w = small_workload();
  w.threads[0][1].drift.amplitude = 1.0;
  CHECK_THROWS_AS(w.validate(), std::invalid_argument);
}

TEST_CASE("generator") {
  const ConfigTable table = default_config_table();

  SUBCASE("same seed, same bytes") {
    for (const auto& p : corpus_presets()) {
      CHECK(serialize_workload(generate_workload(p, table)) == serialize_workload(generate_workload(p, table)));
    }
    GeneratorParams a;
    GeneratorParams b;
    b.seed = a.seed + 1;
    CHECK(workload_hash(generate_workload(a, table)) != workload_hash(generate_workload(b, table)));
  }

  SUBCASE("homogeneous threads share per-phase counts") {
    GeneratorParams p;
    p.category = Category::kHomogeneous;
    p.n_threads = 16;
    const WorkloadSpec w = generate_workload(p, table);
    REQUIRE(w.n_threads() == 16);
    for (int ph = 0; ph < w.n_phases(); ++ph) {
      for (int t = 1; t < 16; ++t) CHECK(w.threads[t][ph].instr_count == w.threads[0][ph].instr_count);
    }
    // CPI heterogeneity is present.
    double lo = 1e9;
    double hi = 0;
    for (int t = 0; t < 16; ++t) {
      lo = std::min(lo, w.threads[t][0].base_stack.total());
      hi = std::max(hi, w.threads[t][0].base_stack.total());
    }
    CHECK(hi / lo > 1.2);
  }

  SUBCASE("heterogeneous ratio 1.15") {
    GeneratorParams p;
    p.category = Category::kHeterogeneous;
    p.n_threads = 16;
    p.weight_ratio_max = 1.15;
    p.phase_noise = 0.04;
    const WorkloadSpec w = generate_workload(p, table);
    std::int64_t lo = INT64_MAX;
    std::int64_t hi = 0;
    for (int t = 0; t < 16; ++t) {
      lo = std::min(lo, w.total_instructions(t));
      hi = std::max(hi, w.total_instructions(t));
    }
    CHECK(static_cast<double>(hi) / static_cast<double>(lo) == doctest::Approx(1.15).epsilon(0.05));
  }

  SUBCASE("ground truth CPI decreases with the level") {
    for (const auto& p : corpus_presets()) {
      const WorkloadSpec w = generate_workload(p, table);
      for (const auto& thread : w.threads) {
        for (const auto& ph : thread) {
          for (int j = 2; j <= w.n_configs(); ++j) CHECK(ph.cpi_at(j) <= ph.cpi_at(j - 1));
        }
      }
    }
  }

  SUBCASE("queue categories") {
    GeneratorParams p;
    p.category = Category::kPipeline;
    p.n_threads = 4;
    p.n_stages = 2;
    CHECK_NOTHROW(generate_workload(p, table).validate());
    p.n_stages = 5;
    CHECK_THROWS_AS(generate_workload(p, table), std::invalid_argument);
    p.category = Category::kThreadPool;
    p.n_stages = 1;
    CHECK(generate_workload(p, table).category == Category::kThreadPool);
  }

  SUBCASE("parameter validation") {
    GeneratorParams p;
    p.n_threads = 0;
    CHECK_THROWS_AS(generate_workload(p, table), std::invalid_argument);
    p = GeneratorParams{};
    p.category = Category::kHomogeneous;
    p.weight_ratio_max = 1.5;
    CHECK_THROWS_AS(generate_workload(p, table), std::invalid_argument);
    p = GeneratorParams{};
    p.drift_amplitude = 1.5;
    CHECK_THROWS_AS(generate_workload(p, table), std::invalid_argument);
    CHECK_THROWS_AS(corpus_preset("no_such_preset"), std::invalid_argument);
  }
}

TEST_CASE("corpus presets") {
  const auto presets = corpus_presets();
  REQUIRE(presets.size() == 15);
  int homogeneous = 0;
  int heterogeneous = 0;
  for (const auto& p : presets) {
    CHECK(p.n_threads == 16);
    if (p.category == Category::kHomogeneous) ++homogeneous;
    if (p.category == Category::kHeterogeneous) ++heterogeneous;
  }
  CHECK(homogeneous == 7);
  CHECK(heterogeneous == 8);
}

TEST_CASE("checked-in corpus matches the generator byte for byte") {
  const ConfigTable table = default_config_table();
  for (const auto& p : corpus_presets()) {
    const std::string path = std::string(TPEQ_CORPUS_DIR) + "/" + p.name + ".tpw";
    REQUIRE_MESSAGE(std::filesystem::exists(path), path);
    CHECK_MESSAGE(text::read_file(path) == serialize_workload(generate_workload(p, table)), p.name);
  }
}

TEST_CASE("text helpers") {
  for (const double v : {0.1, 1.0 / 3.0, 6.69, 1e-300, 3.5e9, -2.25}) {
    CHECK(text::parse_real(text::format_real(v), 1) == v);
  }
  CHECK_THROWS_AS(text::parse_real("1.5x", 7), ParseError);
  CHECK_THROWS_AS(text::parse_int("", 3), ParseError);
  CHECK(text::parse_int("-42", 1) == -42);
  CHECK(text::split_ws("  a  b\tc ").size() == 3);
  CHECK(text::split("a,,b", ',').size() == 3);
  CHECK(text::trim("  x ") == "x");
  CHECK(text::hex64(0xabcULL) == "0000000000000abc");
}
