#include "ergodic/errors.hpp"
#include "ergodic/harness.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace ergodic {
namespace {

namespace fs = std::filesystem;

ScenarioConfig small_config() {
  return config_from_json(Json::parse(R"({
    "cloud": {"fixture": "grid", "nx": 15, "ny": 15, "spacing": 2.0},
    "target": {"type": "disks", "disks": [{"center": [14, 14, 0], "radius": 5, "mass": 1}]},
    "n_m": 30, "alpha": 10, "r_a": 4.0, "steps": 60, "seed": 3
  })"));
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ergodic_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(Config, ParsesDefaultsAndRoundTrips) {
  const ScenarioConfig c = small_config();
  EXPECT_EQ(c.n_modes, 30);
  EXPECT_EQ(c.agent_radius, 4.0);
  EXPECT_EQ(c.dt, 0.1);
  EXPECT_EQ(c.epsilon, 2.0);
  EXPECT_EQ(c.threshold, 0.05);
  EXPECT_EQ(c.solver, "spectral");
  ASSERT_EQ(c.target.disks.size(), 1u);
  const ScenarioConfig again = config_from_json(config_to_json(c));
  EXPECT_EQ(config_to_json(again), config_to_json(c));
}

TEST(Config, RejectsInvalidFields) {
  const Json base = config_to_json(small_config());
  const auto with = [&](const std::string& key, const Json& value) {
    Json j = base;
    j[key] = value;
    return j;
  };
  EXPECT_THROW((void)config_from_json(with("n_m", 0)), ConfigError);
  EXPECT_THROW((void)config_from_json(with("alpha", -1.0)), ConfigError);
  EXPECT_THROW((void)config_from_json(with("steps", 0)), ConfigError);
  EXPECT_THROW((void)config_from_json(with("v_max", 0.0)), ConfigError);
  EXPECT_THROW((void)config_from_json(with("solver", "magic")), ConfigError);
  EXPECT_THROW((void)config_from_json(with("decay", "linear")), ConfigError);
  EXPECT_THROW((void)config_from_json(with("n_m", "many")), ConfigError);
  EXPECT_THROW((void)config_from_json(with("unknown_field", 1)), ConfigError);
  Json no_cloud = base;
  no_cloud.erase("cloud");
  EXPECT_THROW((void)config_from_json(no_cloud), ConfigError);
  EXPECT_THROW((void)load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, Overrides) {
  const ScenarioConfig c = apply_overrides(small_config(), {"n_m=12", "alpha=2.5", "laplacian.k=10", "solver=implicit"});
  EXPECT_EQ(c.n_modes, 12);
  EXPECT_EQ(c.alpha, 2.5);
  EXPECT_EQ(c.laplacian.k, 10);
  EXPECT_EQ(c.solver, "implicit");
  EXPECT_THROW((void)apply_overrides(small_config(), {"n_m"}), ConfigError);
  EXPECT_THROW((void)apply_overrides(small_config(), {"bogus=1"}), ConfigError);
}

TEST(Grid, ExpandAndQuantile) {
  const auto cells = expand_grid("n_m=25,100;alpha=1,10,50");
  ASSERT_EQ(cells.size(), 6u);
  EXPECT_EQ(cells[0], (std::vector<std::string>{"n_m=25", "alpha=1"}));
  EXPECT_EQ(cells[5], (std::vector<std::string>{"n_m=100", "alpha=50"}));
  EXPECT_THROW((void)expand_grid("n_m"), ConfigError);
  EXPECT_EQ(quantile({3, 1, 2}, 0.5), 2.0);
  EXPECT_EQ(quantile({4, 1, 2, 3}, 0.5), 2.5);
  EXPECT_EQ(quantile({1, 2, 3, 4, 5}, 0.25), 2.0);
  EXPECT_THROW((void)quantile({}, 0.5), DomainError);
}

TEST(Scenario, CapOfOneGivesOneRecord) {
  ScenarioConfig c = small_config();
  c.steps = 1;
  const RunTrace t = run_scenario(c);
  EXPECT_EQ(t.records.size(), 1u);
  EXPECT_EQ(t.summary.steps, 1);
}

TEST(Scenario, TraceInvariantsAndPhaseAccounting) {
  const RunTrace t = run_scenario(small_config());
  ASSERT_FALSE(t.records.empty());
  EXPECT_EQ(static_cast<long>(t.records.size()), t.summary.steps);
  const double bound = t.target.norm() / t.target.sum();
  for (const TraceRecord& r : t.records) {
    EXPECT_GE(r.ergodicity, 0.0);
    EXPECT_LE(r.ergodicity, bound + 1e-12);
    EXPECT_LE(r.speed, 3.0 + 1e-9);
  }
  EXPECT_LT(t.summary.final_ergodicity, t.summary.initial_ergodicity);
  const RunSummary& s = t.summary;
  EXPECT_NEAR(s.preprocess_seconds + s.loop_seconds, s.total_seconds, 0.05 * s.total_seconds);
}

TEST(Scenario, UniformTargetEpsilonTrendsDown) {
  ScenarioConfig c = small_config();
  c.target.type = "uniform";
  c.steps = 100;
  c.threshold = 0.0;
  const RunTrace t = run_scenario(c);
  ASSERT_EQ(t.records.size(), 100u);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < 100; ++k) {
    const double x = static_cast<double>(k), y = t.records[k].ergodicity;
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double slope = (100 * sxy - sx * sy) / (100 * sxx - sx * sx);
  EXPECT_LT(slope, 0.0);
  for (std::size_t k = 10; k < 100; k += 10) {
    EXPECT_LT(t.records[k].ergodicity, t.records[k - 10].ergodicity) << k;
  }
}

TEST(Scenario, DeterministicTraces) {
  const ScenarioConfig c = small_config();
  const std::string a = trace_csv(run_scenario(c));
  const std::string b = trace_csv(run_scenario(c));
  EXPECT_EQ(a, b);
  ScenarioConfig other = c;
  other.seed = 4;
  EXPECT_NE(trace_csv(run_scenario(other)), a);
}

TEST(Sweep, IdenticalSeedsAndAggregationFromFiles) {
  ScenarioConfig base = small_config();
  base.steps = 30;
  const fs::path out = scratch("sweep");
  base.output = out.string();
  const auto cells = sweep(base, expand_grid("n_m=10,30"), {5, 6, 7}, 2);
  ASSERT_EQ(cells.size(), 2u);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    ASSERT_TRUE(cells[c].failures.empty());
    std::vector<double> from_files;
    for (std::uint64_t seed : {5, 6, 7}) {
      const fs::path dir = out / ("cell-" + std::to_string(c)) / ("seed-" + std::to_string(seed));
      from_files.push_back(Json::parse(slurp(dir / "summary.json")).at("final_ergodicity").get<double>());
    }
    EXPECT_EQ(from_files, cells[c].final_ergodicity);
    EXPECT_EQ(quantile(from_files, 0.5), cells[c].median);
    EXPECT_EQ(quantile(from_files, 0.25), cells[c].q1);
    EXPECT_EQ(quantile(from_files, 0.75), cells[c].q3);
  }

  base.output.clear();
  const auto same = sweep(base, {{}}, {9, 9, 9}, 3);
  ASSERT_EQ(same[0].final_ergodicity.size(), 3u);
  EXPECT_EQ(same[0].final_ergodicity[0], same[0].final_ergodicity[1]);
  EXPECT_EQ(same[0].final_ergodicity[1], same[0].final_ergodicity[2]);
  ScenarioConfig c9 = base;
  c9.seed = 9;
  EXPECT_EQ(run_scenario(c9).summary.final_ergodicity, same[0].final_ergodicity[0]);
  fs::remove_all(out);
}

TEST(Sweep, FailingCellIsRecordedAndOthersContinue) {
  ScenarioConfig base = small_config();
  base.steps = 5;
  const auto cells = sweep(base, expand_grid("n_m=10,100000"), {0, 1}, 1);
  EXPECT_EQ(cells[0].final_ergodicity.size(), 2u);
  EXPECT_TRUE(cells[1].final_ergodicity.empty());
  EXPECT_EQ(cells[1].failures.size(), 2u);
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(ERGODIC_CLI) + " " + args + " > /dev/null 2>&1").c_str());
  return WEXITSTATUS(status);
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("cli");
  fs::create_directories(dir);
  {
    std::ofstream(dir / "good.json") << config_to_json(apply_overrides(small_config(), {"steps=3"})).dump();
    std::ofstream(dir / "bad.json") << R"({"cloud": {"fixture": "grid"}, "n_m": 0})";
    std::ofstream(dir / "broken.json") << "{ not json";
    std::ofstream(dir / "missing_cloud.json") << R"({"cloud": "/nonexistent/cloud.csv", "target": {"type": "uniform"}})";
  }
  EXPECT_EQ(run_cli("simulate " + (dir / "good.json").string() + " -o " + (dir / "run").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "run" / "trace.csv"));
  EXPECT_EQ(run_cli("export " + (dir / "run").string() + " --format json"), 0);
  EXPECT_EQ(run_cli("export " + (dir / "run").string() + " --format csv"), 0);
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli("simulate " + (dir / "bad.json").string()), 2);
  EXPECT_EQ(run_cli("simulate " + (dir / "broken.json").string()), 2);
  EXPECT_EQ(run_cli("simulate " + (dir / "nothere.json").string()), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("simulate " + (dir / "good.json").string() + " --set n_m=-3"), 2);
  EXPECT_EQ(run_cli("simulate " + (dir / "missing_cloud.json").string()), 3);
  EXPECT_EQ(run_cli("control-demo --steps 20"), 0);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace ergodic
