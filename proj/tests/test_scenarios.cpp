#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "cohsrc/io.hpp"
#include "cohsrc/scenarios.hpp"

using namespace cohsrc;
namespace fs = std::filesystem;

namespace {

RunOptions options(const std::string& tag) {
  RunOptions o;
  o.out_dir = fs::temp_directory_path() / "cohsrc_test_scenarios" / tag;
  fs::remove_all(o.out_dir);
  return o;
}

const Check* find_check(const RunReport& r, const std::string& name) {
  for (const auto& c : r.checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

}  // namespace

TEST(Catalog, ContainsRequiredScenarios) {
  const auto names = list_scenarios();
  for (const char* n : {"fig4a", "fig4c", "fig2a_c", "fig2d_f", "interferogram_pair", "wien_sweep", "lowenergy_600eV"}) {
    EXPECT_NE(std::find(names.begin(), names.end(), n), names.end()) << n;
  }
  EXPECT_THROW(find_scenario("no_such_scenario"), ValidationError);
}

TEST(Catalog, EveryEntryValidates) {
  for (const auto& s : builtin_scenarios()) {
    EXPECT_TRUE(validate_scenario(s, ToolkitConfig{}).empty()) << s.name;
    EXPECT_GE(scenario_step_configs(s, ToolkitConfig{}).size(), 1u) << s.name;
  }
}

TEST(Run, Fig4aReportsTipEnergy) {
  const RunOptions o = options("fig4a");
  const RunReport r = run_scenario(find_scenario("fig4a"), o);
  ASSERT_EQ(r.steps.size(), 1u);
  ASSERT_FALSE(r.steps[0].error) << r.steps[0].error->message;
  EXPECT_NEAR(r.steps[0].outputs.at("terminal_energy_eV"), 1600.0, 0.1);
  EXPECT_TRUE(r.ok());
  EXPECT_EQ(r.schema_version, 1);
  EXPECT_EQ(r.toolkit_version, toolkit_version());

  const auto j = nlohmann::json::parse(std::ifstream(o.out_dir / "fig4a" / "report.json"));
  EXPECT_EQ(j["schema_version"], 1);
  EXPECT_EQ(j["steps"].size(), 1u);
}

TEST(Run, Fig2dRateRatioAndConstantSpacing) {
  const RunReport r = run_scenario(find_scenario("fig2d_f"), options("fig2d_f"));
  EXPECT_NEAR(r.derived.at("rate_ratio"), 33.0, 1.0);
  EXPECT_EQ(r.derived.at("s_relative_spread"), 0.0);
  ASSERT_NE(find_check(r, "fringe_count_constant"), nullptr);
  EXPECT_TRUE(find_check(r, "fringe_count_constant")->passed);
  EXPECT_TRUE(r.ok());
}

TEST(Run, DefaultConfigGivesOneStep) {
  const RunReport r = run_scenario(find_scenario("custom"), options("custom"));
  EXPECT_EQ(r.steps.size(), 1u);
  EXPECT_TRUE(r.ok());
}

TEST(Run, ConfigSweepDrivesSteps) {
  RunOptions o = options("custom_sweep");
  o.base.sweep.parameter = "voltages_u_c";
  o.base.sweep.values = {0.0, 150.0};
  const RunReport r = run_scenario(find_scenario("custom"), o);
  ASSERT_EQ(r.steps.size(), 2u);
  EXPECT_EQ(r.steps[1].outputs.at("u_c_V"), 150.0);
}

TEST(Run, StepErrorsAreRecordedAndFailFastStops) {
  Scenario s{"broken", "fan without a field", {Stage::kFan}, {{"trace_fan_angles_deg", "0"}},
             {{"a", {}}, {"b", {}}}, {}, false};
  const RunReport all = run_scenario(s, options("broken"));
  ASSERT_EQ(all.steps.size(), 2u);
  ASSERT_TRUE(all.steps[0].error);
  EXPECT_EQ(all.steps[0].error->kind, "PreconditionError");
  EXPECT_FALSE(all.ok());

  RunOptions o = options("broken_ff");
  o.fail_fast = true;
  const RunReport ff = run_scenario(s, o);
  EXPECT_EQ(ff.steps.size(), 1u);
  EXPECT_TRUE(ff.aborted);
}

TEST(Run, InvalidScenarioIsRejected) {
  Scenario s{"bad", "", {Stage::kEmission}, {{"geometry_tip_radius", "-1"}}, {}, {}, false};
  EXPECT_FALSE(validate_scenario(s, ToolkitConfig{}).empty());
  EXPECT_THROW(run_scenario(s, options("bad")), ValidationError);
}

TEST(Run, WienSweepReproducibleFromSeed) {
  RunOptions o = options("wien_a");
  o.seed = 42;
  const RunReport a = run_scenario(find_scenario("wien_sweep"), o);
  o.out_dir = options("wien_b").out_dir;
  const RunReport b = run_scenario(find_scenario("wien_sweep"), o);
  EXPECT_EQ(a.seed, 42u);
  EXPECT_EQ(a.derived, b.derived);
  for (std::size_t i = 0; i < a.steps.size(); ++i) EXPECT_EQ(a.steps[i].outputs, b.steps[i].outputs);
  EXPECT_TRUE(find_check(a, "coherence_consistent")->passed);
}

TEST(Run, EventCsvReanalysisIsExact) {
  const RunOptions o = options("pair");
  const RunReport r = run_scenario(find_scenario("interferogram_pair"), o);
  ASSERT_TRUE(r.ok());
  const fs::path dir = o.out_dir / "interferogram_pair";
  for (const auto& step : r.steps) {
    char prefix[32];
    std::snprintf(prefix, sizeof prefix, "step_%02zu_", step.index);
    const ParsedConfig cfg = load_config(dir / (std::string(prefix) + "config.cfg"));
    ASSERT_TRUE(cfg.violations.empty());
    const EventList events = read_events_csv(dir / (std::string(prefix) + "events.csv"), events_window(cfg.config),
                                             events_duration(cfg.config));
    const EventsAnalysis a = analyze_events(cfg.config, events);
    EXPECT_EQ(a.fit.params.contrast, step.outputs.at("c_raw"));
    EXPECT_EQ(a.g2->c_corrected, step.outputs.at("c_corrected"));
    EXPECT_EQ(a.g2->amplitude / 3.14159265358979323846, step.outputs.at("amplitude_pi"));
  }
}
