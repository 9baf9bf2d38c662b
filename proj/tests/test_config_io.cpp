#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "cohsrc/config.hpp"
#include "cohsrc/io.hpp"

using namespace cohsrc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "cohsrc_test_config_io";
  fs::create_directories(dir);
  return dir / name;
}

bool names_key(const std::vector<Violation>& v, const std::string& key) {
  for (const auto& x : v) {
    if (x.key == key) return true;
  }
  return false;
}

}  // namespace

TEST(Config, ShippedDefaultHasNoViolations) {
  const ParsedConfig parsed = load_config(fs::path(COHSRC_SOURCE_DIR) / "configs" / "default.cfg");
  EXPECT_TRUE(parsed.violations.empty());
  EXPECT_EQ(render_config(parsed.config), render_config(ToolkitConfig{}));
}

TEST(Config, RenderRoundTrips) {
  ToolkitConfig c;
  c.voltages.u_sat = -612.25;
  c.trace.fan_angles_deg = {0, 12.5, 90};
  c.sweep.parameter = "voltages_u_c";
  c.sweep.values = {-119.7, 199.7};
  c.emission.drive = FnDrive::kTipVoltage;
  const ParsedConfig back = parse_config(render_config(c));
  EXPECT_TRUE(back.violations.empty());
  EXPECT_EQ(render_config(back.config), render_config(c));
  EXPECT_EQ(back.config.voltages.u_sat, -612.25);
}

TEST(Config, NegativeTipRadiusIsOneViolation) {
  const ParsedConfig p = parse_config("geometry_tip_radius = -2e-6\n");
  ASSERT_EQ(p.violations.size(), 1u);
  EXPECT_EQ(p.violations[0].key, "geometry_tip_radius");
}

TEST(Config, UnorderedAperturesViolation) {
  const ParsedConfig p = parse_config("geometry_aperture1_x = 5e-3\ngeometry_aperture2_x = 3e-3\n");
  EXPECT_TRUE(names_key(p.violations, "geometry_aperture2_x"));
}

TEST(Config, UnknownKeyAndBadValue) {
  const ParsedConfig p = parse_config("bogus_key = 1\nvoltages_u_sat = abc\n# comment\n\n");
  EXPECT_TRUE(names_key(p.violations, "bogus_key"));
  EXPECT_TRUE(names_key(p.violations, "voltages_u_sat"));
}

TEST(Config, MalformedLineThrows) {
  EXPECT_THROW(parse_config("just some words\n"), ConfigParseError);
  EXPECT_THROW(load_config(scratch("does_not_exist.cfg")), ConfigParseError);
}

TEST(Config, SweepValues) {
  SweepConfig s;
  EXPECT_TRUE(sweep_values(s).empty());
  s.parameter = "voltages_u_c";
  s.start = 0.0;
  s.stop = 100.0;
  s.steps = 5;
  const auto v = sweep_values(s);
  ASSERT_EQ(v.size(), 5u);
  EXPECT_DOUBLE_EQ(v[2], 50.0);
  EXPECT_DOUBLE_EQ(v.back(), 100.0);
}

TEST(Config, SweepParameterMustExist) {
  EXPECT_TRUE(names_key(parse_config("sweep_parameter = nope\n").violations, "sweep_parameter"));
}

TEST(Config, DerivedHelpers) {
  ToolkitConfig c;
  c.voltages.u_sat = -600.0;
  c.beam.magnification = 9698.0;
  const BeamParams b = beam_for(c);
  EXPECT_NEAR(b.s0, 928e-9, 1e-12);
  const FringeParams p = pattern_for(c, b);
  EXPECT_EQ(p.spacing, b.s);
  EXPECT_EQ(p.envelope_width, 12.0 * b.s);
  EXPECT_EQ(frequency_grid(c).size(), 21u);
  EXPECT_DOUBLE_EQ(events_duration(c), 300.0);
}

TEST(Csv, EventsRoundTrip) {
  FringeParams p;
  p.contrast = 0.5;
  p.spacing = 2e-3;
  p.envelope_width = 24e-3;
  const EventList e = generate_events(p, {1.0, 50.0, 0.0}, 1000.0, 5.0, 4);
  const auto path = scratch("events.csv");
  write_events_csv(path, e);
  const EventList back = read_events_csv(path, e.window, e.duration);
  ASSERT_EQ(back.events.size(), e.events.size());
  write_events_csv(scratch("events2.csv"), back);
  const EventList again = read_events_csv(scratch("events2.csv"), e.window, e.duration);
  for (std::size_t i = 0; i < back.events.size(); ++i) {
    ASSERT_NEAR(back.events[i].x, again.events[i].x, 1e-15);
    ASSERT_NEAR(back.events[i].t, again.events[i].t, 1e-15 * e.duration);
    ASSERT_NEAR(back.events[i].x, e.events[i].x, 1e-15);
    ASSERT_NEAR(back.events[i].t, e.events[i].t, 1e-15 * e.duration);
  }
  const CsvTable t = read_csv(path);
  EXPECT_EQ(t.header, (std::vector<std::string>{"t_ns", "x_mm", "y_mm"}));
}

TEST(Csv, HistogramAcceptsShortHeader) {
  const auto path = scratch("hist.csv");
  std::ofstream(path) << "bin_center,counts\n0.001,5\n0.002,7\n";
  const Histogram h = read_histogram_csv(path);
  ASSERT_EQ(h.counts.size(), 2u);
  EXPECT_EQ(h.counts[1], 7.0);
}

TEST(Csv, WienRoundTrip) {
  const std::vector<WienPoint> pts{{-99.0, 0.01, 0.01}, {0.0, 0.3, 0.01}, {72.0, 0.1, 0.02}};
  write_wien_csv(scratch("wien.csv"), pts);
  const auto back = read_wien_csv(scratch("wien.csv"));
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[2].u_wf, 72.0);
  EXPECT_EQ(back[2].sigma, 0.02);
}

TEST(Csv, BadNumberIsValidationError) {
  const auto path = scratch("bad.csv");
  std::ofstream(path) << "phi_V,rate_Hz\n1500,abc\n";
  EXPECT_THROW(read_fn_points_csv(path), ValidationError);
  std::ofstream(path) << "phi_V\n1500\n";
  EXPECT_THROW(read_fn_points_csv(path), ValidationError);
}
