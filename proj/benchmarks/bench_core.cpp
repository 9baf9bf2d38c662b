#include <benchmark/benchmark.h>

#include <vector>

#include "cohsrc/beam_optics.hpp"
#include "cohsrc/events_correlation.hpp"
#include "cohsrc/geometry_fields.hpp"
#include "cohsrc/trajectories.hpp"

using namespace cohsrc;

namespace {

const Geometry& geometry() {
  static const Geometry g = build_geometry(GeometryConfig{});
  return g;
}

const PotentialGrid& grid() {
  static const PotentialGrid p = solve_laplace(geometry(), {-1600.0, 200.0, 0.0});
  return p;
}

FringeParams pattern() {
  FringeParams p;
  p.contrast = 0.535;
  p.spacing = 2.45e-3;
  p.phi0 = 0.3;
  p.envelope_width = 12.0 * p.spacing;
  return p;
}

void BM_LaplaceSolve(benchmark::State& state) {
  GeometryConfig c;
  c.grid_spacing = static_cast<double>(state.range(0)) * 1e-6;
  const Geometry g = build_geometry(c);
  for (auto _ : state) benchmark::DoNotOptimize(solve_laplace(g, {-1600.0, 200.0, 0.0}).stats().iterations);
}
BENCHMARK(BM_LaplaceSolve)->Arg(50)->Arg(25)->Unit(benchmark::kMillisecond);

void BM_ApexTrace(benchmark::State& state) {
  TraceOptions o;
  o.transmit_x = geometry().transmit_plane_x();
  o.store_every = 1000;
  for (auto _ : state) {
    benchmark::DoNotOptimize(integrate_trajectory(grid(), {0.0, geometry().apex_launch_point(), {0.0, 0.0}}, o));
  }
}
BENCHMARK(BM_ApexTrace)->Unit(benchmark::kMillisecond);

void BM_FieldLookup(benchmark::State& state) {
  double x = 2e-3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(field_at(grid(), {x, 1e-4}));
    x = x < 1.5e-2 ? x + 1.3e-6 : 2e-3;
  }
}
BENCHMARK(BM_FieldLookup);

void BM_FringeFit(benchmark::State& state) {
  const EventList e = generate_events(pattern(), {}, 1000.0, 300.0, 1);
  const auto bins = static_cast<std::size_t>((e.window.x_max - e.window.x_min) / 2.45e-3 * 10.0);
  for (auto _ : state) benchmark::DoNotOptimize(histogram_contrast(e, bins));
}
BENCHMARK(BM_FringeFit)->Unit(benchmark::kMillisecond);

void BM_G2(benchmark::State& state) {
  const EventList e = generate_events(pattern(), {0.4 * 3.14159265358979323846, 50.0, 0.0}, 1000.0,
                                      static_cast<double>(state.range(0)), 1);
  std::vector<double> grid;
  for (int f = 40; f <= 60; ++f) grid.push_back(f);
  for (auto _ : state) benchmark::DoNotOptimize(g2_contrast(e, 2.45e-3, grid));
  state.counters["events"] = static_cast<double>(e.events.size());
}
BENCHMARK(BM_G2)->Arg(60)->Arg(300)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
