// Serial reference kernels against their OpenMP counterparts on the default
// synthetic scenario. Run with --benchmark_filter to pick kernels.

#include <benchmark/benchmark.h>

#include "cdrpm/conformance.hpp"
#include "cdrpm/discovery.hpp"
#include "cdrpm/event_log.hpp"
#include "cdrpm/synth.hpp"
#include "cdrpm/validation.hpp"

using namespace cdrpm;

namespace {

struct Fixture {
  Scenario scenario;
  TowerTable towers;
  RegionIndex regions;
  std::vector<PositionedEvent> positioned;
  std::vector<Staypoint> staypoints;
  TripSet trips;
  CaseLog log;
  PetriNet net;

  Fixture()
      : scenario(generate_scenario(ScenarioConfig{})),
        towers(make_tower_table(scenario.towers)),
        regions(scenario.regions),
        positioned(position_events(scenario.events, towers, scenario.regions)),
        staypoints(build_staypoints(positioned, StopParams{}, regions)),
        trips(build_trips(positioned, staypoints, ModeThresholds{}, kDefaultTripGapS)),
        log(build_case_log(trips.trips, staypoints, regions, RegionLevel::municipality).log),
        net(dfg_to_workflow_net(discover_dfg(log))) {
    // A larger log makes the per-trace kernels measurable.
    const CaseLog base = log;
    for (int copy = 1; copy < 20; ++copy) {
      for (auto t : base.traces) {
        t.case_id += "_" + std::to_string(copy);
        log.traces.push_back(std::move(t));
      }
    }
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_Position_Serial(benchmark::State& s) {
  const auto& f = fixture();
  for (auto _ : s) benchmark::DoNotOptimize(position_events_serial(f.scenario.events, f.towers, f.scenario.regions));
  s.SetItemsProcessed(s.iterations() * static_cast<std::int64_t>(f.scenario.events.size()));
}
void BM_Position_Parallel(benchmark::State& s) {
  const auto& f = fixture();
  for (auto _ : s) benchmark::DoNotOptimize(position_events(f.scenario.events, f.towers, f.scenario.regions));
  s.SetItemsProcessed(s.iterations() * static_cast<std::int64_t>(f.scenario.events.size()));
}

void BM_Stops_Serial(benchmark::State& s) {
  const auto& f = fixture();
  for (auto _ : s) benchmark::DoNotOptimize(detect_stops_all_serial(f.positioned, StopParams{}));
}
void BM_Stops_Parallel(benchmark::State& s) {
  const auto& f = fixture();
  for (auto _ : s) benchmark::DoNotOptimize(detect_stops_all(f.positioned, StopParams{}));
}

void BM_Trips_Serial(benchmark::State& s) {
  const auto& f = fixture();
  for (auto _ : s) benchmark::DoNotOptimize(build_trips_serial(f.positioned, f.staypoints, ModeThresholds{}, kDefaultTripGapS));
}
void BM_Trips_Parallel(benchmark::State& s) {
  const auto& f = fixture();
  for (auto _ : s) benchmark::DoNotOptimize(build_trips(f.positioned, f.staypoints, ModeThresholds{}, kDefaultTripGapS));
}

void BM_Dfg_Serial(benchmark::State& s) {
  const auto& f = fixture();
  for (auto _ : s) benchmark::DoNotOptimize(annotate_durations_serial(discover_dfg_serial(f.log), f.log));
  s.SetItemsProcessed(s.iterations() * static_cast<std::int64_t>(f.log.traces.size()));
}
void BM_Dfg_Parallel(benchmark::State& s) {
  const auto& f = fixture();
  for (auto _ : s) benchmark::DoNotOptimize(annotate_durations(discover_dfg(f.log), f.log));
  s.SetItemsProcessed(s.iterations() * static_cast<std::int64_t>(f.log.traces.size()));
}

void BM_Replay_Serial(benchmark::State& s) {
  const auto& f = fixture();
  for (auto _ : s) benchmark::DoNotOptimize(token_replay_serial(f.net, f.log));
  s.SetItemsProcessed(s.iterations() * static_cast<std::int64_t>(f.log.traces.size()));
}
void BM_Replay_Parallel(benchmark::State& s) {
  const auto& f = fixture();
  for (auto _ : s) benchmark::DoNotOptimize(token_replay(f.net, f.log));
  s.SetItemsProcessed(s.iterations() * static_cast<std::int64_t>(f.log.traces.size()));
}

void BM_Od_Serial(benchmark::State& s) {
  const auto& f = fixture();
  for (auto _ : s) {
    benchmark::DoNotOptimize(build_od_matrix(f.trips.trips, f.staypoints, f.regions, RegionLevel::municipality));
  }
}
void BM_Od_Parallel(benchmark::State& s) {
  const auto& f = fixture();
  for (auto _ : s) {
    benchmark::DoNotOptimize(build_od_matrix_parallel(f.trips.trips, f.staypoints, f.regions, RegionLevel::municipality));
  }
}

}  // namespace

BENCHMARK(BM_Position_Serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Position_Parallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Stops_Serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Stops_Parallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Trips_Serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Trips_Parallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Dfg_Serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Dfg_Parallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Replay_Serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Replay_Parallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Od_Serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Od_Parallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
