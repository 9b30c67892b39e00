#include <map>

#include "cdrpm/error.hpp"
#include "cdrpm/trips.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cdrpm;
using namespace testsupport;

namespace {

Staypoint sp(std::string id, std::string loc, GeoPoint at, Timestamp t0, Timestamp t1) {
  Staypoint s;
  s.staypoint_id = std::move(id);
  s.user_id = "u";
  s.location_id = std::move(loc);
  s.median = at;
  s.t_start = t0;
  s.t_end = t1;
  return s;
}

Tripleg leg(std::string id, std::string from, std::string to, Timestamp t0, Timestamp t1) {
  Tripleg l;
  l.tripleg_id = std::move(id);
  l.user_id = "u";
  l.origin_staypoint = std::move(from);
  l.dest_staypoint = std::move(to);
  l.t_start = t0;
  l.t_end = t1;
  return l;
}

}  // namespace

TEST_SUITE("trips") {
  TEST_CASE("one leg between two places with its path length") {
    const GeoPoint a{38.70, -9.30};
    const GeoPoint m1 = destination_point(a, 10, 700), m2 = destination_point(m1, 80, 900),
                   m3 = destination_point(m2, 150, 600), b = destination_point(m3, 90, 800);
    const std::vector<Staypoint> sps{sp("s1", "L0", a, 0, 1000), sp("s2", "L1", b, 3000, 4000)};
    const std::vector<PositionedEvent> moving{{"u", 1500, "c", m1}, {"u", 2000, "c", m2}, {"u", 2500, "c", m3}};
    const auto legs = derive_triplegs(sps, moving);
    REQUIRE(legs.size() == 1);
    const double chain = haversine_distance(a, m1) + haversine_distance(m1, m2) + haversine_distance(m2, m3) +
                         haversine_distance(m3, b);
    CHECK(legs[0].path_length_m == doctest::Approx(chain).epsilon(1e-12));
    CHECK(legs[0].t_start == 1000);
    CHECK(legs[0].t_end == 3000);
    CHECK(legs[0].avg_speed_kmh == doctest::Approx(chain / 2000.0 * 3.6));
  }

  TEST_CASE("same place without movement gives no leg") {
    const std::vector<Staypoint> sps{sp("s1", "L0", {38.7, -9.3}, 0, 1000), sp("s2", "L0", {38.7, -9.3}, 3000, 4000)};
    CHECK(derive_triplegs(sps, {}).empty());
  }

  TEST_CASE("same place with movement between gives a leg") {
    const std::vector<Staypoint> sps{sp("s1", "L0", {38.7, -9.3}, 0, 1000), sp("s2", "L0", {38.7, -9.3}, 3000, 4000)};
    const std::vector<PositionedEvent> moving{{"u", 2000, "c", {38.72, -9.3}}};
    CHECK(derive_triplegs(sps, moving).size() == 1);
  }

  TEST_CASE("three places give two chained legs") {
    const std::vector<Staypoint> sps{sp("s1", "L0", {38.70, -9.3}, 0, 1000), sp("s2", "L1", {38.72, -9.3}, 2000, 3000),
                                     sp("s3", "L2", {38.74, -9.3}, 4000, 5000)};
    const auto legs = derive_triplegs(sps, {});
    REQUIRE(legs.size() == 2);
    CHECK(legs[0].dest_staypoint == legs[1].origin_staypoint);
  }

  TEST_CASE("moving events are those strictly between staypoints") {
    const std::vector<Staypoint> sps{sp("s1", "L0", {38.70, -9.3}, 0, 1000), sp("s2", "L1", {38.72, -9.3}, 2000, 3000)};
    const std::vector<PositionedEvent> events{{"u", 0, "c", {}},    {"u", 1000, "c", {}}, {"u", 1500, "c", {}},
                                              {"u", 2000, "c", {}}, {"u", 2500, "c", {}}, {"u", 3500, "c", {}}};
    const auto m = moving_events(events, sps);
    REQUIRE(m.size() == 1);
    CHECK(m[0].timestamp == 1500);
  }

  TEST_CASE("short idle gap merges legs into one trip") {
    const std::vector<Tripleg> legs{leg("a", "s1", "s2", 0, 600), leg("b", "s2", "s3", 900, 1500)};
    const auto trips = assemble_trips(legs, 15 * 60);
    REQUIRE(trips.size() == 1);
    CHECK(trips[0].triplegs.size() == 2);
    CHECK(trips[0].origin == "s1");
    CHECK(trips[0].destination == "s3");
    CHECK(trips[0].t_start == 0);
    CHECK(trips[0].t_end == 1500);
  }

  TEST_CASE("long idle gap starts a new trip") {
    const std::vector<Tripleg> legs{leg("a", "s1", "s2", 0, 600), leg("b", "s2", "s3", 600 + 7200, 9000)};
    CHECK(assemble_trips(legs, 15 * 60).size() == 2);
  }

  TEST_CASE("single leg is its own trip") {
    const std::vector<Tripleg> legs{leg("a", "s1", "s2", 0, 600)};
    const auto trips = assemble_trips(legs, 900);
    REQUIRE(trips.size() == 1);
    CHECK(trips[0].origin == "s1");
    CHECK(trips[0].destination == "s2");
    CHECK(trips[0].triplegs[0] == legs[0]);
  }

  TEST_CASE("mode table") {
    const ModeThresholds t;
    CHECK(t.classify(4, 500) == Mode::walk);
    CHECK(t.classify(70, 12000) == Mode::train);
    CHECK(t.classify(22, 6000) == Mode::bus);
    CHECK(t.classify(10, 3000) == Mode::bicycle);
    CHECK(t.classify(35, 2000) == Mode::bus);
    CHECK(t.classify(35, 5000) == Mode::car);
    CHECK(t.classify(50, 5000) == Mode::car);
    CHECK(t.classify(50, 9000) == Mode::train);
    CHECK(t.classify(59.9, 7999) == Mode::car);
    CHECK(t.classify(60, 100) == Mode::train);
    // Every (speed, length) pair gets exactly one travel mode.
    for (double s = 0.5; s < 150; s += 0.5) {
      for (double l = 100; l < 20000; l += 250) CHECK(t.classify(s, l) != Mode::unknown);
    }
  }

  TEST_CASE("legs under a minute are unknown") {
    Tripleg l = leg("a", "s1", "s2", 0, 59);
    l.path_length_m = 100;
    l.avg_speed_kmh = 100.0 / 59 * 3.6;
    CHECK(label_mode(l, ModeThresholds{}) == Mode::unknown);
    l.t_end = 60;
    l.avg_speed_kmh = 6;
    CHECK(label_mode(l, ModeThresholds{}) == Mode::walk);
  }

  TEST_CASE("threshold table must be ordered") {
    ModeThresholds t;
    t.bicycle_max_kmh = 5;
    CHECK_THROWS_AS(t.validate(), Error);
  }

  TEST_CASE("mode names") {
    for (Mode m : kAllModes) CHECK(parse_mode(to_string(m)) == m);
    CHECK(display_name(Mode::bus) == "Bus");
    CHECK(parse_mode("Bus") == Mode::bus);
    CHECK_THROWS_AS(parse_mode("hovercraft"), Error);
  }

  TEST_CASE("pipeline output partitions legs into chained trips") {
    const Scenario sc = generate_scenario(small_scenario(8, 3, 17));
    const auto pos = position_events(sc.events, make_tower_table(sc.towers), sc.regions);
    const auto sps = build_staypoints(pos, StopParams{}, RegionIndex(sc.regions));
    const TripSet set = build_trips(pos, sps, ModeThresholds{}, kDefaultTripGapS);
    CHECK(set.trips == build_trips_serial(pos, sps, ModeThresholds{}, kDefaultTripGapS).trips);

    std::size_t legs = 0;
    std::set<std::string> seen;
    for (const auto& t : set.trips) {
      legs += t.triplegs.size();
      REQUIRE_FALSE(t.triplegs.empty());
      CHECK(t.origin == t.triplegs.front().origin_staypoint);
      CHECK(t.destination == t.triplegs.back().dest_staypoint);
      for (std::size_t i = 0; i < t.triplegs.size(); ++i) {
        CHECK(seen.insert(t.triplegs[i].tripleg_id).second);
        CHECK(t.triplegs[i].t_end > t.triplegs[i].t_start);
        if (i > 0) CHECK(t.triplegs[i - 1].dest_staypoint == t.triplegs[i].origin_staypoint);
      }
      // Re-assembling a trip's own legs reproduces it.
      const auto again = assemble_trips(t.triplegs, kDefaultTripGapS);
      REQUIRE(again.size() == 1);
      CHECK(again[0].triplegs == t.triplegs);
      CHECK(again[0].origin == t.origin);
      CHECK(again[0].destination == t.destination);
    }
    CHECK(legs == set.triplegs.size());
  }

  TEST_CASE("planted modes are recovered exactly") {
    ScenarioConfig c = small_scenario(20, 4, 23);
    const Scenario sc = generate_scenario(c);
    const auto pos = position_events(sc.events, make_tower_table(sc.towers), sc.regions);
    const auto sps = build_staypoints(pos, StopParams{}, RegionIndex(sc.regions));
    const TripSet set = build_trips(pos, sps, c.thresholds, kDefaultTripGapS);
    const RecoveryReport r = score_recovery(sc.truth, sps, set.trips, StopParams{}.r1_m);
    CHECK(r.matched_legs > 0);
    CHECK(r.mode_accuracy == 1.0);
  }

  TEST_CASE("trip files round-trip") {
    const Scenario sc = generate_scenario(small_scenario(3, 2, 5));
    const auto pos = position_events(sc.events, make_tower_table(sc.towers), sc.regions);
    const auto sps = build_staypoints(pos, StopParams{}, RegionIndex(sc.regions));
    const TripSet set = build_trips(pos, sps, ModeThresholds{}, kDefaultTripGapS);
    const auto dir = std::filesystem::temp_directory_path() / "cdrpm_trip_io";
    std::filesystem::create_directories(dir);
    write_file(dir / "trips.csv", write_trips(set.trips));
    write_file(dir / "legs.csv", write_triplegs(set.trips));
    const auto back = read_trips(dir / "trips.csv", dir / "legs.csv");
    CHECK(write_trips(back) == write_trips(set.trips));
    CHECK(write_triplegs(back) == write_triplegs(set.trips));
    const std::string text = write_trips(set.trips);
    CHECK(text.rfind("trip_id,user_id,origin_sp,dest_sp,t_start,t_end,n_legs,primary_mode,heuristic\n", 0) == 0);
    CHECK(text.find(",true\n") != std::string::npos);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("primary mode follows the longest leg") {
    Trip t;
    Tripleg a = leg("a", "s1", "s2", 0, 600), b = leg("b", "s2", "s3", 900, 1500);
    a.path_length_m = 500;
    a.mode = Mode::walk;
    b.path_length_m = 5000;
    b.mode = Mode::bus;
    t.triplegs = {a, b};
    CHECK(t.primary_mode() == Mode::bus);
  }
}
