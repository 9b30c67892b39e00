#include <map>

#include "cdrpm/error.hpp"
#include "cdrpm/stays.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cdrpm;
using namespace testsupport;

namespace {

std::vector<PositionedEvent> dwell(const std::string& user, GeoPoint at, Timestamp t0, int n, Timestamp step) {
  std::vector<PositionedEvent> out;
  for (int i = 0; i < n; ++i) out.push_back({user, t0 + i * step, "c", at});
  return out;
}

Stop stop_at(GeoPoint p, Timestamp t, std::string user = "u") { return Stop{std::move(user), p, t, t + 600, 2, 0}; }

}  // namespace

TEST_SUITE("stays") {
  TEST_CASE("pure dwell is one stop") {
    StopParams p;
    const auto trace = dwell("u", {38.7, -9.3}, 0, 10, 200);  // 30 minutes
    const auto stops = detect_stops(trace, p);
    REQUIRE(stops.size() == 1);
    CHECK(stops[0].n_events == 10);
    CHECK(stops[0].t_start == 0);
    CHECK(stops[0].t_end == 1800);
  }

  TEST_CASE("pure motion yields no stop") {
    StopParams p;
    p.r1_m = 50;
    std::vector<PositionedEvent> trace;
    for (int i = 0; i < 60; ++i) trace.push_back({"u", i * 60, "c", destination_point({38.7, -9.3}, 90, 1000.0 * i)});
    CHECK(detect_stops(trace, p).empty());
  }

  TEST_CASE("two planted dwells joined by motion") {
    StopParams p;
    Rng rng(3);
    const GeoPoint a{38.70, -9.30};
    const GeoPoint b = destination_point(a, 60, 5000);
    std::vector<PositionedEvent> trace;
    std::vector<GeoPoint> pa, pb;
    Timestamp t = 0;
    for (int i = 0; i < 12; ++i, t += 100) {
      pa.push_back(destination_point(a, rng.uniform(0, 360), rng.uniform(0, 100)));
      trace.push_back({"u", t, "c", pa.back()});
    }
    for (int i = 1; i < 5; ++i, t += 100) trace.push_back({"u", t, "c", destination_point(a, 60, 1000.0 * i)});
    for (int i = 0; i < 12; ++i, t += 100) {
      pb.push_back(destination_point(b, rng.uniform(0, 360), rng.uniform(0, 100)));
      trace.push_back({"u", t, "c", pb.back()});
    }
    const auto stops = detect_stops(trace, p);
    REQUIRE(stops.size() == 2);
    CHECK(stops[0].n_events == 12);
    CHECK(stops[1].n_events == 12);
    CHECK(haversine_distance(stops[0].median, componentwise_median(pa)) <= 1e-6);
    CHECK(haversine_distance(stops[1].median, componentwise_median(pb)) <= 1e-6);
    CHECK(haversine_distance(stops[0].median, a) <= p.r1_m);
    CHECK(haversine_distance(stops[1].median, b) <= p.r1_m);
  }

  TEST_CASE("a silence longer than max_gap splits a dwell") {
    StopParams p;
    auto trace = dwell("u", {38.7, -9.3}, 0, 5, 300);
    const auto later = dwell("u", {38.7, -9.3}, 1200 + 7200, 5, 300);
    trace.insert(trace.end(), later.begin(), later.end());
    CHECK(detect_stops(trace, p).size() == 2);
  }

  TEST_CASE("short dwell is discarded") {
    StopParams p;
    CHECK(detect_stops(dwell("u", {38.7, -9.3}, 0, 5, 60), p).empty());
  }

  TEST_CASE("empty input gives empty output") {
    StopParams p;
    CHECK(detect_stops({}, p).empty());
    CHECK(detect_stops_all({}, p).empty());
    CHECK(cluster_destinations({}, 100).empty());
  }

  TEST_CASE("unsorted input is rejected") {
    StopParams p;
    auto trace = dwell("u", {38.7, -9.3}, 0, 5, 300);
    std::swap(trace[1], trace[3]);
    try {
      detect_stops(trace, p);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::unsorted_input);
    }
  }

  TEST_CASE("median of even counts averages the middle pair") {
    const std::vector<GeoPoint> pts{{1, 10}, {3, 30}, {2, 20}, {4, 40}};
    const GeoPoint m = componentwise_median(pts);
    CHECK(m.lat == doctest::Approx(2.5));
    CHECK(m.lon == doctest::Approx(25));
  }

  TEST_CASE("destination labels") {
    const GeoPoint a{38.7, -9.3};
    SUBCASE("close stops share a label") {
      const std::vector<Stop> s{stop_at(a, 0), stop_at(destination_point(a, 0, 10), 1000)};
      const auto l = cluster_destinations(s, 100);
      CHECK(l[0] == l[1]);
    }
    SUBCASE("distant stops do not") {
      const std::vector<Stop> s{stop_at(a, 0), stop_at(destination_point(a, 0, 1000), 1000)};
      const auto l = cluster_destinations(s, 100);
      CHECK(l[0] != l[1]);
    }
    SUBCASE("chains link transitively") {
      const GeoPoint b = destination_point(a, 90, 80), c = destination_point(b, 90, 80);
      const std::vector<Stop> s{stop_at(a, 0), stop_at(b, 1000), stop_at(c, 2000)};
      const auto l = cluster_destinations(s, 100);
      CHECK(l[0] == l[1]);
      CHECK(l[1] == l[2]);
      CHECK(haversine_distance(a, c) > 100);
    }
    SUBCASE("labels are numbered by first appearance in time") {
      const std::vector<Stop> s{stop_at(destination_point(a, 0, 5000), 50), stop_at(a, 10),
                                stop_at(destination_point(a, 0, 5000), 5)};
      const auto l = cluster_destinations(s, 100);
      CHECK(l[2] == "L0");
      CHECK(l[0] == "L0");
      CHECK(l[1] == "L1");
    }
  }

  TEST_CASE("grid labelling equals all-pairs components") {
    Rng rng(21);
    for (int round = 0; round < 6; ++round) {
      const std::size_t n = 50 + rng.index(950);
      std::vector<Stop> stops;
      std::vector<GeoPoint> pts;
      const double spread = rng.uniform(0.005, 0.1);
      for (std::size_t i = 0; i < n; ++i) {
        pts.push_back({38.7 + rng.uniform(-spread, spread), -9.3 + rng.uniform(-spread, spread)});
        stops.push_back(stop_at(pts.back(), static_cast<Timestamp>(rng.index(100000)), "u" + std::to_string(i % 9)));
      }
      const double r2 = rng.uniform(50, 600);
      const auto labels = cluster_destinations(stops, r2);
      std::map<std::string, std::set<std::size_t>> groups;
      for (std::size_t i = 0; i < n; ++i) groups[labels[i]].insert(i);
      std::set<std::set<std::size_t>> got;
      for (auto& [k, g] : groups) got.insert(g);
      CHECK(got == brute_components(pts, r2));
      CHECK(labels == cluster_destinations(stops, r2, BruteForceThresholdLabeler{}));
    }
  }

  TEST_CASE("grid labelling near the antimeridian and the pole") {
    Rng rng(8);
    for (const GeoPoint centre : {GeoPoint{10, 179.999}, GeoPoint{89.99, 0}}) {
      std::vector<Stop> stops;
      std::vector<GeoPoint> pts;
      for (int i = 0; i < 120; ++i) {
        GeoPoint p = destination_point(centre, rng.uniform(0, 360), rng.uniform(0, 3000));
        pts.push_back(p);
        stops.push_back(stop_at(p, i));
      }
      const auto labels = cluster_destinations(stops, 400);
      CHECK(labels == cluster_destinations(stops, 400, BruteForceThresholdLabeler{}));
    }
  }

  TEST_CASE("random traces keep stops disjoint and tight") {
    Rng rng(4);
    StopParams p;
    std::vector<PositionedEvent> events;
    for (int u = 0; u < 8; ++u) {
      Timestamp t = 0;
      GeoPoint at{38.7, -9.3};
      for (int i = 0; i < 400; ++i) {
        if (rng.bernoulli(0.2)) at = destination_point(at, rng.uniform(0, 360), rng.uniform(0, 2000));
        const GeoPoint jitter = destination_point(at, rng.uniform(0, 360), rng.uniform(0, 250));
        t += static_cast<Timestamp>(rng.index(1800));
        events.push_back({"u" + std::to_string(u), t, "c", jitter});
      }
    }
    const auto stops = detect_stops_all(events, p);
    CHECK(stops == detect_stops_all_serial(events, p));
    std::map<std::string, std::vector<PositionedEvent>> by_user;
    for (const auto& e : events) by_user[e.user_id].push_back(e);
    for (std::size_t i = 0; i < stops.size(); ++i) {
      const auto& s = stops[i];
      CHECK(s.t_end - s.t_start >= p.min_duration_s);
      if (i + 1 < stops.size() && stops[i + 1].user_id == s.user_id) CHECK(s.t_end < stops[i + 1].t_start);
      const auto& trace = by_user[s.user_id];
      for (std::size_t k = s.first_event; k < s.first_event + s.n_events; ++k) {
        CHECK(haversine_distance(trace[k].location, s.median) <= p.r1_m + 1e-6);
      }
    }
  }

  TEST_CASE("stationary input yields one staypoint regardless of count") {
    StopParams p;
    const RegionIndex none;
    for (int n : {2, 7, 500}) {
      const auto sps = build_staypoints(dwell("u", {38.7, -9.3}, 0, n, 3000 / (n - 1) + 1), p, none);
      CHECK(sps.size() == 1);
    }
  }

  TEST_CASE("staypoints carry region names and stable ids") {
    StopParams p;
    const std::vector<Region> regions{
        region("M01", "Oeiras", RegionLevel::municipality, {rect(38.6, -9.4, 38.8, -9.2)}),
        region("P01", "Algés", RegionLevel::parish, {rect(38.6, -9.4, 38.8, -9.3)}, "M01")};
    const RegionIndex index(regions);
    auto events = dwell("u1", {38.7, -9.35}, 0, 6, 300);
    const auto other = dwell("u2", {38.7, -9.25}, 100, 6, 300);
    events.insert(events.end(), other.begin(), other.end());
    const auto sps = build_staypoints(events, p, index);
    REQUIRE(sps.size() == 2);
    CHECK(sps[0].staypoint_id == "sp000001");
    CHECK(sps[0].region_municipality == "M01");
    CHECK(sps[0].region_parish == "P01");
    CHECK(sps[1].region_municipality == "M01");
    CHECK_FALSE(sps[1].region_parish.has_value());
    CHECK(index.find(*sps[0].region_municipality)->name == "Oeiras");
    CHECK(sps == build_staypoints(events, p, index));

    const auto dir = std::filesystem::temp_directory_path() / "cdrpm_sp_io";
    std::filesystem::create_directories(dir);
    write_file(dir / "s.csv", write_staypoints(sps));
    CHECK(read_staypoints(dir / "s.csv") == sps);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("synthetic dwells are found once each, for the right user") {
    const Scenario sc = generate_scenario(small_scenario(5, 2, 13));
    const auto pos = position_events(sc.events, make_tower_table(sc.towers), sc.regions);
    const RegionIndex index(sc.regions);
    const auto sps = build_staypoints(pos, StopParams{}, index);
    std::map<std::string, std::size_t> found;
    for (const auto& s : sps) found[s.user_id]++;
    std::size_t total = 0;
    for (const auto& a : sc.truth.agents) {
      CHECK(found[a.user_id] == a.staypoints.size());
      total += a.staypoints.size();
    }
    CHECK(sps.size() == total);
  }

  TEST_CASE("parameter validation") {
    StopParams p;
    p.r1_m = 0;
    CHECK_THROWS_AS(p.validate(), Error);
    StopParams q;
    q.r2_m = 100;
    q.validate();
    CHECK(q.suspicious());
  }
}
