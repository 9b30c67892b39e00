#pragma once

// Shared fixtures and independent reference implementations for the tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "cdrpm/discovery.hpp"
#include "cdrpm/event_log.hpp"
#include "cdrpm/geo.hpp"
#include "cdrpm/synth.hpp"
#include "cdrpm/trips.hpp"

namespace testsupport {

using namespace cdrpm;

/// Spherical law of cosines; independent of the haversine formulation.
inline double cosine_law_distance(GeoPoint a, GeoPoint b) {
  const double d2r = M_PI / 180.0;
  const double c = std::sin(a.lat * d2r) * std::sin(b.lat * d2r) +
                   std::cos(a.lat * d2r) * std::cos(b.lat * d2r) * std::cos((b.lon - a.lon) * d2r);
  return kEarthRadiusM * std::acos(std::clamp(c, -1.0, 1.0));
}

/// Rectangle ring, counter-clockwise, closed.
inline Ring rect(double lat0, double lon0, double lat1, double lon1) {
  return {{lat0, lon0}, {lat0, lon1}, {lat1, lon1}, {lat1, lon0}, {lat0, lon0}};
}

inline Region region(std::string id, std::string name, RegionLevel level, std::vector<Ring> rings,
                     std::optional<std::string> parent = std::nullopt) {
  Region r;
  r.region_id = std::move(id);
  r.name = std::move(name);
  r.level = level;
  r.boundary = std::move(rings);
  r.parent_id = std::move(parent);
  return r;
}

/// Irregular triangles to hexagons scattered over 38-39N, 9.6-8.8W with
/// overlaps and gaps; odd ones are parishes.
inline std::vector<Region> random_regions(Rng& rng, std::size_t n) {
  std::vector<Region> regions;
  for (std::size_t i = 0; i < n; ++i) {
    const double clat = rng.uniform(38.0, 39.0), clon = rng.uniform(-9.6, -8.8);
    Ring ring;
    const int k = 3 + static_cast<int>(rng.index(4));
    for (int v = 0; v < k; ++v) {
      const double ang = 2 * M_PI * v / k + rng.uniform(0, 0.5);
      const double rad = rng.uniform(0.02, 0.15);
      ring.push_back({clat + rad * std::sin(ang), clon + rad * std::cos(ang)});
    }
    ring.push_back(ring.front());
    const bool parish = i % 2;
    regions.push_back(region("R" + std::to_string(100 + i), "n", parish ? RegionLevel::parish : RegionLevel::municipality,
                             {ring}, parish ? std::optional<std::string>("X") : std::nullopt));
  }
  return regions;
}

/// Random log over activities "A".."A+alphabet-1"; timestamps nondecreasing.
inline CaseLog random_log(Rng& rng, std::size_t n_traces, std::size_t alphabet, std::size_t max_len) {
  CaseLog log;
  for (std::size_t i = 0; i < n_traces; ++i) {
    Trace t;
    t.case_id = "c" + std::to_string(i);
    const std::size_t len = 1 + rng.index(max_len);
    Timestamp ts = static_cast<Timestamp>(rng.index(100000));
    for (std::size_t k = 0; k < len; ++k) {
      t.events.push_back({std::string(1, static_cast<char>('A' + rng.index(alphabet))), ts});
      ts += static_cast<Timestamp>(rng.index(3600));
    }
    log.traces.push_back(std::move(t));
  }
  return log;
}

/// Random OCEL with distinct event timestamps; each event relates to 1-3 objects.
inline Ocel random_ocel(Rng& rng, std::size_t n_events, std::size_t n_objects, std::size_t n_types,
                        std::size_t alphabet) {
  Ocel o;
  for (std::size_t t = 0; t < n_types; ++t) o.object_types.push_back("T" + std::to_string(t));
  for (std::size_t i = 0; i < n_objects; ++i) {
    o.objects.push_back({"o" + std::to_string(i), o.object_types[rng.index(n_types)]});
  }
  std::vector<Timestamp> stamps(n_events);
  std::iota(stamps.begin(), stamps.end(), 0);
  for (std::size_t i = n_events; i > 1; --i) std::swap(stamps[i - 1], stamps[rng.index(i)]);
  for (std::size_t i = 0; i < n_events; ++i) {
    OcelEvent e;
    e.id = "e" + std::to_string(i);
    e.activity = std::string(1, static_cast<char>('A' + rng.index(alphabet)));
    e.timestamp = 1000 + stamps[i] * 7;
    std::set<std::size_t> picked;
    const std::size_t k = 1 + rng.index(3);
    while (picked.size() < std::min(k, n_objects)) picked.insert(rng.index(n_objects));
    for (auto p : picked) e.relations.push_back({o.objects[p].id, "rel"});
    o.events.push_back(std::move(e));
  }
  return o;
}

/// Per-type flattening by scanning every (object, event) pair.
inline std::vector<std::vector<std::pair<Timestamp, std::string>>> brute_flatten(const Ocel& o,
                                                                                  const std::string& type) {
  std::vector<std::vector<std::pair<Timestamp, std::string>>> out;
  for (const auto& obj : o.objects) {
    if (obj.type != type) continue;
    std::vector<std::pair<Timestamp, std::string>> seq;
    for (const auto& e : o.events) {
      for (const auto& r : e.relations) {
        if (r.object_id == obj.id) {
          seq.emplace_back(e.timestamp, e.activity);
          break;
        }
      }
    }
    if (seq.empty()) continue;
    std::sort(seq.begin(), seq.end());
    out.push_back(std::move(seq));
  }
  return out;
}

struct PlainDfg {
  std::map<std::pair<std::string, std::string>, std::size_t> arcs;
  std::map<std::pair<std::string, std::string>, std::vector<double>> gaps;
  std::map<std::string, std::size_t> starts, ends, nodes;
};

/// Direct counting over sequences of (timestamp, activity).
inline PlainDfg plain_dfg(const std::vector<std::vector<std::pair<Timestamp, std::string>>>& seqs) {
  PlainDfg d;
  for (const auto& s : seqs) {
    d.starts[s.front().second]++;
    d.ends[s.back().second]++;
    for (std::size_t i = 0; i < s.size(); ++i) {
      d.nodes[s[i].second]++;
      if (i + 1 < s.size()) {
        d.arcs[{s[i].second, s[i + 1].second}]++;
        d.gaps[{s[i].second, s[i + 1].second}].push_back(static_cast<double>(s[i + 1].first - s[i].first));
      }
    }
  }
  return d;
}

inline std::vector<std::vector<std::pair<Timestamp, std::string>>> sequences(const CaseLog& log) {
  std::vector<std::vector<std::pair<Timestamp, std::string>>> out;
  for (const auto& t : log.traces) {
    std::vector<std::pair<Timestamp, std::string>> s;
    for (const auto& e : t.events) s.emplace_back(e.timestamp, e.activity);
    out.push_back(std::move(s));
  }
  return out;
}

/// True when `dfg` carries exactly the counts of `plain`.
inline bool same_counts(const Dfg& dfg, const PlainDfg& plain) {
  if (dfg.nodes != plain.nodes || dfg.start_counts != plain.starts || dfg.end_counts != plain.ends) return false;
  if (dfg.arcs.size() != plain.arcs.size()) return false;
  for (const auto& [k, n] : plain.arcs) {
    const auto it = dfg.arcs.find(k);
    if (it == dfg.arcs.end() || it->second.frequency != n) return false;
  }
  return true;
}

struct Ols {
  double slope, intercept, r;
};

/// Raw-sum normal equations, no centering.
inline Ols closed_form_ols(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += static_cast<long double>(x[i]) * x[i];
    syy += static_cast<long double>(y[i]) * y[i];
    sxy += static_cast<long double>(x[i]) * y[i];
  }
  const long double num = n * sxy - sx * sy;
  const long double den_x = n * sxx - sx * sx;
  const long double den_y = n * syy - sy * sy;
  const double slope = static_cast<double>(num / den_x);
  const double intercept = static_cast<double>((sy - slope * sx) / n);
  const double r = static_cast<double>(num / std::sqrt(den_x * den_y));
  return {slope, intercept, r};
}

/// Connected components over all pairs, as a canonical partition.
inline std::set<std::set<std::size_t>> brute_components(const std::vector<GeoPoint>& pts, double r) {
  std::vector<std::size_t> comp(pts.size());
  std::iota(comp.begin(), comp.end(), 0);
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      for (std::size_t j = i + 1; j < pts.size(); ++j) {
        if (comp[i] != comp[j] && cosine_law_distance(pts[i], pts[j]) <= r) {
          const auto lo = std::min(comp[i], comp[j]);
          comp[i] = comp[j] = lo;
          changed = true;
        }
      }
    }
  }
  std::map<std::size_t, std::set<std::size_t>> groups;
  for (std::size_t i = 0; i < pts.size(); ++i) groups[comp[i]].insert(i);
  std::set<std::set<std::size_t>> out;
  for (auto& [k, g] : groups) out.insert(std::move(g));
  return out;
}

/// Small scenario for fast tests.
inline ScenarioConfig small_scenario(std::size_t agents = 6, std::size_t days = 3, std::uint64_t seed = 11) {
  ScenarioConfig c;
  c.n_agents = agents;
  c.n_days = days;
  c.seed = seed;
  return c;
}

/// Staypoints, trips and the regions they resolve to.
struct Fixture {
  std::vector<Region> regions;
  std::vector<Staypoint> staypoints;
  std::vector<Trip> trips;
};

// Regions named after their ids; staypoints carry parish and municipality ids.
inline Staypoint place(const std::string& id, const std::string& parish, const std::string& muni, Timestamp t0, Timestamp t1) {
  Staypoint s;
  s.staypoint_id = id;
  s.user_id = "u";
  s.location_id = "L" + id;
  s.t_start = t0;
  s.t_end = t1;
  if (!parish.empty()) s.region_parish = parish;
  if (!muni.empty()) s.region_municipality = muni;
  return s;
}

inline Trip chain_trip(const std::string& id, const std::vector<const Staypoint*>& stops, Mode mode) {
  Trip t;
  t.trip_id = id;
  t.user_id = "u";
  for (std::size_t i = 0; i + 1 < stops.size(); ++i) {
    Tripleg l;
    l.tripleg_id = id + "_" + std::to_string(i);
    l.user_id = "u";
    l.origin_staypoint = stops[i]->staypoint_id;
    l.dest_staypoint = stops[i + 1]->staypoint_id;
    l.t_start = stops[i]->t_end;
    l.t_end = stops[i + 1]->t_start;
    l.path_length_m = 1000;
    l.mode = mode;
    t.triplegs.push_back(l);
  }
  t.origin = stops.front()->staypoint_id;
  t.destination = stops.back()->staypoint_id;
  t.t_start = t.triplegs.front().t_start;
  t.t_end = t.triplegs.back().t_end;
  return t;
}

inline std::vector<Region> named_regions(const std::vector<std::pair<std::string, RegionLevel>>& ids) {
  std::vector<Region> out;
  double lat = 0;
  for (const auto& [id, level] : ids) {
    out.push_back(region(id, id, level, {rect(lat, 0, lat + 1, 1)},
                         level == RegionLevel::parish ? std::optional<std::string>("M") : std::nullopt));
    lat += 2;
  }
  return out;
}

// A large random fixture: trips over 1..4 legs across 6 municipalities.
inline Fixture random_fixture(std::size_t n_trips, std::uint64_t seed) {
  Rng rng(seed);
  Fixture f;
  std::vector<std::pair<std::string, RegionLevel>> ids;
  for (int i = 0; i < 6; ++i) ids.emplace_back("M" + std::to_string(i), RegionLevel::municipality);
  f.regions = named_regions(ids);
  f.staypoints.reserve(n_trips * 5);
  Timestamp t = 0;
  for (std::size_t k = 0; k < n_trips; ++k) {
    const std::size_t legs = 1 + rng.index(4);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i <= legs; ++i) {
      t += 600 + static_cast<Timestamp>(rng.index(3600));
      f.staypoints.push_back(place("s" + std::to_string(f.staypoints.size()), "", "M" + std::to_string(rng.index(6)),
                                   t, t + 900));
      idx.push_back(f.staypoints.size() - 1);
      t += 900;
    }
    std::vector<const Staypoint*> stops;
    for (auto i : idx) stops.push_back(&f.staypoints[i]);
    char id[32];
    std::snprintf(id, sizeof id, "trip_%06zu", k + 1);
    f.trips.push_back(chain_trip(id, stops, kTravelModes[rng.index(5)]));
  }
  return f;
}

}  // namespace testsupport
