#include "cdrpm/stays.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include "cdrpm/error.hpp"

namespace cdrpm {

void StopParams::validate() const {
  if (!(r1_m > 0.0) || !(r2_m > 0.0) || min_duration_s <= 0 || max_gap_s <= 0) {
    throw Error(Errc::invalid_config, "stop parameters r1, r2, min_duration and max_gap must be > 0");
  }
}

GeoPoint componentwise_median(std::span<const GeoPoint> points) {
  if (points.empty()) throw Error(Errc::invalid_input, "median of empty point set");
  std::vector<double> lat(points.size()), lon(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    lat[i] = points[i].lat;
    lon[i] = points[i].lon;
  }
  auto median = [](std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
  };
  return {median(lat), median(lon)};
}

std::vector<Stop> detect_stops(std::span<const PositionedEvent> trace, const StopParams& params) {
  params.validate();
  std::vector<Stop> stops;
  const std::size_t n = trace.size();
  for (std::size_t k = 1; k < n; ++k) {
    if (trace[k].user_id != trace[0].user_id) {
      throw Error(Errc::invalid_input, "detect_stops expects a single user's trace");
    }
    if (trace[k].timestamp < trace[k - 1].timestamp) {
      throw Error(Errc::unsorted_input, "events of user " + trace[k].user_id + " are not time-ordered");
    }
  }

  std::vector<GeoPoint> members;
  std::size_t i = 0;
  while (i < n) {
    members.assign(1, trace[i].location);
    GeoPoint median = trace[i].location;
    std::size_t j = i + 1;
    for (; j < n; ++j) {
      if (trace[j].timestamp - trace[j - 1].timestamp > params.max_gap_s) break;
      if (haversine_distance(trace[j].location, median) > params.r1_m) break;
      members.push_back(trace[j].location);
      const GeoPoint updated = componentwise_median(members);
      const bool compact = std::all_of(members.begin(), members.end(), [&](const GeoPoint& p) {
        return haversine_distance(p, updated) <= params.r1_m;
      });
      if (!compact) {
        members.pop_back();
        break;
      }
      median = updated;
    }
    if (trace[j - 1].timestamp - trace[i].timestamp >= params.min_duration_s) {
      stops.push_back({trace[i].user_id, median, trace[i].timestamp, trace[j - 1].timestamp, j - i, i});
      i = j;
    } else {
      ++i;
    }
  }
  return stops;
}

namespace {

// Per-user traces in user_id order, event order preserved.
std::vector<std::vector<PositionedEvent>> split_by_user(std::span<const PositionedEvent> events) {
  std::map<std::string_view, std::vector<PositionedEvent>> groups;
  for (const auto& e : events) groups[e.user_id].push_back(e);
  std::vector<std::vector<PositionedEvent>> out;
  out.reserve(groups.size());
  for (auto& [user, evs] : groups) out.push_back(std::move(evs));
  return out;
}

}  // namespace

std::vector<Stop> detect_stops_all_serial(std::span<const PositionedEvent> events, const StopParams& params) {
  std::vector<Stop> out;
  for (const auto& trace : split_by_user(events)) {
    auto stops = detect_stops(trace, params);
    out.insert(out.end(), stops.begin(), stops.end());
  }
  return out;
}

std::vector<Stop> detect_stops_all(std::span<const PositionedEvent> events, const StopParams& params) {
  params.validate();
  const auto traces = split_by_user(events);
  std::vector<std::vector<Stop>> per_user(traces.size());
  const auto n = static_cast<std::int64_t>(traces.size());
  std::int64_t failed_at = n;
#pragma omp parallel for schedule(dynamic, 4) reduction(min : failed_at)
  for (std::int64_t u = 0; u < n; ++u) {
    try {
      per_user[static_cast<std::size_t>(u)] = detect_stops(traces[static_cast<std::size_t>(u)], params);
    } catch (const Error&) {
      failed_at = std::min(failed_at, u);
    }
  }
  if (failed_at < n) detect_stops(traces[static_cast<std::size_t>(failed_at)], params);
  std::vector<Stop> out;
  for (auto& s : per_user) out.insert(out.end(), s.begin(), s.end());
  return out;
}

namespace {

struct DisjointSet {
  std::vector<std::size_t> parent;
  explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

std::vector<std::size_t> roots(DisjointSet& ds) {
  std::vector<std::size_t> out(ds.parent.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ds.find(i);
  return out;
}

}  // namespace

std::vector<std::size_t> BruteForceThresholdLabeler::components(std::span<const Stop> stops, double r2_m) const {
  DisjointSet ds(stops.size());
  for (std::size_t i = 0; i < stops.size(); ++i) {
    for (std::size_t j = i + 1; j < stops.size(); ++j) {
      if (haversine_distance(stops[i].median, stops[j].median) <= r2_m) ds.unite(i, j);
    }
  }
  return roots(ds);
}

std::vector<std::size_t> ThresholdGraphLabeler::components(std::span<const Stop> stops, double r2_m) const {
  const std::size_t n = stops.size();
  double max_abs_lat = 0.0;
  double min_lon = 180.0, max_lon = -180.0;
  for (const auto& s : stops) {
    max_abs_lat = std::max(max_abs_lat, std::abs(s.median.lat));
    min_lon = std::min(min_lon, s.median.lon);
    max_lon = std::max(max_lon, s.median.lon);
  }
  // Bucketing degenerates near the poles and across the antimeridian.
  if (n < 64 || max_abs_lat > 80.0 || (min_lon < -179.0 && max_lon > 179.0)) {
    return BruteForceThresholdLabeler{}.components(stops, r2_m);
  }

  const double dlat = r2_m / (kEarthRadiusM * std::numbers::pi / 180.0);
  const double dlon = 1.01 * dlat / std::cos(max_abs_lat * std::numbers::pi / 180.0);
  using Key = std::pair<std::int64_t, std::int64_t>;
  auto key_of = [&](GeoPoint p) {
    return Key{static_cast<std::int64_t>(std::floor(p.lat / dlat)), static_cast<std::int64_t>(std::floor(p.lon / dlon))};
  };
  std::map<Key, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < n; ++i) buckets[key_of(stops[i].median)].push_back(i);

  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> edges(n);
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 64)
  for (std::int64_t ii = 0; ii < count; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const Key k = key_of(stops[i].median);
    for (std::int64_t a = -1; a <= 1; ++a) {
      for (std::int64_t b = -1; b <= 1; ++b) {
        const auto it = buckets.find({k.first + a, k.second + b});
        if (it == buckets.end()) continue;
        for (const auto j : it->second) {
          if (j > i && haversine_distance(stops[i].median, stops[j].median) <= r2_m) edges[i].emplace_back(i, j);
        }
      }
    }
  }
  DisjointSet ds(n);
  for (const auto& list : edges) {
    for (const auto& [a, b] : list) ds.unite(a, b);
  }
  return roots(ds);
}

std::vector<std::string> cluster_destinations(std::span<const Stop> stops, double r2_m,
                                              const DestinationLabeler& labeler) {
  if (!(r2_m > 0.0)) throw Error(Errc::invalid_config, "r2 must be > 0");
  const auto comp = labeler.components(stops, r2_m);
  std::vector<std::size_t> order(stops.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(stops[a].t_start, stops[a].user_id, a) < std::tie(stops[b].t_start, stops[b].user_id, b);
  });
  std::unordered_map<std::size_t, std::size_t> label_of;
  for (const auto i : order) label_of.emplace(comp[i], label_of.size());
  std::vector<std::string> out(stops.size());
  for (std::size_t i = 0; i < stops.size(); ++i) out[i] = "L" + std::to_string(label_of.at(comp[i]));
  return out;
}

std::vector<Staypoint> build_staypoints(std::span<const PositionedEvent> events, const StopParams& params,
                                        const RegionIndex& regions, const DestinationLabeler& labeler) {
  const auto stops = detect_stops_all(events, params);
  const auto labels = cluster_destinations(stops, params.r2_m, labeler);
  std::vector<Staypoint> out(stops.size());
  const auto n = static_cast<std::int64_t>(stops.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t ii = 0; ii < n; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const Stop& s = stops[i];
    Staypoint& sp = out[i];
    char id[32];
    std::snprintf(id, sizeof id, "sp%06zu", i + 1);
    sp.staypoint_id = id;
    sp.user_id = s.user_id;
    sp.location_id = labels[i];
    sp.median = s.median;
    sp.t_start = s.t_start;
    sp.t_end = s.t_end;
    sp.region_parish = regions.assign(s.median, RegionLevel::parish);
    sp.region_municipality = regions.assign(s.median, RegionLevel::municipality);
  }
  return out;
}

namespace {
const csv::Row kStaypointHeader{"staypoint_id", "user_id", "location_id", "lat",         "lon",
                                "t_start",      "t_end",   "parish",      "municipality"};
}

std::vector<Staypoint> read_staypoints(const std::filesystem::path& path) {
  const auto table = csv::Table::read(path, kStaypointHeader);
  std::vector<Staypoint> out;
  out.reserve(table.rows().size());
  auto opt = [](const std::string& s) { return s.empty() ? std::nullopt : std::optional<std::string>(s); };
  for (const auto& r : table.rows()) {
    out.push_back({r[0], r[1], r[2], {parse_double(r[3]), parse_double(r[4])}, parse_iso8601(r[5]),
                   parse_iso8601(r[6]), opt(r[7]), opt(r[8])});
  }
  return out;
}

std::string write_staypoints(std::span<const Staypoint> staypoints) {
  std::ostringstream out;
  csv::write_row(out, kStaypointHeader);
  for (const auto& s : staypoints) {
    csv::write_row(out, {s.staypoint_id, s.user_id, s.location_id, format_double(s.median.lat),
                         format_double(s.median.lon), format_iso8601(s.t_start), format_iso8601(s.t_end),
                         s.region_parish.value_or(""), s.region_municipality.value_or("")});
  }
  return out.str();
}

}  // namespace cdrpm
