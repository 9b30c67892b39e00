#include "cdrpm/trips.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include "cdrpm/error.hpp"

namespace cdrpm {

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::walk: return "walk";
    case Mode::bicycle: return "bicycle";
    case Mode::bus: return "bus";
    case Mode::car: return "car";
    case Mode::train: return "train";
    case Mode::unknown: return "unknown";
  }
  return "unknown";
}

std::string_view display_name(Mode mode) {
  switch (mode) {
    case Mode::walk: return "Walk";
    case Mode::bicycle: return "Bicycle";
    case Mode::bus: return "Bus";
    case Mode::car: return "Car";
    case Mode::train: return "Train";
    case Mode::unknown: return "Unknown";
  }
  return "Unknown";
}

Mode parse_mode(std::string_view text) {
  for (const Mode m : kAllModes) {
    if (text == to_string(m) || text == display_name(m)) return m;
  }
  throw Error(Errc::invalid_input, "unknown mode '" + std::string(text) + "'");
}

void ModeThresholds::validate() const {
  const bool ordered = walk_max_kmh > 0.0 && walk_max_kmh <= bicycle_max_kmh && bicycle_max_kmh <= bus_max_kmh &&
                       bus_max_kmh <= bus_short_max_kmh && bus_short_max_kmh <= car_max_kmh &&
                       bus_max_kmh <= train_long_min_kmh && train_long_min_kmh <= car_max_kmh;
  if (!ordered) throw Error(Errc::invalid_config, "mode speed bands must be increasing");
  if (bus_short_length_m < 0.0 || train_long_length_m < 0.0 || min_duration_s < 0) {
    throw Error(Errc::invalid_config, "mode length thresholds must be >= 0");
  }
}

Mode ModeThresholds::classify(double speed_kmh, double length_m) const {
  if (speed_kmh < walk_max_kmh) return Mode::walk;
  if (speed_kmh < bicycle_max_kmh) return Mode::bicycle;
  if (speed_kmh < bus_max_kmh) return Mode::bus;
  if (speed_kmh < bus_short_max_kmh && length_m < bus_short_length_m) return Mode::bus;
  if (speed_kmh >= car_max_kmh) return Mode::train;
  if (speed_kmh >= train_long_min_kmh && length_m >= train_long_length_m) return Mode::train;
  return Mode::car;
}

Mode Trip::primary_mode() const {
  const Tripleg* best = nullptr;
  for (const auto& leg : triplegs) {
    if (!best || leg.path_length_m > best->path_length_m) best = &leg;
  }
  return best ? best->mode : Mode::unknown;
}

std::vector<PositionedEvent> moving_events(std::span<const PositionedEvent> user_events,
                                           std::span<const Staypoint> user_staypoints) {
  std::vector<PositionedEvent> out;
  if (user_staypoints.size() < 2) return out;
  std::size_t k = 0;
  for (const auto& e : user_events) {
    while (k + 1 < user_staypoints.size() && e.timestamp >= user_staypoints[k + 1].t_start) ++k;
    if (k + 1 >= user_staypoints.size()) break;
    if (e.timestamp > user_staypoints[k].t_end && e.timestamp < user_staypoints[k + 1].t_start) out.push_back(e);
  }
  return out;
}

std::vector<Tripleg> derive_triplegs(std::span<const Staypoint> staypoints,
                                     std::span<const PositionedEvent> moving) {
  std::vector<Tripleg> legs;
  std::size_t m = 0;
  for (std::size_t k = 0; k + 1 < staypoints.size(); ++k) {
    const Staypoint& a = staypoints[k];
    const Staypoint& b = staypoints[k + 1];
    if (a.user_id != b.user_id) throw Error(Errc::invalid_input, "derive_triplegs expects one user's staypoints");
    if (b.t_start < a.t_end) throw Error(Errc::unsorted_input, "staypoints of user " + a.user_id + " overlap");
    while (m < moving.size() && moving[m].timestamp <= a.t_end) ++m;
    std::vector<GeoPoint> chain{a.median};
    while (m < moving.size() && moving[m].timestamp < b.t_start) chain.push_back(moving[m++].location);
    chain.push_back(b.median);
    const bool moved = chain.size() > 2;
    if (a.location_id == b.location_id && !moved) continue;
    if (b.t_start <= a.t_end) continue;

    Tripleg leg;
    leg.tripleg_id = "tl" + std::to_string(legs.size());
    leg.user_id = a.user_id;
    leg.origin_staypoint = a.staypoint_id;
    leg.dest_staypoint = b.staypoint_id;
    leg.t_start = a.t_end;
    leg.t_end = b.t_start;
    for (std::size_t i = 0; i + 1 < chain.size(); ++i) leg.path_length_m += haversine_distance(chain[i], chain[i + 1]);
    leg.avg_speed_kmh = (leg.path_length_m / 1000.0) / (static_cast<double>(leg.duration()) / 3600.0);
    legs.push_back(std::move(leg));
  }
  return legs;
}

std::vector<Trip> assemble_trips(std::span<const Tripleg> triplegs, Timestamp gap_threshold_s) {
  std::vector<Trip> trips;
  for (const auto& leg : triplegs) {
    const bool extend = !trips.empty() && trips.back().user_id == leg.user_id &&
                        trips.back().destination == leg.origin_staypoint &&
                        leg.t_start - trips.back().t_end <= gap_threshold_s;
    if (extend) {
      Trip& t = trips.back();
      t.triplegs.push_back(leg);
      t.destination = leg.dest_staypoint;
      t.t_end = leg.t_end;
    } else {
      Trip t;
      t.trip_id = "trip_" + std::to_string(trips.size() + 1);
      t.user_id = leg.user_id;
      t.triplegs.push_back(leg);
      t.origin = leg.origin_staypoint;
      t.destination = leg.dest_staypoint;
      t.t_start = leg.t_start;
      t.t_end = leg.t_end;
      trips.push_back(std::move(t));
    }
  }
  return trips;
}

Mode label_mode(const Tripleg& leg, const ModeThresholds& thresholds) {
  if (leg.duration() < thresholds.min_duration_s) return Mode::unknown;
  return thresholds.classify(leg.avg_speed_kmh, leg.path_length_m);
}

namespace {

std::vector<std::vector<PositionedEvent>> events_by_user(std::span<const PositionedEvent> events,
                                                         std::span<const Staypoint> staypoints,
                                                         std::vector<std::span<const Staypoint>>& sp_slices) {
  std::map<std::string_view, std::size_t> slot;
  std::size_t begin = 0;
  for (std::size_t i = 1; i <= staypoints.size(); ++i) {
    if (i == staypoints.size() || staypoints[i].user_id != staypoints[begin].user_id) {
      if (!slot.emplace(staypoints[begin].user_id, sp_slices.size()).second) {
        throw Error(Errc::unsorted_input, "staypoints are not grouped by user");
      }
      sp_slices.push_back(staypoints.subspan(begin, i - begin));
      begin = i;
    }
  }
  std::vector<std::vector<PositionedEvent>> out(sp_slices.size());
  for (const auto& e : events) {
    const auto it = slot.find(e.user_id);
    if (it != slot.end()) out[it->second].push_back(e);
  }
  return out;
}

std::vector<Trip> user_trips(std::span<const PositionedEvent> events, std::span<const Staypoint> staypoints,
                             const ModeThresholds& thresholds, Timestamp gap) {
  auto legs = derive_triplegs(staypoints, moving_events(events, staypoints));
  for (auto& leg : legs) leg.mode = label_mode(leg, thresholds);
  return assemble_trips(legs, gap);
}

TripSet renumber(std::vector<std::vector<Trip>> per_user) {
  TripSet out;
  char id[32];
  for (auto& trips : per_user) {
    for (auto& trip : trips) {
      std::snprintf(id, sizeof id, "trip_%06zu", out.trips.size() + 1);
      trip.trip_id = id;
      for (auto& leg : trip.triplegs) {
        std::snprintf(id, sizeof id, "tl%06zu", out.triplegs.size() + 1);
        leg.tripleg_id = id;
        out.triplegs.push_back(leg);
      }
      out.trips.push_back(std::move(trip));
    }
  }
  return out;
}

}  // namespace

TripSet build_trips_serial(std::span<const PositionedEvent> events, std::span<const Staypoint> staypoints,
                           const ModeThresholds& thresholds, Timestamp gap_threshold_s) {
  thresholds.validate();
  std::vector<std::span<const Staypoint>> slices;
  const auto evs = events_by_user(events, staypoints, slices);
  std::vector<std::vector<Trip>> per_user;
  for (std::size_t u = 0; u < slices.size(); ++u) {
    per_user.push_back(user_trips(evs[u], slices[u], thresholds, gap_threshold_s));
  }
  return renumber(std::move(per_user));
}

TripSet build_trips(std::span<const PositionedEvent> events, std::span<const Staypoint> staypoints,
                    const ModeThresholds& thresholds, Timestamp gap_threshold_s) {
  thresholds.validate();
  std::vector<std::span<const Staypoint>> slices;
  const auto evs = events_by_user(events, staypoints, slices);
  std::vector<std::vector<Trip>> per_user(slices.size());
  const auto n = static_cast<std::int64_t>(slices.size());
  std::int64_t failed_at = n;
#pragma omp parallel for schedule(dynamic, 4) reduction(min : failed_at)
  for (std::int64_t u = 0; u < n; ++u) {
    const auto i = static_cast<std::size_t>(u);
    try {
      per_user[i] = user_trips(evs[i], slices[i], thresholds, gap_threshold_s);
    } catch (const Error&) {
      failed_at = std::min(failed_at, u);
    }
  }
  if (failed_at < n) {
    const auto i = static_cast<std::size_t>(failed_at);
    user_trips(evs[i], slices[i], thresholds, gap_threshold_s);
  }
  return renumber(std::move(per_user));
}

namespace {
const csv::Row kTripHeader{"trip_id", "user_id", "origin_sp", "dest_sp", "t_start",
                           "t_end",   "n_legs",  "primary_mode", "heuristic"};
const csv::Row kLegHeader{"tripleg_id", "trip_id",       "user_id",       "origin_sp", "dest_sp",  "t_start",
                          "t_end",      "path_length_m", "avg_speed_kmh", "mode",      "heuristic"};
}  // namespace

std::string write_trips(std::span<const Trip> trips) {
  std::ostringstream out;
  csv::write_row(out, kTripHeader);
  for (const auto& t : trips) {
    csv::write_row(out, {t.trip_id, t.user_id, t.origin, t.destination, format_iso8601(t.t_start),
                         format_iso8601(t.t_end), std::to_string(t.triplegs.size()),
                         std::string(to_string(t.primary_mode())), "true"});
  }
  return out.str();
}

std::string write_triplegs(std::span<const Trip> trips) {
  std::ostringstream out;
  csv::write_row(out, kLegHeader);
  for (const auto& t : trips) {
    for (const auto& l : t.triplegs) {
      csv::write_row(out, {l.tripleg_id, t.trip_id, l.user_id, l.origin_staypoint, l.dest_staypoint,
                           format_iso8601(l.t_start), format_iso8601(l.t_end), format_double(l.path_length_m),
                           format_double(l.avg_speed_kmh), std::string(to_string(l.mode)), "true"});
    }
  }
  return out.str();
}

std::vector<Trip> read_trips(const std::filesystem::path& trips_csv, const std::filesystem::path& triplegs_csv) {
  const auto trips_table = csv::Table::read(trips_csv, kTripHeader);
  const auto legs_table = csv::Table::read(triplegs_csv, kLegHeader);
  std::map<std::string, std::vector<Tripleg>, std::less<>> legs_of;
  for (const auto& r : legs_table.rows()) {
    Tripleg l{r[0], r[2], r[3], r[4], parse_iso8601(r[5]), parse_iso8601(r[6]), parse_double(r[7]),
              parse_double(r[8]), parse_mode(r[9])};
    legs_of[r[1]].push_back(std::move(l));
  }
  std::vector<Trip> out;
  out.reserve(trips_table.rows().size());
  for (const auto& r : trips_table.rows()) {
    Trip t;
    t.trip_id = r[0];
    t.user_id = r[1];
    t.origin = r[2];
    t.destination = r[3];
    t.t_start = parse_iso8601(r[4]);
    t.t_end = parse_iso8601(r[5]);
    auto it = legs_of.find(t.trip_id);
    if (it != legs_of.end()) t.triplegs = std::move(it->second);
    if (t.triplegs.size() != static_cast<std::size_t>(parse_int(r[6]))) {
      throw Error(Errc::invalid_input, trips_csv.string() + ": trip " + t.trip_id + " leg count mismatch");
    }
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace cdrpm
