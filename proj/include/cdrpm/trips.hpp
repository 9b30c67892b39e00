#pragma once

// Triplegs between consecutive staypoints, trips as chains of triplegs, and
// kinematic transport-mode labels.

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cdrpm/geo.hpp"
#include "cdrpm/stays.hpp"

namespace cdrpm {

enum class Mode { walk, bicycle, bus, car, train, unknown };

inline constexpr Mode kAllModes[] = {Mode::walk, Mode::bicycle, Mode::bus, Mode::car, Mode::train, Mode::unknown};

std::string_view to_string(Mode mode);     // "bus"
std::string_view display_name(Mode mode);  // "Bus"
Mode parse_mode(std::string_view text);

/// Speed/length decision table, km/h and meters:
///   walk     speed < walk_max
///   bicycle  speed < bicycle_max
///   bus      speed < bus_max, or speed < bus_short_max on legs shorter than bus_short_length
///   train    speed >= car_max, or speed >= train_long_min on legs of at least train_long_length
///   car      everything else
/// Legs shorter than min_duration_s are `unknown`.
struct ModeThresholds {
  double walk_max_kmh = 7.0;
  double bicycle_max_kmh = 15.0;
  double bus_max_kmh = 27.0;
  double bus_short_max_kmh = 45.0;
  double bus_short_length_m = 3000.0;
  double car_max_kmh = 60.0;
  double train_long_min_kmh = 45.0;
  double train_long_length_m = 8000.0;
  Timestamp min_duration_s = 60;

  void validate() const;
  Mode classify(double speed_kmh, double length_m) const;
};

struct Tripleg {
  std::string tripleg_id;
  std::string user_id;
  std::string origin_staypoint;
  std::string dest_staypoint;
  Timestamp t_start = 0;
  Timestamp t_end = 0;
  double path_length_m = 0.0;
  double avg_speed_kmh = 0.0;
  Mode mode = Mode::unknown;

  Timestamp duration() const { return t_end - t_start; }
  friend bool operator==(const Tripleg&, const Tripleg&) = default;
};

struct Trip {
  std::string trip_id;
  std::string user_id;
  std::vector<Tripleg> triplegs;
  std::string origin;
  std::string destination;
  Timestamp t_start = 0;
  Timestamp t_end = 0;

  /// Mode of the longest leg by path length; the earliest wins ties.
  Mode primary_mode() const;
  friend bool operator==(const Trip&, const Trip&) = default;
};

/// Events strictly between the end of one staypoint and the start of the next.
/// Both inputs belong to one user and are time-ordered.
std::vector<PositionedEvent> moving_events(std::span<const PositionedEvent> user_events,
                                           std::span<const Staypoint> user_staypoints);

/// One leg per consecutive staypoint pair that changes location or has
/// movement in between. Legs get local ids "tl0", "tl1", ... and mode unknown;
/// zero-duration gaps yield no leg.
std::vector<Tripleg> derive_triplegs(std::span<const Staypoint> staypoints,
                                     std::span<const PositionedEvent> moving);

/// Merges chained legs whose idle gap is <= gap_threshold_s.
std::vector<Trip> assemble_trips(std::span<const Tripleg> triplegs, Timestamp gap_threshold_s);

Mode label_mode(const Tripleg& leg, const ModeThresholds& thresholds);

struct TripSet {
  std::vector<Tripleg> triplegs;  // ids "tl000001", ... in (user, time) order
  std::vector<Trip> trips;        // ids "trip_000001", ...
};

/// Full per-user composition, parallel over users.
TripSet build_trips(std::span<const PositionedEvent> events, std::span<const Staypoint> staypoints,
                    const ModeThresholds& thresholds, Timestamp gap_threshold_s);
TripSet build_trips_serial(std::span<const PositionedEvent> events, std::span<const Staypoint> staypoints,
                           const ModeThresholds& thresholds, Timestamp gap_threshold_s);

inline constexpr Timestamp kDefaultTripGapS = 25 * 60;

/// trips.csv: trip_id,user_id,origin_sp,dest_sp,t_start,t_end,n_legs,primary_mode,heuristic
/// triplegs.csv: tripleg_id,trip_id,user_id,origin_sp,dest_sp,t_start,t_end,path_length_m,avg_speed_kmh,mode,heuristic
std::string write_trips(std::span<const Trip> trips);
std::string write_triplegs(std::span<const Trip> trips);
std::vector<Trip> read_trips(const std::filesystem::path& trips_csv, const std::filesystem::path& triplegs_csv);

}  // namespace cdrpm
